//! Consensus for eventually-stationary adversaries: super-phases of the
//! phase-king protocol followed by an outer commit-adopt, repeated forever.
//! The estimate after each super-phase is the outer commit-adopt value; a
//! processor decides at its first outer commit.

use crate::model::{check_consensus, Bit, ProcessorId, RoundNumber, TaskVerdict, Value};

use super::statcons::{StatCons, StatConsState};
use super::{CommitAdopt, Protocol, RoundDomain};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Indulgent<C> {
    king: StatCons<C>,
    outer: C,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndulgentStage<S> {
    Kings(StatConsState<S>),
    Outer(S),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndulgentState<S> {
    me: ProcessorId,
    pub estimate: Bit,
    pub super_phase: usize,
    sub: usize,
    stage: IndulgentStage<S>,
    pub decided: Option<Bit>,
    /// Super-phase (0-based) of the first commit.
    pub decided_in: Option<usize>,
    /// Every bit this processor ever committed in an outer commit-adopt.
    pub committed: [bool; 2],
}

impl<C: CommitAdopt> Indulgent<C> {
    pub fn new(ca: C) -> Self {
        Indulgent { king: StatCons::new(ca.clone()), outer: ca }
    }

    pub fn king_rounds(&self) -> usize {
        self.king.rounds().expect("phase king has fixed length")
    }

    pub fn outer_rounds(&self) -> usize {
        self.outer.rounds().expect("commit-adopt machines have fixed length")
    }

    /// Rounds per super-phase.
    pub fn super_phase_len(&self) -> usize {
        self.king_rounds() + self.outer_rounds()
    }

    pub fn inner(&self) -> &C {
        &self.outer
    }
}

impl<C: CommitAdopt> Protocol for Indulgent<C> {
    type Input = Bit;
    type State = IndulgentState<C::State>;
    type Output = Bit;

    fn name(&self) -> String {
        format!("indulgent({})", self.outer.name())
    }

    fn n(&self) -> usize {
        self.outer.n()
    }

    fn rounds(&self) -> Option<usize> {
        None
    }

    fn domain(&self, step: usize) -> RoundDomain {
        let within = step % self.super_phase_len();
        if within < self.king_rounds() {
            self.king.domain(within)
        } else {
            self.outer.domain(within - self.king_rounds())
        }
    }

    fn init(&self, me: ProcessorId, input: &Bit) -> Self::State {
        IndulgentState {
            me,
            estimate: *input,
            super_phase: 0,
            sub: 0,
            stage: IndulgentStage::Kings(self.king.init(me, input)),
            decided: None,
            decided_in: None,
            committed: [false; 2],
        }
    }

    fn send(&self, state: &Self::State, round: RoundNumber) -> Vec<Value> {
        match &state.stage {
            IndulgentStage::Kings(s) => self.king.send(s, round),
            IndulgentStage::Outer(s) => self.outer.send(s, round),
        }
    }

    fn receive(&self, state: &mut Self::State, round: RoundNumber, incoming: &[Option<Value>]) {
        state.sub += 1;
        match &mut state.stage {
            IndulgentStage::Kings(s) => {
                self.king.receive(s, round, incoming);
                if state.sub == self.king_rounds() {
                    let v = self.king.output(s).expect("phase king output after its last round");
                    state.stage = IndulgentStage::Outer(self.outer.init(state.me, &v));
                }
            }
            IndulgentStage::Outer(s) => {
                self.outer.receive(s, round, incoming);
                if state.sub == self.super_phase_len() {
                    let out = self.outer.output(s).expect("commit-adopt output after its last round");
                    state.estimate = out.value;
                    if out.is_commit() {
                        state.committed[out.value.index()] = true;
                        if state.decided.is_none() {
                            state.decided = Some(out.value);
                            state.decided_in = Some(state.super_phase);
                        }
                    }
                    state.super_phase += 1;
                    state.sub = 0;
                    state.stage = IndulgentStage::Kings(self.king.init(state.me, &state.estimate));
                }
            }
        }
    }

    fn output(&self, state: &Self::State) -> Option<Bit> {
        state.decided
    }

    fn verdict(&self, inputs: &[Bit], outputs: &[Bit]) -> TaskVerdict {
        let outs: Vec<Value> = outputs.iter().map(|&b| Value::Bit(b)).collect();
        check_consensus(inputs, &outs).expect("engine supplies n outputs")
    }

    /// Composition safety: over all processors, at most one bit is ever
    /// decided or committed.
    fn audit(&self, _inputs: &[Bit], states: &[Self::State]) -> Vec<&'static str> {
        let mut bits = [false; 2];
        for s in states {
            if let Some(d) = s.decided {
                bits[d.index()] = true;
            }
            bits[0] |= s.committed[0];
            bits[1] |= s.committed[1];
        }
        if bits == [true, true] {
            vec!["composition_safety"]
        } else {
            Vec::new()
        }
    }
}
