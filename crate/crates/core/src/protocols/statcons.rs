//! Phase-king consensus from any commit-adopt machine, for stationary
//! adversaries.
//!
//! `n` phases; phase `i` runs the commit-adopt machine on the current
//! estimates and then spends one round on king `p_i` broadcasting its
//! commit-adopt value. A processor that committed keeps its value; the others
//! take the king's bit when it arrives intact and keep their own value
//! otherwise.

use crate::model::{check_consensus, Bit, ProcessorId, RoundNumber, TaskVerdict, Value};

use super::{broadcast, CommitAdopt, Protocol, RoundDomain};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatCons<C> {
    ca: C,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StatConsState<S> {
    me: ProcessorId,
    pub temp: Bit,
    pub phase: usize,
    sub: usize,
    ca: Option<S>,
    /// The commit-adopt result of the current phase, awaiting the king round.
    graded: Option<(bool, Bit)>,
    pub done: bool,
}

impl<C: CommitAdopt> StatCons<C> {
    pub fn new(ca: C) -> Self {
        StatCons { ca }
    }

    pub fn inner(&self) -> &C {
        &self.ca
    }

    fn ca_rounds(&self) -> usize {
        self.ca.rounds().expect("commit-adopt machines have fixed length")
    }

    fn phase_len(&self) -> usize {
        self.ca_rounds() + 1
    }
}

impl<C: CommitAdopt> Protocol for StatCons<C> {
    type Input = Bit;
    type State = StatConsState<C::State>;
    type Output = Bit;

    fn name(&self) -> String {
        format!("statcons({})", self.ca.name())
    }

    fn n(&self) -> usize {
        self.ca.n()
    }

    fn rounds(&self) -> Option<usize> {
        Some(self.n() * self.phase_len())
    }

    fn domain(&self, step: usize) -> RoundDomain {
        let sub = step % self.phase_len();
        if sub < self.ca_rounds() {
            self.ca.domain(sub)
        } else {
            RoundDomain::Scalar(vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One), Value::Bot])
        }
    }

    fn init(&self, me: ProcessorId, input: &Bit) -> Self::State {
        StatConsState { me, temp: *input, phase: 0, sub: 0, ca: Some(self.ca.init(me, input)), graded: None, done: false }
    }

    fn send(&self, state: &Self::State, round: RoundNumber) -> Vec<Value> {
        let n = self.n();
        if state.done {
            return broadcast(n, Value::Bot);
        }
        match &state.ca {
            Some(ca) => self.ca.send(ca, round),
            None => {
                let king = state.phase == state.me.0;
                let (_, b) = state.graded.expect("graded before king round");
                broadcast(n, if king { Value::Bit(b) } else { Value::Bot })
            }
        }
    }

    fn receive(&self, state: &mut Self::State, round: RoundNumber, incoming: &[Option<Value>]) {
        if state.done {
            return;
        }
        if let Some(ca) = state.ca.as_mut() {
            self.ca.receive(ca, round, incoming);
            state.sub += 1;
            if state.sub == self.ca_rounds() {
                let out = self.ca.output(ca).expect("commit-adopt output after its last round");
                state.graded = Some((out.is_commit(), out.value));
                state.ca = None;
            }
            return;
        }
        let (committed, b) = state.graded.take().expect("graded before king round");
        let from_king = incoming.get(state.phase).and_then(|v| v.as_ref()).and_then(Value::as_bit);
        state.temp = match (committed, from_king) {
            (true, _) | (false, None) => b,
            (false, Some(k)) => k,
        };
        state.phase += 1;
        state.sub = 0;
        if state.phase == self.n() {
            state.done = true;
        } else {
            state.ca = Some(self.ca.init(state.me, &state.temp));
        }
    }

    fn output(&self, state: &Self::State) -> Option<Bit> {
        state.done.then_some(state.temp)
    }

    fn verdict(&self, inputs: &[Bit], outputs: &[Bit]) -> TaskVerdict {
        let outs: Vec<Value> = outputs.iter().map(|&b| Value::Bit(b)).collect();
        check_consensus(inputs, &outs).expect("engine supplies n outputs")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{strategy_none, CorruptionSchedule, Silence};
    use crate::engine::{execute, FaultType};
    use crate::model::parse_bits;
    use crate::protocols::{GcCa, OmissionCa};

    #[test]
    fn fault_free_mixed_inputs_agree() {
        let p = StatCons::new(GcCa::new(4, 1).unwrap());
        let tr = execute(&p, &parse_bits("0,1,1,1").unwrap(), &mut strategy_none(), FaultType::Byzantine, CorruptionSchedule::stationary(1), 100).unwrap();
        assert_eq!(tr.rounds.len(), 12);
        assert!(tr.verdict.holds);
    }

    #[test]
    fn silenced_kings_do_not_break_agreement() {
        let p = StatCons::new(OmissionCa::new(4, 3).unwrap());
        for inputs in ["0,1,1,0", "1,1,1,1", "0,0,1,1"] {
            let tr = execute(&p, &parse_bits(inputs).unwrap(), &mut Silence { t: 3 }, FaultType::Omission, CorruptionSchedule::stationary(3), 100).unwrap();
            assert!(tr.verdict.holds, "{inputs}: {:?}", tr.outputs);
        }
    }
}
