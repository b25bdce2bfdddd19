//! Two-round commit-adopt against a mobile send-omission adversary, any `t < n`.

use crate::model::{check_commit_adopt, Bit, CAOutput, ProcessorId, Proposal, RoundNumber, TaskVerdict, Value};

use super::{broadcast, check_size, Protocol, ProtocolError, RoundDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OmissionCa {
    n: usize,
    t: usize,
}

impl OmissionCa {
    pub fn new(n: usize, t: usize) -> Result<Self, ProtocolError> {
        check_size(n, t)?;
        Ok(OmissionCa { n, t })
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OmissionCaState {
    pub input: Bit,
    step: u8,
    /// Bits seen in round 1, own input included.
    seen: [bool; 2],
    /// What this processor sent in round 2.
    pub proposal: Option<Proposal>,
    /// Round-2 tallies: propose-commit(0), propose-commit(1), anything else.
    got_commit: [bool; 2],
    got_other: bool,
    pub result: Option<CAOutput>,
}

impl Protocol for OmissionCa {
    type Input = Bit;
    type State = OmissionCaState;
    type Output = CAOutput;

    fn name(&self) -> String {
        "omission_ca".into()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn rounds(&self) -> Option<usize> {
        Some(2)
    }

    fn domain(&self, step: usize) -> RoundDomain {
        match step {
            0 => RoundDomain::Scalar(vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One)]),
            _ => RoundDomain::Scalar(vec![
                Value::Propose(Proposal::NoCommit),
                Value::Propose(Proposal::Commit(Bit::Zero)),
                Value::Propose(Proposal::Commit(Bit::One)),
            ]),
        }
    }

    fn init(&self, _me: ProcessorId, input: &Bit) -> OmissionCaState {
        OmissionCaState {
            input: *input,
            step: 0,
            seen: [false; 2],
            proposal: None,
            got_commit: [false; 2],
            got_other: false,
            result: None,
        }
    }

    fn send(&self, state: &OmissionCaState, _round: RoundNumber) -> Vec<Value> {
        match state.step {
            0 => broadcast(self.n, Value::Bit(state.input)),
            1 => broadcast(self.n, Value::Propose(state.proposal.expect("proposal fixed after round 1"))),
            _ => broadcast(self.n, Value::Bot),
        }
    }

    fn receive(&self, state: &mut OmissionCaState, _round: RoundNumber, incoming: &[Option<Value>]) {
        match state.step {
            0 => {
                for v in incoming.iter().flatten() {
                    if let Some(b) = v.as_bit() {
                        state.seen[b.index()] = true;
                    }
                }
                state.proposal = Some(match state.seen {
                    [true, false] => Proposal::Commit(Bit::Zero),
                    [false, true] => Proposal::Commit(Bit::One),
                    _ => Proposal::NoCommit,
                });
            }
            1 => {
                for v in incoming.iter().flatten() {
                    match v.as_proposal() {
                        Some(Proposal::Commit(b)) => state.got_commit[b.index()] = true,
                        _ => state.got_other = true,
                    }
                }
                state.result = Some(match state.got_commit {
                    [true, false] if !state.got_other => CAOutput::commit(Bit::Zero),
                    [false, true] if !state.got_other => CAOutput::commit(Bit::One),
                    [true, false] => CAOutput::adopt(Bit::Zero),
                    [false, true] => CAOutput::adopt(Bit::One),
                    _ => CAOutput::adopt(Bit::Zero),
                });
                state.seen = [false; 2];
            }
            _ => {}
        }
        state.step = state.step.saturating_add(1);
    }

    fn output(&self, state: &OmissionCaState) -> Option<CAOutput> {
        state.result
    }

    fn verdict(&self, inputs: &[Bit], outputs: &[CAOutput]) -> TaskVerdict {
        check_commit_adopt(inputs, outputs).expect("engine supplies n outputs")
    }

    fn audit(&self, _inputs: &[Bit], states: &[OmissionCaState]) -> Vec<&'static str> {
        let mut proposed = [false; 2];
        for s in states {
            if let Some(Proposal::Commit(b)) = s.proposal {
                proposed[b.index()] = true;
            }
        }
        if proposed == [true, true] {
            vec!["single_proposal"]
        } else {
            Vec::new()
        }
    }
}
