//! Four-round commit-adopt against a mobile authenticated Byzantine adversary
//! with `2t < n`: one shared-memory emulation on the inputs, a majority
//! proposal, and a second emulation on the proposals.

use crate::model::{check_commit_adopt, Bit, CAOutput, ProcessorId, Proposal, RoundNumber, TaskVerdict, Value};

use super::madabsm::{Madabsm, MadabsmState};
use super::{check_size, more_than_half, Protocol, ProtocolError, RoundDomain};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthCa {
    n: usize,
    t: usize,
    on_bits: Madabsm,
    on_proposals: Madabsm,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AuthCaState {
    pub input: Bit,
    step: u8,
    inner: Option<MadabsmState>,
    /// Output of the first emulation.
    pub z: Option<Vec<Value>>,
    pub proposal: Option<Proposal>,
    /// Output of the second emulation.
    pub d: Option<Vec<Value>>,
    pub result: Option<CAOutput>,
}

pub fn proposal_values() -> Vec<Value> {
    vec![
        Value::Propose(Proposal::NoCommit),
        Value::Propose(Proposal::Commit(Bit::Zero)),
        Value::Propose(Proposal::Commit(Bit::One)),
    ]
}

impl AuthCa {
    pub fn new(n: usize, t: usize) -> Result<Self, ProtocolError> {
        check_size(n, t)?;
        Ok(AuthCa {
            n,
            t,
            on_bits: Madabsm::new(n, t, vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One)])?,
            on_proposals: Madabsm::new(n, t, proposal_values())?,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn beyond_bound(&self) -> bool {
        2 * self.t >= self.n
    }

    fn propose(&self, z: &[Value]) -> Proposal {
        for b in Bit::ALL {
            if more_than_half(z.iter().filter(|v| **v == Value::Bit(b)).count(), self.n) {
                return Proposal::Commit(b);
            }
        }
        Proposal::NoCommit
    }

    fn grade(&self, input: Bit, d: &[Value]) -> CAOutput {
        let count = |b: Bit| d.iter().filter(|v| **v == Value::Propose(Proposal::Commit(b))).count();
        let c = [count(Bit::Zero), count(Bit::One)];
        for b in Bit::ALL {
            if more_than_half(c[b.index()], self.n) {
                return CAOutput::commit(b);
            }
        }
        for b in Bit::ALL {
            if c[b.index()] > c[b.flip().index()] && c[b.index()] > 0 {
                return CAOutput::adopt(b);
            }
        }
        CAOutput::adopt(input)
    }

    /// Shared-memory task violations of both inner instances.
    pub fn inner_findings(&self, inputs: &[Bit], states: &[AuthCaState]) -> Vec<&'static str> {
        let mut failed = Vec::new();
        if let Some(z) = states.iter().map(|s| s.z.clone()).collect::<Option<Vec<_>>>() {
            let x: Vec<Value> = inputs.iter().map(|&b| Value::Bit(b)).collect();
            push_findings(&mut failed, &self.on_bits.findings(&x, &z));
        }
        let props = states.iter().map(|s| s.proposal.map(Value::Propose)).collect::<Option<Vec<_>>>();
        let ds = states.iter().map(|s| s.d.clone()).collect::<Option<Vec<_>>>();
        if let (Some(o), Some(d)) = (props, ds) {
            push_findings(&mut failed, &self.on_proposals.findings(&o, &d));
        }
        failed
    }
}

fn push_findings(out: &mut Vec<&'static str>, findings: &[(crate::model::Clause, Option<ProcessorId>)]) {
    use crate::model::Clause;
    for (c, _) in findings {
        let name = match c {
            Clause::Coverage => "sm_coverage",
            _ => "sm_consistency",
        };
        if !out.contains(&name) {
            out.push(name);
        }
    }
}

impl Protocol for AuthCa {
    type Input = Bit;
    type State = AuthCaState;
    type Output = CAOutput;

    fn name(&self) -> String {
        "auth_ca".into()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn rounds(&self) -> Option<usize> {
        Some(4)
    }

    fn domain(&self, step: usize) -> RoundDomain {
        match step {
            0 | 1 => self.on_bits.domain(step),
            _ => self.on_proposals.domain(step - 2),
        }
    }

    fn init(&self, me: ProcessorId, input: &Bit) -> AuthCaState {
        AuthCaState {
            input: *input,
            step: 0,
            inner: Some(self.on_bits.init(me, &Value::Bit(*input))),
            z: None,
            proposal: None,
            d: None,
            result: None,
        }
    }

    fn send(&self, state: &AuthCaState, round: RoundNumber) -> Vec<Value> {
        let inner = state.inner.as_ref().expect("inner instance running");
        match state.step {
            0 | 1 => self.on_bits.send(inner, round),
            _ => self.on_proposals.send(inner, round),
        }
    }

    fn receive(&self, state: &mut AuthCaState, round: RoundNumber, incoming: &[Option<Value>]) {
        let step = state.step;
        if step >= 4 {
            return;
        }
        let inner = state.inner.as_mut().expect("inner instance running");
        if step < 2 {
            self.on_bits.receive(inner, round, incoming);
        } else {
            self.on_proposals.receive(inner, round, incoming);
        }
        match step {
            1 => {
                let z = inner.result.clone().expect("first emulation done");
                let o = self.propose(&z);
                state.z = Some(z);
                state.proposal = Some(o);
                // The proposal machine ignores the processor id.
                state.inner = Some(self.on_proposals.init(ProcessorId(0), &Value::Propose(o)));
            }
            3 => {
                let d = inner.result.clone().expect("second emulation done");
                state.result = Some(self.grade(state.input, &d));
                state.d = Some(d);
                state.inner = None;
            }
            _ => {}
        }
        state.step += 1;
    }

    fn output(&self, state: &AuthCaState) -> Option<CAOutput> {
        state.result
    }

    fn verdict(&self, inputs: &[Bit], outputs: &[CAOutput]) -> TaskVerdict {
        check_commit_adopt(inputs, outputs).expect("engine supplies n outputs")
    }

    /// Inner shared-memory clauses and the single-proposal property, all
    /// promised for `2t < n`.
    fn audit(&self, inputs: &[Bit], states: &[AuthCaState]) -> Vec<&'static str> {
        if self.beyond_bound() {
            return Vec::new();
        }
        let mut failed = self.inner_findings(inputs, states);
        let mut proposed = [false; 2];
        for s in states {
            if let Some(Proposal::Commit(b)) = s.proposal {
                proposed[b.index()] = true;
            }
        }
        if proposed == [true, true] {
            failed.push("single_proposal");
        }
        failed
    }
}
