//! Two-round shared-memory emulation against a mobile authenticated
//! Byzantine adversary with `2t < n`.
//!
//! Round 1 sends the input; round 2 relays everything received in round 1
//! as a vector of claims `(sender, round, value)`. Entry `l` of the output is
//! `b` when at least `n - t` reporters (self included) relayed `b` for `l`
//! and nobody relayed anything else, and `⊥` otherwise.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Clause, ProcessorId, RoundNumber, TaskVerdict, Value};

use super::{broadcast, check_size, Protocol, ProtocolError, RoundDomain};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Madabsm {
    n: usize,
    t: usize,
    domain: Vec<Value>,
}

/// One entry per processor; `Value::Bot` marks ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MadabsmOutput(pub Vec<Value>);

impl fmt::Display for MadabsmOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Value::Vector(self.0.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MadabsmState {
    pub input: Value,
    step: u8,
    start: RoundNumber,
    /// Round-1 values, one per sender.
    received: Vec<Value>,
    pub result: Option<Vec<Value>>,
}

impl Madabsm {
    /// `domain` is the honest input space `V`; its first element is the
    /// default for missing or malformed round-1 values.
    pub fn new(n: usize, t: usize, domain: Vec<Value>) -> Result<Self, ProtocolError> {
        check_size(n, t)?;
        assert!(!domain.is_empty(), "input domain must be non-empty");
        Ok(Madabsm { n, t, domain })
    }

    pub fn value_domain(&self) -> &[Value] {
        &self.domain
    }

    fn in_domain(&self, v: &Value) -> bool {
        self.domain.contains(v)
    }

    /// Parse a relayed vector; anything malformed reads as ⊥ⁿ.
    fn parse_report(&self, v: Option<&Value>, start: RoundNumber) -> Option<Vec<Value>> {
        let Some(Value::Vector(items)) = v else {
            return None;
        };
        if items.len() != self.n {
            return None;
        }
        items
            .iter()
            .enumerate()
            .map(|(l, item)| match item {
                Value::Claim(m) if m.sender.0 == l && m.round == start && self.in_domain(&m.content) => Some(m.content.clone()),
                _ => None,
            })
            .collect()
    }

    fn decide(&self, reports: &[Option<Vec<Value>>]) -> Vec<Value> {
        (0..self.n)
            .map(|l| {
                let mut candidate: Option<&Value> = None;
                let mut count = 0;
                for r in reports.iter().flatten() {
                    let v = &r[l];
                    match candidate {
                        None => {
                            candidate = Some(v);
                            count = 1;
                        }
                        Some(c) if c == v => count += 1,
                        Some(_) => return Value::Bot,
                    }
                }
                match candidate {
                    Some(c) if count + self.t >= self.n => c.clone(),
                    _ => Value::Bot,
                }
            })
            .collect()
    }

    /// Task violations over true inputs and final output vectors: coverage
    /// (at least `n - t` entries equal the true input everywhere, promised
    /// for `2t < n`) and pairwise consistency of non-⊥ entries.
    pub fn findings(&self, inputs: &[Value], outputs: &[Vec<Value>]) -> Vec<(Clause, Option<ProcessorId>)> {
        let mut out = Vec::new();
        for l in 0..self.n {
            let mut seen: Option<&Value> = None;
            for (j, y) in outputs.iter().enumerate() {
                let v = &y[l];
                if *v == Value::Bot {
                    continue;
                }
                match seen {
                    None => seen = Some(v),
                    Some(s) if s != v => out.push((Clause::Consistency, Some(ProcessorId(j)))),
                    Some(_) => {}
                }
            }
        }
        if 2 * self.t < self.n {
            let covered = (0..self.n).filter(|&l| outputs.iter().all(|y| y[l] == inputs[l])).count();
            if covered + self.t < self.n {
                out.push((Clause::Coverage, None));
            }
        }
        out
    }
}

impl Protocol for Madabsm {
    type Input = Value;
    type State = MadabsmState;
    type Output = MadabsmOutput;

    fn name(&self) -> String {
        "madabsm".into()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn rounds(&self) -> Option<usize> {
        Some(2)
    }

    fn domain(&self, step: usize) -> RoundDomain {
        match step {
            0 => RoundDomain::Scalar(self.domain.clone()),
            _ => RoundDomain::Claims(self.domain.clone()),
        }
    }

    fn init(&self, _me: ProcessorId, input: &Value) -> MadabsmState {
        MadabsmState { input: input.clone(), step: 0, start: RoundNumber(0), received: Vec::new(), result: None }
    }

    fn send(&self, state: &MadabsmState, _round: RoundNumber) -> Vec<Value> {
        match state.step {
            0 => broadcast(self.n, state.input.clone()),
            1 => {
                let claims = state
                    .received
                    .iter()
                    .enumerate()
                    .map(|(l, v)| Value::claim(ProcessorId(l), state.start, v.clone()))
                    .collect();
                broadcast(self.n, Value::Vector(claims))
            }
            _ => broadcast(self.n, Value::Bot),
        }
    }

    fn receive(&self, state: &mut MadabsmState, round: RoundNumber, incoming: &[Option<Value>]) {
        match state.step {
            0 => {
                state.start = round;
                state.received = incoming
                    .iter()
                    .map(|v| match v {
                        Some(v) if self.in_domain(v) => v.clone(),
                        _ => self.domain[0].clone(),
                    })
                    .collect();
            }
            1 => {
                let reports: Vec<Option<Vec<Value>>> =
                    incoming.iter().map(|v| self.parse_report(v.as_ref(), state.start)).collect();
                state.result = Some(self.decide(&reports));
                state.received = Vec::new();
            }
            _ => {}
        }
        state.step = state.step.saturating_add(1);
    }

    fn output(&self, state: &MadabsmState) -> Option<MadabsmOutput> {
        state.result.clone().map(MadabsmOutput)
    }

    fn verdict(&self, inputs: &[Value], outputs: &[MadabsmOutput]) -> TaskVerdict {
        let outs: Vec<Vec<Value>> = outputs.iter().map(|o| o.0.clone()).collect();
        TaskVerdict::from_findings(self.findings(inputs, &outs))
    }
}
