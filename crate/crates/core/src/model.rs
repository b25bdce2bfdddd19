//! Domain types shared by the engine, the protocols and the oracle, plus the
//! two task relations (binary consensus and binary commit-adopt) evaluated on
//! complete executions.
//!
//! Every processor produces an output, including processors whose outgoing
//! links were corrupted at some point; the checkers therefore look at all `n`
//! outputs and never exclude anyone.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a processor in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessorId(pub usize);

impl ProcessorId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Engine round counter. Rounds start at 0 and advance by one per engine step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoundNumber(pub usize);

impl RoundNumber {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn next(self) -> RoundNumber {
        RoundNumber(self.0 + 1)
    }
}

impl fmt::Display for RoundNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A binary value. Serialized as the integer `0` or `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn from_u8(v: u8) -> Option<Bit> {
        match v {
            0 => Some(Bit::Zero),
            1 => Some(Bit::One),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Bit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Bit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Bit::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("bit must be 0 or 1, got {v}")))
    }
}

/// Parse a comma separated bit list such as `0,1,1`.
pub fn parse_bits(s: &str) -> Result<Vec<Bit>, ModelError> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            match tok {
                "0" => Ok(Bit::Zero),
                "1" => Ok(Bit::One),
                _ => Err(ModelError::BadBit(tok.to_string())),
            }
        })
        .collect()
}

/// All `2^n` bit vectors in binary order (`p0` is the most significant digit).
pub fn all_bit_vectors(n: usize) -> Vec<Vec<Bit>> {
    assert!(n < 32, "input enumeration is only meant for small n");
    (0..1u32 << n)
        .map(|code| (0..n).map(|i| Bit::from(code >> (n - 1 - i) & 1 == 1)).collect())
        .collect()
}

/// Second-round message of the commit-adopt protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    NoCommit,
    Commit(Bit),
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proposal::NoCommit => write!(f, "no-commit"),
            Proposal::Commit(b) => write!(f, "propose-commit({b})"),
        }
    }
}

/// Message content.
///
/// Honest processors only ever produce `Bit`, `Bot`, `Propose`, and vectors of
/// `Claim`s. `Raw` is adversary garbage. A `Claim` embeds a message of some
/// earlier round; the authenticated fault type restricts which claims a
/// corrupted sender may fabricate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Bit(Bit),
    Bot,
    Propose(Proposal),
    Vector(Vec<Value>),
    Claim(Arc<Message>),
    Raw(Vec<u8>),
}

impl Value {
    /// The canonical garbage value used by exhaustive enumeration.
    pub fn garbage() -> Value {
        Value::Raw(b"garbage".to_vec())
    }

    pub fn as_bit(&self) -> Option<Bit> {
        match self {
            Value::Bit(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_proposal(&self) -> Option<Proposal> {
        match self {
            Value::Propose(p) => Some(*p),
            _ => None,
        }
    }

    pub fn claim(sender: ProcessorId, round: RoundNumber, content: Value) -> Value {
        Value::Claim(Arc::new(Message { sender, round, content }))
    }

    /// Visit every claim nested anywhere inside this value, outermost first.
    pub fn for_each_claim<'a>(&'a self, f: &mut impl FnMut(&'a Message)) {
        match self {
            Value::Claim(m) => {
                f(m);
                m.content.for_each_claim(f);
            }
            Value::Vector(items) => items.iter().for_each(|v| v.for_each_claim(f)),
            _ => {}
        }
    }
}

impl From<Bit> for Value {
    fn from(b: Bit) -> Self {
        Value::Bit(b)
    }
}

impl From<Proposal> for Value {
    fn from(p: Proposal) -> Self {
        Value::Propose(p)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bit(b) => write!(f, "{b}"),
            Value::Bot => write!(f, "⊥"),
            Value::Propose(p) => write!(f, "{p}"),
            Value::Vector(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Claim(m) => write!(f, "({},{},{})", m.sender, m.round, m.content),
            Value::Raw(bytes) => write!(f, "raw:{}", String::from_utf8_lossy(bytes)),
        }
    }
}

/// A `(sender, round, content)` triple.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Message {
    pub sender: ProcessorId,
    pub round: RoundNumber,
    pub content: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Commit,
    Adopt,
}

/// Output of a commit-adopt protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CAOutput {
    pub grade: Grade,
    pub value: Bit,
}

impl CAOutput {
    pub fn commit(value: Bit) -> Self {
        CAOutput { grade: Grade::Commit, value }
    }

    pub fn adopt(value: Bit) -> Self {
        CAOutput { grade: Grade::Adopt, value }
    }

    pub fn is_commit(&self) -> bool {
        self.grade == Grade::Commit
    }
}

impl fmt::Display for CAOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.grade {
            Grade::Commit => write!(f, "commit({})", self.value),
            Grade::Adopt => write!(f, "adopt({})", self.value),
        }
    }
}

/// Identifier of a violated task clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// Consensus: the common output must be somebody's input.
    Validity,
    /// Consensus: no two outputs differ.
    Agreement,
    /// Commit-adopt: unanimous inputs force a universal commit.
    Clause1,
    /// Commit-adopt: a commit forces everyone to commit or adopt that value.
    Clause2,
    /// Shared-memory task: at least `n - t` entries agree with the true inputs everywhere.
    Coverage,
    /// Shared-memory task: no two processors hold different non-⊥ values for one entry.
    Consistency,
    /// Unbounded protocol hit the round cap before every processor output.
    Liveness,
}

impl Clause {
    pub fn id(self) -> &'static str {
        match self {
            Clause::Validity => "validity",
            Clause::Agreement => "agreement",
            Clause::Clause1 => "clause1",
            Clause::Clause2 => "clause2",
            Clause::Coverage => "coverage",
            Clause::Consistency => "consistency",
            Clause::Liveness => "liveness",
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Result of evaluating a task relation on one execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskVerdict {
    pub holds: bool,
    pub violated_clauses: Vec<Clause>,
    /// First processor whose output witnesses a violation.
    pub witness: Option<ProcessorId>,
}

impl TaskVerdict {
    pub fn ok() -> Self {
        TaskVerdict { holds: true, violated_clauses: Vec::new(), witness: None }
    }

    /// Builds a verdict from `(clause, witness)` findings; keeps clause ids sorted and unique.
    pub fn from_findings(findings: impl IntoIterator<Item = (Clause, Option<ProcessorId>)>) -> Self {
        let mut clauses = Vec::new();
        let mut witness = None;
        for (clause, who) in findings {
            clauses.push(clause);
            if witness.is_none() {
                witness = who;
            }
        }
        clauses.sort();
        clauses.dedup();
        TaskVerdict { holds: clauses.is_empty(), violated_clauses: clauses, witness }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("length mismatch: {inputs} inputs but {outputs} outputs")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("invalid bit `{0}` (expected 0 or 1)")]
    BadBit(String),
}

fn check_lengths(inputs: usize, outputs: usize) -> Result<(), ModelError> {
    if inputs != outputs {
        return Err(ModelError::LengthMismatch { inputs, outputs });
    }
    Ok(())
}

/// Binary consensus relation. A non-bit output counts as a validity violation.
pub fn check_consensus(inputs: &[Bit], outputs: &[Value]) -> Result<TaskVerdict, ModelError> {
    check_lengths(inputs.len(), outputs.len())?;
    let mut findings = Vec::new();
    let mut first: Option<(usize, Bit)> = None;
    for (i, out) in outputs.iter().enumerate() {
        match out.as_bit() {
            None => findings.push((Clause::Validity, Some(ProcessorId(i)))),
            Some(b) => {
                if !inputs.contains(&b) {
                    findings.push((Clause::Validity, Some(ProcessorId(i))));
                }
                match first {
                    None => first = Some((i, b)),
                    Some((_, f)) if f != b => findings.push((Clause::Agreement, Some(ProcessorId(i)))),
                    Some(_) => {}
                }
            }
        }
    }
    Ok(TaskVerdict::from_findings(findings))
}

/// Binary commit-adopt relation (clauses 1 and 2).
pub fn check_commit_adopt(inputs: &[Bit], outputs: &[CAOutput]) -> Result<TaskVerdict, ModelError> {
    check_lengths(inputs.len(), outputs.len())?;
    let mut findings = Vec::new();
    if let Some(&v) = inputs.first() {
        if inputs.iter().all(|&x| x == v) {
            for (i, out) in outputs.iter().enumerate() {
                if *out != CAOutput::commit(v) {
                    findings.push((Clause::Clause1, Some(ProcessorId(i))));
                }
            }
        }
    }
    if let Some(committed) = outputs.iter().find(|o| o.is_commit()) {
        for (i, out) in outputs.iter().enumerate() {
            if out.value != committed.value {
                findings.push((Clause::Clause2, Some(ProcessorId(i))));
            }
        }
    }
    Ok(TaskVerdict::from_findings(findings))
}
