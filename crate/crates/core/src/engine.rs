//! Deterministic synchronous round executor.
//!
//! Per round: every machine emits its intended row, the adversary observes the
//! whole intended matrix and picks a corruption set plus per-edge actions, the
//! round is appended to the provenance ledger, tampers are validated against
//! the fault type, and the delivered rows are handed back to the machines.
//! Self-delivery is never tampered with. A rejected tamper is logged and the
//! intended message is delivered instead.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryStrategy, CorruptionSchedule, Decision, ProcSet, RoundView, ScheduleTracker, TamperAction};
use crate::model::{Clause, ProcessorId, RoundNumber, TaskVerdict, Value};
use crate::protocols::{Protocol, RoundDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultType {
    /// Corrupted senders' messages may only be dropped.
    Omission,
    /// Corrupted senders' messages may be dropped or replaced arbitrarily.
    Byzantine,
    /// Like Byzantine, but nested claims about processors that were honest in
    /// the claimed round must match what they really sent.
    AuthByzantine,
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultType::Omission => "omission",
            FaultType::Byzantine => "byzantine",
            FaultType::AuthByzantine => "auth-byzantine",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("schedule violation in round {round}: {detail}")]
    ScheduleViolation { round: RoundNumber, detail: String },
    #[error("protocol bug at {processor} in round {round}: {detail}")]
    ProtocolBug { processor: ProcessorId, round: RoundNumber, detail: String },
    #[error("round {0} recorded twice in the provenance ledger")]
    DuplicateRound(RoundNumber),
    #[error("protocol needs {rounds} rounds but max_rounds is {max_rounds}")]
    RoundBudget { rounds: usize, max_rounds: usize },
    #[error("expected {expected} inputs, got {got}")]
    InputLength { expected: usize, got: usize },
}

/// Genuine traffic of one round plus who was corrupted in it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RoundLedger {
    pub corrupted: ProcSet,
    pub intended: Vec<Vec<Value>>,
}

/// Append-only record of every intended message and every corruption set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProvenanceLedger {
    rounds: Vec<Arc<RoundLedger>>,
}

impl ProvenanceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a round before any tampering is applied. Rounds must arrive in
    /// order; the intended rows of corrupted senders are recorded as well.
    pub fn record_round(&mut self, round: RoundNumber, corrupted: ProcSet, intended: Vec<Vec<Value>>) -> Result<(), EngineError> {
        if round.0 < self.rounds.len() {
            return Err(EngineError::DuplicateRound(round));
        }
        assert_eq!(round.0, self.rounds.len(), "ledger rounds must be contiguous");
        self.rounds.push(Arc::new(RoundLedger { corrupted, intended }));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn round(&self, round: RoundNumber) -> Option<&Arc<RoundLedger>> {
        self.rounds.get(round.0)
    }

    pub fn last(&self) -> Option<&Arc<RoundLedger>> {
        self.rounds.last()
    }

    pub fn corrupted_at(&self, round: RoundNumber) -> ProcSet {
        self.round(round).map(|r| r.corrupted).unwrap_or_default()
    }

    /// Did `sender` genuinely emit `content` (to anyone) in `round`?
    pub fn was_sent(&self, sender: ProcessorId, round: RoundNumber, content: &Value) -> bool {
        self.round(round)
            .and_then(|r| r.intended.get(sender.0))
            .is_some_and(|row| row.iter().any(|v| v == content))
    }

    /// Number of recorded `(sender, recipient)` entries.
    pub fn sent_entries(&self) -> usize {
        self.rounds.iter().map(|r| r.intended.iter().map(Vec::len).sum::<usize>()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    /// Omission adversaries may only drop.
    SubstitutionForbidden,
    /// A nested claim names an honest sender and content it never sent.
    Forgery { claimed_sender: ProcessorId, claimed_round: RoundNumber },
    /// The sender is not in this round's corruption set.
    NotCorrupted,
    /// Self-delivery is reliable.
    SelfDelivery,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TamperCheck {
    Accept,
    Reject(RejectReason),
}

/// Decide whether a corrupted edge may carry `action` under `fault`.
/// `ledger` must already contain `round`.
pub fn validate_tamper(
    edge: (ProcessorId, ProcessorId),
    action: &TamperAction,
    round: RoundNumber,
    ledger: &ProvenanceLedger,
    fault: FaultType,
) -> TamperCheck {
    let (from, to) = edge;
    if from == to {
        return TamperCheck::Reject(RejectReason::SelfDelivery);
    }
    if !ledger.corrupted_at(round).contains(from.0) {
        return TamperCheck::Reject(RejectReason::NotCorrupted);
    }
    let substituted = match action {
        TamperAction::Deliver | TamperAction::Drop => return TamperCheck::Accept,
        TamperAction::Replace(v) => v,
    };
    match fault {
        FaultType::Omission => TamperCheck::Reject(RejectReason::SubstitutionForbidden),
        FaultType::Byzantine => TamperCheck::Accept,
        FaultType::AuthByzantine => {
            let mut forged = None;
            substituted.for_each_claim(&mut |claim| {
                if forged.is_some() || claim.round > round {
                    return;
                }
                let licensed = ledger.corrupted_at(claim.round).contains(claim.sender.0)
                    || ledger.was_sent(claim.sender, claim.round, &claim.content);
                if !licensed {
                    forged = Some(RejectReason::Forgery { claimed_sender: claim.sender, claimed_round: claim.round });
                }
            });
            match forged {
                Some(reason) => TamperCheck::Reject(reason),
                None => TamperCheck::Accept,
            }
        }
    }
}

/// What happened on one tampered edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EdgeEvent {
    Dropped { from: usize, to: usize },
    Replaced { from: usize, to: usize },
    ConstraintRejected { from: usize, to: usize, #[serde(flatten)] reason: RejectReason },
}

impl EdgeEvent {
    pub fn is_rejection(&self) -> bool {
        matches!(self, EdgeEvent::ConstraintRejected { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: RoundNumber,
    pub corrupted: ProcSet,
    /// `intended[sender][recipient]`
    pub intended: Vec<Vec<Value>>,
    /// `delivered[sender][recipient]`, `None` when dropped.
    pub delivered: Vec<Vec<Option<Value>>>,
    pub events: Vec<EdgeEvent>,
    /// Debug rendering of every processor's state after the round.
    pub states: Vec<String>,
}

/// Lockstep execution of one protocol against one adversary.
pub struct Execution<'p, P: Protocol> {
    protocol: &'p P,
    fault: FaultType,
    tracker: ScheduleTracker,
    states: Vec<P::State>,
    ledger: ProvenanceLedger,
    round: RoundNumber,
    records: Option<Vec<RoundRecord>>,
}

impl<P: Protocol> Clone for Execution<'_, P> {
    fn clone(&self) -> Self {
        Execution {
            protocol: self.protocol,
            fault: self.fault,
            tracker: self.tracker.clone(),
            states: self.states.clone(),
            ledger: self.ledger.clone(),
            round: self.round,
            records: self.records.clone(),
        }
    }
}

/// Hashable snapshot of everything that determines an execution's future
/// under enumerated adversaries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExecutionKey<S> {
    round: RoundNumber,
    states: Vec<S>,
    terminal: ProcSet,
    ledger_tail: Option<Arc<RoundLedger>>,
}

impl<'p, P: Protocol> Execution<'p, P> {
    pub fn new(
        protocol: &'p P,
        fault: FaultType,
        schedule: CorruptionSchedule,
        inputs: &[P::Input],
        record: bool,
    ) -> Result<Self, EngineError> {
        let n = protocol.n();
        if inputs.len() != n {
            return Err(EngineError::InputLength { expected: n, got: inputs.len() });
        }
        let states = inputs.iter().enumerate().map(|(i, x)| protocol.init(ProcessorId(i), x)).collect();
        Ok(Execution {
            protocol,
            fault,
            tracker: ScheduleTracker::new(schedule, n),
            states,
            ledger: ProvenanceLedger::new(),
            round: RoundNumber(0),
            records: record.then(Vec::new),
        })
    }

    pub fn protocol(&self) -> &'p P {
        self.protocol
    }

    pub fn round(&self) -> RoundNumber {
        self.round
    }

    pub fn states(&self) -> &[P::State] {
        &self.states
    }

    pub fn ledger(&self) -> &ProvenanceLedger {
        &self.ledger
    }

    pub fn fault(&self) -> FaultType {
        self.fault
    }

    pub fn terminal_set(&self) -> ProcSet {
        self.tracker.terminal()
    }

    pub fn records(&self) -> Option<&[RoundRecord]> {
        self.records.as_deref()
    }

    pub fn domain(&self) -> RoundDomain {
        self.protocol.domain(self.round.0)
    }

    /// Intended matrix of the current round.
    pub fn intended(&self) -> Result<Vec<Vec<Value>>, EngineError> {
        let n = self.protocol.n();
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let row = self.protocol.send(s, self.round);
                if row.len() != n {
                    return Err(EngineError::ProtocolBug {
                        processor: ProcessorId(i),
                        round: self.round,
                        detail: format!("outgoing row has {} entries, expected {n}", row.len()),
                    });
                }
                Ok(row)
            })
            .collect()
    }

    /// Apply one adversary decision to the given intended matrix and advance.
    pub fn apply(&mut self, decision: &Decision, intended: Vec<Vec<Value>>) -> Result<(), EngineError> {
        let n = self.protocol.n();
        let round = self.round;
        self.tracker
            .admit(round, decision.corrupted)
            .map_err(|v| EngineError::ScheduleViolation { round: v.round, detail: v.detail })?;
        self.ledger.record_round(round, decision.corrupted, intended)?;
        let entry = self.ledger.last().cloned().expect("round just recorded");
        let intended = &entry.intended;

        // incoming[recipient][sender]
        let mut incoming: Vec<Vec<Option<Value>>> =
            (0..n).map(|j| (0..n).map(|i| Some(intended[i][j].clone())).collect()).collect();
        let mut events = Vec::new();
        for (from, to, action) in &decision.actions {
            let (from, to) = (*from, *to);
            if from >= n || to >= n || matches!(action, TamperAction::Deliver) {
                continue;
            }
            match validate_tamper((ProcessorId(from), ProcessorId(to)), action, round, &self.ledger, self.fault) {
                TamperCheck::Accept => match action {
                    TamperAction::Drop => {
                        incoming[to][from] = None;
                        events.push(EdgeEvent::Dropped { from, to });
                    }
                    TamperAction::Replace(v) => {
                        incoming[to][from] = Some(v.clone());
                        events.push(EdgeEvent::Replaced { from, to });
                    }
                    TamperAction::Deliver => {}
                },
                TamperCheck::Reject(reason) => {
                    incoming[to][from] = Some(intended[from][to].clone());
                    events.push(EdgeEvent::ConstraintRejected { from, to, reason });
                }
            }
        }

        for (state, row) in self.states.iter_mut().zip(&incoming) {
            self.protocol.receive(state, round, row);
        }

        if let Some(records) = self.records.as_mut() {
            let delivered = (0..n).map(|i| (0..n).map(|j| incoming[j][i].clone()).collect()).collect();
            records.push(RoundRecord {
                round,
                corrupted: decision.corrupted,
                intended: intended.clone(),
                delivered,
                events,
                states: self.states.iter().map(|s| format!("{s:?}")).collect(),
            });
        }
        self.round = round.next();
        Ok(())
    }

    /// Ask the adversary for a decision and apply it.
    pub fn step(&mut self, adversary: &mut dyn AdversaryStrategy) -> Result<(), EngineError> {
        let intended = self.intended()?;
        let domain = self.domain();
        let view = RoundView {
            round: self.round,
            n: self.protocol.n(),
            fault: self.fault,
            schedule: self.tracker.schedule(),
            intended: &intended,
            ledger: &self.ledger,
            domain: &domain,
        };
        let decision = adversary.decide(&view);
        self.apply(&decision, intended)
    }

    pub fn outputs(&self) -> Vec<Option<P::Output>> {
        self.states.iter().map(|s| self.protocol.output(s)).collect()
    }

    pub fn all_output(&self) -> Option<Vec<P::Output>> {
        self.states.iter().map(|s| self.protocol.output(s)).collect()
    }

    /// Key for memoizing exploration from this point. The previous round's
    /// ledger entry is included when the coming round carries claims, since
    /// claim legality depends on it.
    pub fn key(&self) -> ExecutionKey<P::State> {
        let ledger_tail = if self.fault == FaultType::AuthByzantine && self.domain().carries_claims() {
            self.ledger.last().cloned()
        } else {
            None
        };
        ExecutionKey { round: self.round, states: self.states.clone(), terminal: self.tracker.terminal(), ledger_tail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The round cap was hit before every processor produced an output.
    NotLive,
}

/// Static description of a run, written as the trace header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub protocol: String,
    pub n: usize,
    pub t: usize,
    pub fault: FaultType,
    pub schedule: CorruptionSchedule,
    pub inputs: Vec<serde_json::Value>,
    pub adversary: serde_json::Value,
    pub max_rounds: usize,
}

#[derive(Clone, Debug)]
pub struct ExecutionTrace<P: Protocol> {
    pub scenario: ScenarioDescriptor,
    pub rounds: Vec<RoundRecord>,
    pub outputs: Vec<Option<P::Output>>,
    pub status: RunStatus,
    pub verdict: TaskVerdict,
    pub failed_properties: Vec<&'static str>,
}

impl<P: Protocol> ExecutionTrace<P> {
    pub fn rejections(&self) -> usize {
        self.rounds.iter().flat_map(|r| &r.events).filter(|e| e.is_rejection()).count()
    }

    pub fn delivered(&self) -> Vec<&Vec<Vec<Option<Value>>>> {
        self.rounds.iter().map(|r| &r.delivered).collect()
    }

    pub fn footer(&self) -> TraceFooter {
        TraceFooter {
            kind: "footer".into(),
            rounds: self.rounds.len(),
            status: self.status,
            outputs: self
                .outputs
                .iter()
                .map(|o| serde_json::to_value(o).expect("outputs serialize"))
                .collect(),
            outputs_display: self
                .outputs
                .iter()
                .map(|o| o.as_ref().map_or_else(|| "none".to_string(), |o| o.to_string()))
                .collect(),
            verdict: self.verdict.clone(),
            failed_properties: self.failed_properties.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Newline-delimited JSON: one header, one object per round, one footer.
    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        let header = TraceHeader { kind: "header".into(), schema_version: TRACE_SCHEMA_VERSION, scenario: self.scenario.clone() };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for r in &self.rounds {
            let line = TraceRound { kind: "round".into(), record: r.clone() };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        serde_json::to_writer(&mut w, &self.footer())?;
        writeln!(w)?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceHeader {
    #[serde(rename = "type")]
    pub kind: String,
    pub schema_version: u32,
    pub scenario: ScenarioDescriptor,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRound {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(flatten)]
    pub record: RoundRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceFooter {
    #[serde(rename = "type")]
    pub kind: String,
    pub rounds: usize,
    pub status: RunStatus,
    pub outputs: Vec<serde_json::Value>,
    pub outputs_display: Vec<String>,
    pub verdict: TaskVerdict,
    pub failed_properties: Vec<String>,
}

/// A parsed JSONL trace.
#[derive(Clone, Debug)]
pub struct ParsedTrace {
    pub header: TraceHeader,
    pub rounds: Vec<RoundRecord>,
    pub footer: TraceFooter,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace is missing its {0}")]
    Missing(&'static str),
}

pub fn parse_trace(text: &str) -> Result<ParsedTrace, TraceParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (i, first) = lines.next().ok_or(TraceParseError::Missing("header"))?;
    let header: TraceHeader = serde_json::from_str(first).map_err(|source| TraceParseError::Json { line: i + 1, source })?;
    let mut rounds = Vec::new();
    let mut footer = None;
    for (i, line) in lines {
        let probe: serde_json::Value = serde_json::from_str(line).map_err(|source| TraceParseError::Json { line: i + 1, source })?;
        if probe.get("type").and_then(|t| t.as_str()) == Some("footer") {
            footer = Some(serde_json::from_value(probe).map_err(|source| TraceParseError::Json { line: i + 1, source })?);
        } else {
            let r: TraceRound = serde_json::from_value(probe).map_err(|source| TraceParseError::Json { line: i + 1, source })?;
            rounds.push(r.record);
        }
    }
    Ok(ParsedTrace { header, rounds, footer: footer.ok_or(TraceParseError::Missing("footer"))? })
}

/// Run a protocol to completion (or to `max_rounds` for unbounded machines).
pub fn execute<P: Protocol>(
    protocol: &P,
    inputs: &[P::Input],
    adversary: &mut dyn AdversaryStrategy,
    fault: FaultType,
    schedule: CorruptionSchedule,
    max_rounds: usize,
) -> Result<ExecutionTrace<P>, EngineError> {
    let scenario = ScenarioDescriptor {
        protocol: protocol.name(),
        n: protocol.n(),
        t: schedule.budget,
        fault,
        schedule,
        inputs: inputs.iter().map(|x| serde_json::to_value(x).expect("inputs serialize")).collect(),
        adversary: adversary.describe(),
        max_rounds,
    };
    let mut exec = Execution::new(protocol, fault, schedule, inputs, true)?;
    let status = run_to_end(&mut exec, adversary, max_rounds)?;
    let outputs = exec.outputs();
    let verdict = final_verdict(protocol, inputs, &outputs);
    let failed_properties = protocol.audit(inputs, exec.states());
    Ok(ExecutionTrace {
        scenario,
        rounds: exec.records.take().unwrap_or_default(),
        outputs,
        status,
        verdict,
        failed_properties,
    })
}

/// Drive an execution until the protocol's fixed length, or until everyone
/// has an output for unbounded protocols.
pub fn run_to_end<P: Protocol>(
    exec: &mut Execution<'_, P>,
    adversary: &mut dyn AdversaryStrategy,
    max_rounds: usize,
) -> Result<RunStatus, EngineError> {
    match exec.protocol().rounds() {
        Some(r) => {
            if r > max_rounds {
                return Err(EngineError::RoundBudget { rounds: r, max_rounds });
            }
            while exec.round().0 < r {
                exec.step(adversary)?;
            }
            Ok(RunStatus::Completed)
        }
        None => {
            while exec.all_output().is_none() {
                if exec.round().0 >= max_rounds {
                    return Ok(RunStatus::NotLive);
                }
                exec.step(adversary)?;
            }
            Ok(RunStatus::Completed)
        }
    }
}

/// Task verdict over possibly incomplete outputs: a missing output is a
/// liveness violation.
pub fn final_verdict<P: Protocol>(protocol: &P, inputs: &[P::Input], outputs: &[Option<P::Output>]) -> TaskVerdict {
    match outputs.iter().cloned().collect::<Option<Vec<_>>>() {
        Some(all) => protocol.verdict(inputs, &all),
        None => {
            let witness = outputs.iter().position(Option::is_none).map(ProcessorId);
            TaskVerdict { holds: false, violated_clauses: vec![Clause::Liveness], witness }
        }
    }
}
