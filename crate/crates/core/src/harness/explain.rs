//! Human-readable rendering of JSONL traces.

use std::fmt::Write;

use crate::adversary::describe;
use crate::engine::{parse_trace, EdgeEvent, ParsedTrace, RejectReason, RoundRecord, RunStatus};
use crate::model::{ProcessorId, Value};

use super::{split_traces, HarnessError};

fn short(v: &Value) -> String {
    let s = v.to_string();
    if s.chars().count() > 60 {
        let head: String = s.chars().take(57).collect();
        format!("{head}...")
    } else {
        s
    }
}

fn reason(r: &RejectReason) -> String {
    match r {
        RejectReason::SubstitutionForbidden => "omission faults may only drop".into(),
        RejectReason::Forgery { claimed_sender, claimed_round } => {
            format!("forged claim of {claimed_sender} in round {}", claimed_round.0)
        }
        RejectReason::NotCorrupted => "sender not corrupted this round".into(),
        RejectReason::SelfDelivery => "self-delivery is reliable".into(),
    }
}

fn adversary_line(adv: &serde_json::Value) -> String {
    let kind = adv.get("kind").and_then(|k| k.as_str()).unwrap_or("?");
    match kind {
        "random" => format!(
            "random (seed {}, stream {})",
            adv.get("seed").map_or("?".into(), |v| v.to_string()),
            adv.get("stream").map_or("0".into(), |v| v.to_string())
        ),
        "scripted" => {
            let rounds = adv.get("rounds").and_then(|r| r.as_array()).map_or(0, Vec::len);
            format!("scripted ({rounds} rounds)")
        }
        other => other.to_string(),
    }
}

fn round_block(out: &mut String, r: &RoundRecord) {
    let _ = writeln!(out, "round {}  corrupted {}", r.round.0, describe(r.corrupted));
    if r.events.is_empty() {
        let _ = writeln!(out, "  all messages delivered");
        return;
    }
    for e in &r.events {
        let (from, to) = match e {
            EdgeEvent::Dropped { from, to } | EdgeEvent::Replaced { from, to } | EdgeEvent::ConstraintRejected { from, to, .. } => (*from, *to),
        };
        let intended = short(&r.intended[from][to]);
        let edge = format!("{} -> {}", ProcessorId(from), ProcessorId(to));
        let line = match e {
            EdgeEvent::Dropped { .. } => format!("dropped (intended {intended})"),
            EdgeEvent::Replaced { .. } => {
                let got = r.delivered[from][to].as_ref().map_or_else(|| "nothing".into(), short);
                format!("replaced by {got} (intended {intended})")
            }
            EdgeEvent::ConstraintRejected { reason: why, .. } => format!("tamper rejected: {}; delivered {intended}", reason(why)),
        };
        let _ = writeln!(out, "  {edge:<9} {line}");
    }
}

fn one(out: &mut String, t: &ParsedTrace) {
    let s = &t.header.scenario;
    let inputs: Vec<String> = s.inputs.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(
        out,
        "{}  n={} t={}  {} faults, {} schedule  inputs [{}]",
        s.protocol,
        s.n,
        s.t,
        s.fault,
        s.schedule.kind,
        inputs.join(",")
    );
    let _ = writeln!(out, "adversary: {}  (round cap {})", adversary_line(&s.adversary), s.max_rounds);
    for r in &t.rounds {
        round_block(out, r);
    }
    let f = &t.footer;
    let status = match f.status {
        RunStatus::Completed => "completed",
        RunStatus::NotLive => "round cap reached before every processor output",
    };
    let _ = writeln!(out, "{status} after {} rounds", f.rounds);
    let outs: Vec<String> = f.outputs_display.iter().enumerate().map(|(i, o)| format!("{}={o}", ProcessorId(i))).collect();
    let _ = writeln!(out, "outputs: {}", outs.join(" "));
    if f.verdict.holds {
        let _ = writeln!(out, "verdict: HOLDS");
    } else {
        let clauses: Vec<String> = f.verdict.violated_clauses.iter().map(|c| c.to_string()).collect();
        let who = f.verdict.witness.map_or_else(String::new, |p| format!(" (witness {p})"));
        let _ = writeln!(out, "verdict: VIOLATES {}{who}", clauses.join(","));
    }
    if !f.failed_properties.is_empty() {
        let _ = writeln!(out, "failed properties: {}", f.failed_properties.join(","));
    }
}

/// Pretty-print every trace in a JSONL file.
pub fn explain_trace(text: &str) -> Result<String, HarnessError> {
    let pieces = split_traces(text);
    if pieces.is_empty() {
        return Err(HarnessError::Usage("trace file is empty".into()));
    }
    let mut out = String::new();
    for (i, piece) in pieces.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if pieces.len() > 1 {
            let _ = writeln!(out, "== trace {} of {} ==", i + 1, pieces.len());
        }
        one(&mut out, &parse_trace(piece)?);
    }
    Ok(out)
}
