//! Scenario runner: configs in, traces, reports, counterexamples and summary
//! tables out. The command-line front end is a thin layer over this module.

pub mod config;
mod explain;
mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::adversary::{AdversaryError, ScriptedStrategy, StrategySpec};
use crate::engine::{execute, parse_trace, EngineError, ExecutionTrace, FaultType, RunStatus, ScenarioDescriptor, TraceParseError};
use crate::model::{Bit, Clause, Value};
use crate::oracle::{exhaustive_check, minimize, CheckMode, CheckOptions, CheckReport, DEFAULT_CAP, DEFAULT_FALLBACK_SAMPLES};
use crate::par;
use crate::protocols::{Protocol, ProtocolError};

pub use config::{
    AdversaryConfig, Bound, CellMode, ConfigError, Expectation, GridBlock, InputSpec, OutputPaths, ProtocolId, RangeSpec,
    SampledInputs, ScenarioConfig, SweepSpec, SCHEMA_VERSION,
};
pub use explain::explain_trace;
pub use registry::{dispatch, parse_protocol_name, BoundRelation, ProtocolVisitor};

/// Environment variable overriding the default enumeration cap.
pub const CAP_ENV: &str = "MAD_LAB_CAP";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Trace(#[from] TraceParseError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn usage<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Usage(msg.into()))
}

/// Write `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

/// Parse a cap such as `100000000` or `1e8`.
pub fn parse_cap(s: &str) -> Option<u128> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u128>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    (f.is_finite() && f >= 0.0 && f.fract() == 0.0).then_some(f as u128)
}

/// The default cap, or the value of `MAD_LAB_CAP` when set.
pub fn default_cap() -> Result<u128, HarnessError> {
    match std::env::var(CAP_ENV) {
        Ok(v) => parse_cap(&v).ok_or_else(|| HarnessError::Usage(format!("{CAP_ENV}={v} is not a valid cap"))),
        Err(_) => Ok(DEFAULT_CAP),
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub cap: Option<u128>,
    pub seed: Option<u64>,
    pub max_rounds: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(m) = self.max_rounds {
            cfg.max_rounds = m;
        }
        if let Some(s) = self.seed {
            match &mut cfg.adversary {
                AdversaryConfig::Random { seed, .. } | AdversaryConfig::Sampled { seed, .. } => *seed = s,
                AdversaryConfig::Exhaustive { seed, .. } => *seed = Some(s),
                _ => {}
            }
        }
    }
}

fn bits_of(v: &serde_json::Value) -> Option<Bit> {
    if let Ok(b) = serde_json::from_value::<Bit>(v.clone()) {
        return Some(b);
    }
    serde_json::from_value::<Value>(v.clone()).ok()?.as_bit()
}

/// Group outputs as `commit(1)×2 adopt(1)×1`, in order of first appearance.
fn group_outputs(outputs: &[String]) -> String {
    let mut groups: Vec<(&str, usize)> = Vec::new();
    for o in outputs {
        match groups.iter_mut().find(|(s, _)| s == o) {
            Some(g) => g.1 += 1,
            None => groups.push((o, 1)),
        }
    }
    groups.iter().map(|(s, k)| format!("{s}×{k}")).collect::<Vec<_>>().join(" ")
}

/// Outcome of one execution.
#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub inputs: Vec<Bit>,
    pub holds: bool,
    pub violated_clauses: Vec<Clause>,
    pub failed_properties: Vec<String>,
    pub status: RunStatus,
    pub rounds: usize,
    pub rejections: usize,
    pub outputs: Vec<String>,
}

impl RunResult {
    /// `HOLDS commit(1)×3` or `VIOLATES clause1 commit(0)×1 adopt(0)×2`.
    pub fn verdict_line(&self) -> String {
        let outs = group_outputs(&self.outputs);
        if self.holds {
            return format!("HOLDS {outs}");
        }
        let mut what: Vec<String> = self.violated_clauses.iter().map(|c| c.to_string()).collect();
        what.extend(self.failed_properties.iter().map(|p| format!("property:{p}")));
        format!("VIOLATES {} {outs}", what.join(","))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// JSONL traces, one per input vector, concatenated.
    pub trace: String,
    pub results: Vec<RunResult>,
}

impl RunOutcome {
    pub fn holds(&self) -> bool {
        self.results.iter().all(|r| r.holds)
    }

    /// One verdict line per execution; prefixed with the inputs when there are several.
    pub fn verdict_lines(&self) -> Vec<String> {
        if self.results.len() == 1 {
            return vec![self.results[0].verdict_line()];
        }
        self.results
            .iter()
            .map(|r| {
                let x: String = r.inputs.iter().map(|b| b.to_string()).collect();
                format!("inputs {x}: {}", r.verdict_line())
            })
            .collect()
    }
}

fn result_of<P: Protocol>(bits: &[Bit], tr: &ExecutionTrace<P>) -> RunResult {
    let f = tr.footer();
    RunResult {
        inputs: bits.to_vec(),
        holds: tr.verdict.holds && tr.failed_properties.is_empty(),
        violated_clauses: tr.verdict.violated_clauses.clone(),
        failed_properties: f.failed_properties,
        status: tr.status,
        rounds: tr.rounds.len(),
        rejections: tr.rejections(),
        outputs: f.outputs_display,
    }
}

struct RunVisitor<'a> {
    cfg: &'a ScenarioConfig,
    bits: &'a [Vec<Bit>],
    spec: StrategySpec,
}

impl ProtocolVisitor for RunVisitor<'_> {
    type Out = Result<RunOutcome, HarnessError>;

    fn visit<P: Protocol>(self, protocol: &P, inputs: Vec<Vec<P::Input>>) -> Self::Out {
        let cfg = self.cfg;
        let schedule = cfg.corruption_schedule();
        // Fail on a bad strategy before fanning out.
        self.spec.build(cfg.fault, schedule, cfg.n)?;
        let runs = par::map_range(inputs.len(), |i| -> Result<(String, RunResult), HarnessError> {
            let mut adv = self.spec.build(cfg.fault, schedule, cfg.n)?;
            let tr = execute(protocol, &inputs[i], adv.as_mut(), cfg.fault, schedule, cfg.max_rounds)?;
            Ok((tr.to_jsonl(), result_of(&self.bits[i], &tr)))
        });
        let mut out = RunOutcome { trace: String::new(), results: Vec::new() };
        for r in runs {
            let (trace, result) = r?;
            out.trace.push_str(&trace);
            out.results.push(result);
        }
        Ok(out)
    }
}

/// Execute a scenario with a concrete adversary, once per input vector.
pub fn run_config(cfg: &ScenarioConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let Some(spec) = cfg.adversary.strategy() else {
        return usage("`run` needs a concrete adversary (none, silence, random or scripted); use `check` for exhaustive or sampled search");
    };
    let bits = cfg.inputs.resolve(cfg.n)?;
    dispatch(cfg.protocol, cfg.inner, cfg.n, cfg.t, &bits, RunVisitor { cfg, bits: &bits, spec })?
}

/// One row of the check summary table.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub protocol: String,
    pub fault: FaultType,
    pub n: usize,
    pub t: usize,
    pub schedule: String,
    pub bound: BoundRelation,
    pub mode: String,
    pub executions: u128,
    pub violations: u128,
    pub property_failures: u128,
    pub upper95: Option<f64>,
    pub counterexample: Option<PathBuf>,
}

impl SummaryRow {
    pub fn result(&self) -> String {
        let mut s = if self.violations > 0 {
            format!("{}, {}, violation found ({} of {})", self.bound.as_str(), self.mode, self.violations, self.executions)
        } else {
            format!("{}, {}, 0 violations", self.bound.as_str(), self.mode)
        };
        if self.property_failures > 0 {
            s.push_str(&format!(", {} property failures", self.property_failures));
        }
        if let Some(u) = self.upper95 {
            s.push_str(&format!(", rate <= {u:.3e} (95%)"));
        }
        if let Some(p) = &self.counterexample {
            s.push_str(&format!(", counterexample {}", p.display()));
        }
        s
    }
}

impl fmt::Display for SummaryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<20} {:<15} {:>3} {:>3} {:<26} {}", self.protocol, self.fault.to_string(), self.n, self.t, self.schedule, self.result())
    }
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = format!("{:<20} {:<15} {:>3} {:>3} {:<26} {}\n", "protocol", "fault", "n", "t", "schedule", "result");
    for r in rows {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}

fn mode_label(mode: &CheckMode) -> String {
    match mode {
        CheckMode::Exhaustive => "exhaustive".into(),
        CheckMode::Sampled { seed, .. } => format!("sampled({seed})"),
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub report: CheckReport,
    pub row: SummaryRow,
    /// Replayable config for the first witness, minimized.
    pub counterexample: Option<ScenarioConfig>,
}

impl CheckOutcome {
    pub fn holds(&self) -> bool {
        self.report.clean()
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("reports serialize") + "\n"
    }
}

fn check_options(cfg: &ScenarioConfig, ov: &Overrides) -> Result<CheckOptions, HarnessError> {
    let mut opts = CheckOptions { max_rounds: cfg.max_rounds, horizon: cfg.horizon, ..CheckOptions::default() };
    let config_cap = match &cfg.adversary {
        AdversaryConfig::Sampled { seed, samples } => {
            opts.force_sampled = true;
            opts.seed = *seed;
            opts.samples = *samples;
            None
        }
        AdversaryConfig::Exhaustive { cap, fallback_samples, seed } => {
            opts.seed = seed.unwrap_or(0);
            opts.samples = fallback_samples.unwrap_or(DEFAULT_FALLBACK_SAMPLES);
            cap.map(u128::from)
        }
        _ => None,
    };
    opts.cap = match ov.cap.or(config_cap) {
        Some(c) => c,
        None => default_cap()?,
    };
    Ok(opts)
}

struct CheckVisitor<'a> {
    cfg: &'a ScenarioConfig,
    bits: &'a [Vec<Bit>],
    opts: CheckOptions,
}

impl ProtocolVisitor for CheckVisitor<'_> {
    type Out = Result<CheckOutcome, HarnessError>;

    fn visit<P: Protocol>(self, protocol: &P, inputs: Vec<Vec<P::Input>>) -> Self::Out {
        let cfg = self.cfg;
        let schedule = cfg.corruption_schedule();
        let report = exhaustive_check(protocol, cfg.fault, schedule, &inputs, &self.opts)?;
        let counterexample = match report.witnesses.first() {
            Some(w) => counterexample_config(cfg, protocol, self.bits, &inputs, &w.inputs, &w.strategy)?,
            None => None,
        };
        let upper95 = report.violation_rate_upper95;
        let row = SummaryRow {
            protocol: protocol.name(),
            fault: cfg.fault,
            n: cfg.n,
            t: cfg.t,
            schedule: cfg.schedule.to_string(),
            bound: BoundRelation::of(cfg.fault, cfg.n, cfg.t),
            mode: mode_label(&report.mode),
            executions: report.executions,
            violations: report.violations,
            property_failures: report.property_failures.values().sum(),
            upper95,
            counterexample: None,
        };
        Ok(CheckOutcome { report, row, counterexample })
    }
}

/// Minimize a witness (when it violates the task) and wrap it as a scripted config.
fn counterexample_config<P: Protocol>(
    cfg: &ScenarioConfig,
    protocol: &P,
    bits: &[Vec<Bit>],
    inputs: &[Vec<P::Input>],
    witness_inputs: &[serde_json::Value],
    strategy: &ScriptedStrategy,
) -> Result<Option<ScenarioConfig>, HarnessError> {
    let Some(i) = inputs.iter().position(|x| {
        x.iter().map(|v| serde_json::to_value(v).expect("inputs serialize")).collect::<Vec<_>>() == witness_inputs
    }) else {
        return Ok(None);
    };
    let schedule = cfg.corruption_schedule();
    let mut adv = strategy.clone();
    let first = execute(protocol, &inputs[i], &mut adv, cfg.fault, schedule, cfg.max_rounds)?;
    let script = if first.verdict.holds {
        strategy.clone()
    } else {
        minimize(protocol, cfg.fault, schedule, &inputs[i], strategy.clone(), cfg.max_rounds)?
    };
    let mut adv = script.clone();
    let tr = execute(protocol, &inputs[i], &mut adv, cfg.fault, schedule, cfg.max_rounds)?;
    let result = result_of(&bits[i], &tr);
    if result.holds {
        // Only a search-horizon artifact; a full run does not reproduce it.
        return Ok(None);
    }
    Ok(Some(ScenarioConfig {
        inputs: InputSpec::Explicit(bits[i].clone()),
        adversary: AdversaryConfig::Scripted { rounds: script.rounds },
        output: OutputPaths::default(),
        expect: Some(Expectation {
            holds: false,
            violated_clauses: result.violated_clauses,
            failed_properties: result.failed_properties,
        }),
        ..cfg.clone()
    }))
}

/// Exhaustive or sampled check of a scenario over all its input vectors.
pub fn check_config(cfg: &ScenarioConfig, ov: &Overrides) -> Result<CheckOutcome, HarnessError> {
    cfg.validate()?;
    let opts = check_options(cfg, ov)?;
    let bits = cfg.inputs.resolve(cfg.n)?;
    dispatch(cfg.protocol, cfg.inner, cfg.n, cfg.t, &bits, CheckVisitor { cfg, bits: &bits, opts })?
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub protocol: String,
    pub fault: FaultType,
    pub n: usize,
    pub t: usize,
    pub mode: String,
    pub executions: u128,
    pub violations: u128,
    pub witness_path: String,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutcome {
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.violations == 0)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("sweep rows serialize");
        }
        String::from_utf8(w.into_inner().expect("flush to Vec")).expect("CSV is UTF-8")
    }
}

fn witness_name(cfg: &ScenarioConfig) -> String {
    let proto = match cfg.inner {
        Some(inner) => format!("{}-{}", cfg.protocol, inner),
        None => cfg.protocol.to_string(),
    };
    let sched = cfg.schedule.to_string().replace(['(', ')'], "");
    format!("{proto}_n{}_t{}_{sched}.toml", cfg.n, cfg.t)
}

/// Check every cell of a sweep. Witness configs go to `witness_dir` when given.
pub fn sweep(spec: &SweepSpec, ov: &Overrides, witness_dir: Option<&Path>) -> Result<SweepOutcome, HarnessError> {
    let cells = spec.cells()?;
    let outcomes = par::map(&cells, |c| {
        let mut c = c.clone();
        ov.apply(&mut c);
        check_config(&c, ov).map(|o| (c, o))
    });
    let mut out = SweepOutcome { rows: Vec::new(), summary: Vec::new() };
    for r in outcomes {
        let (cell, mut o) = r?;
        let mut witness_path = String::new();
        if let (Some(dir), Some(cx)) = (witness_dir, &o.counterexample) {
            let path = dir.join(witness_name(&cell));
            write_file(&path, &cx.to_toml())?;
            witness_path = path.display().to_string();
            o.row.counterexample = Some(path);
        }
        out.rows.push(SweepRow {
            protocol: o.row.protocol.clone(),
            fault: cell.fault,
            n: cell.n,
            t: cell.t,
            mode: o.row.mode.clone(),
            executions: o.report.executions,
            violations: o.report.violations,
            witness_path,
        });
        out.summary.push(o.row);
    }
    Ok(out)
}

/// Rebuild the scenario written in a trace header.
pub fn config_from_header(h: &ScenarioDescriptor) -> Result<ScenarioConfig, HarnessError> {
    let Some((protocol, inner)) = parse_protocol_name(&h.protocol) else {
        return usage(format!("unknown protocol `{}` in trace header", h.protocol));
    };
    let inputs = h
        .inputs
        .iter()
        .map(bits_of)
        .collect::<Option<Vec<Bit>>>()
        .ok_or_else(|| HarnessError::Usage("trace header inputs are not bits".into()))?;
    let spec: StrategySpec = serde_json::from_value(h.adversary.clone())
        .map_err(|e| HarnessError::Usage(format!("trace header adversary: {e}")))?;
    let adversary = match spec {
        StrategySpec::None => AdversaryConfig::None,
        StrategySpec::Silence => AdversaryConfig::Silence,
        StrategySpec::Random { seed, stream, extra } => AdversaryConfig::Random { seed, stream, extra },
        StrategySpec::Scripted { rounds } => AdversaryConfig::Scripted { rounds },
    };
    let cfg = ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        protocol,
        inner,
        n: h.n,
        t: h.t,
        fault: h.fault,
        inputs: InputSpec::Explicit(inputs),
        max_rounds: h.max_rounds,
        horizon: None,
        schedule: h.schedule.kind,
        adversary,
        output: OutputPaths::default(),
        expect: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Split concatenated JSONL traces at their header lines.
pub fn split_traces(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let is_header = serde_json::from_str::<serde_json::Value>(line)
            .ok()
            .is_some_and(|v| v.get("type").and_then(|t| t.as_str()) == Some("header"));
        if is_header || out.is_empty() {
            out.push(String::new());
        }
        let cur = out.last_mut().expect("pushed above");
        cur.push_str(line);
        cur.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub run: RunOutcome,
    /// Whether the regenerated traces (or verdicts, for configs) match.
    pub reproduced: bool,
    pub detail: String,
}

/// Re-execute every trace in a JSONL file and compare byte for byte.
pub fn replay_trace(text: &str) -> Result<ReplayOutcome, HarnessError> {
    let pieces = split_traces(text);
    if pieces.is_empty() {
        return usage("trace file is empty");
    }
    let mut run = RunOutcome { trace: String::new(), results: Vec::new() };
    for piece in &pieces {
        let parsed = parse_trace(piece)?;
        let cfg = config_from_header(&parsed.header.scenario)?;
        let r = run_config(&cfg)?;
        run.trace.push_str(&r.trace);
        run.results.extend(r.results);
    }
    let canonical: String = pieces.concat();
    let (reproduced, detail) = if run.trace == canonical {
        (true, format!("reproduced {} trace(s) byte for byte", pieces.len()))
    } else {
        let line = run.trace.lines().zip(canonical.lines()).position(|(a, b)| a != b).map_or_else(
            || run.trace.lines().count().min(canonical.lines().count()) + 1,
            |i| i + 1,
        );
        (false, format!("regenerated trace differs from the file at line {line}"))
    };
    Ok(ReplayOutcome { run, reproduced, detail })
}

/// Run a (counterexample) config and compare against its `expect` block.
pub fn replay_config(cfg: &ScenarioConfig) -> Result<ReplayOutcome, HarnessError> {
    let run = run_config(cfg)?;
    let (reproduced, detail) = match &cfg.expect {
        None => (true, "no expectation recorded".to_string()),
        Some(e) => {
            let clauses: BTreeMap<Clause, ()> = run.results.iter().flat_map(|r| r.violated_clauses.iter().map(|&c| (c, ()))).collect();
            let want: BTreeMap<Clause, ()> = e.violated_clauses.iter().map(|&c| (c, ())).collect();
            if run.holds() == e.holds && clauses == want {
                (true, "verdict matches the recorded expectation".to_string())
            } else {
                let got: Vec<String> = clauses.keys().map(|c| c.to_string()).collect();
                let wanted: Vec<String> = want.keys().map(|c| c.to_string()).collect();
                (false, format!("expected holds={} [{}], got holds={} [{}]", e.holds, wanted.join(","), run.holds(), got.join(",")))
            }
        }
    };
    Ok(ReplayOutcome { run, reproduced, detail })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omission(inputs: &str, adversary: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!(
            "schema_version = 1\nprotocol = \"omission_ca\"\nn = 3\nt = 2\nfault = \"omission\"\ninputs = {inputs}\nschedule = {{ kind = \"mobile\" }}\nadversary = {adversary}\n"
        ))
        .unwrap()
    }

    #[test]
    fn run_unanimous_fault_free() {
        let out = run_config(&omission("[1, 1, 1]", "{ kind = \"none\" }")).unwrap();
        assert_eq!(out.verdict_lines(), vec!["HOLDS commit(1)×3".to_string()]);
        assert!(out.holds());
    }

    #[test]
    fn run_rejects_search_adversary() {
        let cfg = omission("[1, 1, 1]", "{ kind = \"exhaustive\" }");
        assert!(matches!(run_config(&cfg), Err(HarnessError::Usage(_))));
    }

    #[test]
    fn random_run_replays_byte_for_byte() {
        let out = run_config(&omission("\"all\"", "{ kind = \"random\", seed = 11 }")).unwrap();
        assert_eq!(out.results.len(), 8);
        let rep = replay_trace(&out.trace).unwrap();
        assert!(rep.reproduced, "{}", rep.detail);
        assert_eq!(rep.run.trace, out.trace);
    }

    #[test]
    fn cap_parsing() {
        assert_eq!(parse_cap("1e8"), Some(100_000_000));
        assert_eq!(parse_cap("12_000"), Some(12_000));
        assert_eq!(parse_cap("1.5"), None);
        assert_eq!(parse_cap("lots"), None);
    }

    #[test]
    fn grouped_outputs() {
        let s = |v: &[&str]| group_outputs(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        assert_eq!(s(&["commit(1)", "adopt(1)", "commit(1)"]), "commit(1)×2 adopt(1)×1");
    }
}
