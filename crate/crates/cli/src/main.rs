//! `mad-lab`: run, check and sweep protocol scenarios.
//!
//! Exit status: 0 when everything ran and held, 1 when a violation was found
//! (or a replay did not reproduce), 2 on usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mad_lab::harness::{
    check_config, explain_trace, parse_cap, replay_config, replay_trace, run_config, summary_table, sweep,
    write_file, HarnessError, Overrides, ScenarioConfig, SweepSpec,
};
use mad_lab::par;

#[derive(Parser)]
#[command(name = "mad-lab", version, about = "Commit-adopt and consensus protocols under message adversaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config (run, check, replay) or sweep spec (sweep).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file: trace for run/replay, report for check, CSV for sweep.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Enumeration cap; above it checks fall back to sampling. Accepts `1e8`.
    #[arg(long, global = true, value_parser = cap_arg)]
    cap: Option<u128>,
    /// Seed for random and sampled adversaries.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Round cap for unbounded protocols.
    #[arg(long = "max-rounds", global = true)]
    max_rounds: Option<usize>,
}

fn cap_arg(s: &str) -> Result<u128, String> {
    parse_cap(s).ok_or_else(|| format!("`{s}` is not a non-negative integer"))
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario with a concrete adversary and write its trace.
    Run { file: Option<PathBuf> },
    /// Exhaustive (or sampled) adversary search over a scenario.
    Check { file: Option<PathBuf> },
    /// Check every cell of a sweep grid and write a CSV table.
    Sweep { file: Option<PathBuf> },
    /// Re-execute a JSONL trace (byte comparison) or a counterexample config.
    Replay { file: Option<PathBuf> },
    /// Pretty-print a JSONL trace.
    ExplainTrace { file: Option<PathBuf> },
}

enum Failure {
    Violation,
    Error(HarnessError),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Error(e)
    }
}

fn kind(e: &HarnessError) -> &'static str {
    match e {
        HarnessError::Config(_) => "config",
        HarnessError::Protocol(_) => "protocol",
        HarnessError::Adversary(_) => "adversary",
        HarnessError::Engine(_) => "engine",
        HarnessError::Trace(_) => "trace",
        HarnessError::Usage(_) => "usage",
        HarnessError::Io { .. } => "io",
    }
}

fn input_path(file: Option<PathBuf>, common: &Common) -> Result<PathBuf, HarnessError> {
    file.or_else(|| common.config.clone())
        .ok_or_else(|| HarnessError::Usage("no input file: pass --config FILE or a positional path".into()))
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn overrides(common: &Common) -> Overrides {
    Overrides { cap: common.cap, seed: common.seed, max_rounds: common.max_rounds }
}

fn load_config(path: &Path, common: &Common) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = ScenarioConfig::load(path)?;
    overrides(common).apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn verdict(ok: bool) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

fn cmd_run(path: &Path, common: &Common) -> Result<(), Failure> {
    let cfg = load_config(path, common)?;
    let out = run_config(&cfg)?;
    if let Some(p) = common.out.as_ref().or(cfg.output.trace.as_ref()) {
        write_file(p, &out.trace)?;
    }
    for line in out.verdict_lines() {
        println!("{line}");
    }
    verdict(out.holds())
}

fn counterexample_path(cfg: &ScenarioConfig, report: Option<&PathBuf>) -> PathBuf {
    if let Some(p) = &cfg.output.counterexample {
        return p.clone();
    }
    match report {
        Some(r) => {
            let stem = r.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
            r.with_file_name(format!("{stem}.counterexample.toml"))
        }
        None => PathBuf::from("counterexample.toml"),
    }
}

fn cmd_check(path: &Path, common: &Common) -> Result<(), Failure> {
    let cfg = load_config(path, common)?;
    let mut outcome = check_config(&cfg, &overrides(common))?;
    let report = common.out.as_ref().or(cfg.output.report.as_ref());
    if let Some(cx) = &outcome.counterexample {
        let p = counterexample_path(&cfg, report);
        write_file(&p, &cx.to_toml())?;
        outcome.row.counterexample = Some(p);
    }
    if let Some(p) = report {
        write_file(p, &outcome.report_json())?;
    }
    print!("{}", summary_table(std::slice::from_ref(&outcome.row)));
    if let Some(reason) = &outcome.report.fallback {
        println!("note: {reason}; sampled instead");
    }
    verdict(outcome.holds())
}

fn cmd_sweep(path: &Path, common: &Common) -> Result<(), Failure> {
    let spec = SweepSpec::load(path).map_err(HarnessError::from)?;
    let csv_path = common.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let stem = csv_path.file_stem().map_or_else(|| "sweep".into(), |s| s.to_string_lossy().into_owned());
    let witness_dir = csv_path.with_file_name(format!("{stem}-witnesses"));
    let out = sweep(&spec, &overrides(common), Some(&witness_dir))?;
    write_file(&csv_path, &out.to_csv())?;
    print!("{}", summary_table(&out.summary));
    println!("wrote {}", csv_path.display());
    verdict(out.holds())
}

fn cmd_replay(path: &Path, common: &Common) -> Result<(), Failure> {
    let is_trace = path.extension().is_some_and(|e| e == "jsonl" || e == "json");
    let outcome = if is_trace {
        replay_trace(&read(path)?)?
    } else {
        let cfg = load_config(path, common)?;
        replay_config(&cfg)?
    };
    if let Some(p) = &common.out {
        write_file(p, &outcome.run.trace)?;
    }
    for line in outcome.run.verdict_lines() {
        println!("{line}");
    }
    if !outcome.reproduced {
        eprintln!("replay: {}", outcome.detail);
        return Err(Failure::Violation);
    }
    println!("replay: {}", outcome.detail);
    verdict(outcome.run.holds())
}

fn cmd_explain(path: &Path, common: &Common) -> Result<(), Failure> {
    let text = explain_trace(&read(path)?)?;
    match &common.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.common.clone();
    let result = par::with_jobs(common.jobs, move || -> Result<(), Failure> {
        match cli.command {
            Command::Run { file } => cmd_run(&input_path(file, &common)?, &common),
            Command::Check { file } => cmd_check(&input_path(file, &common)?, &common),
            Command::Sweep { file } => cmd_sweep(&input_path(file, &common)?, &common),
            Command::Replay { file } => cmd_replay(&input_path(file, &common)?, &common),
            Command::ExplainTrace { file } => cmd_explain(&input_path(file, &common)?, &common),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            let diag = serde_json::json!({ "error": kind(&e), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(2)
        }
    }
}
