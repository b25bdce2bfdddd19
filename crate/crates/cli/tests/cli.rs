use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mad-lab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("MAD_LAB_CAP").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const GC3: &str = "schema_version = 1\nprotocol = \"gc_ca\"\nn = 3\nt = 1\nfault = \"byzantine\"\nschedule = { kind = \"stationary\" }\nadversary = { kind = \"exhaustive\" }\n";

#[test]
fn run_holds_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let cfg = configs().join("omission_run.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("HOLDS"));
    let trace = std::fs::read_to_string(&out).unwrap();
    assert!(trace.lines().count() >= 3);
    let e = run(&["explain-trace", out.to_str().unwrap()]);
    assert_eq!(e.status.code(), Some(0));
    assert!(stdout(&e).contains("verdict: HOLDS"));
}

#[test]
fn every_shipped_config_parses() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        if text.contains("[[grid]]") {
            mad_lab::harness::SweepSpec::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        } else {
            mad_lab::harness::ScenarioConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        }
    }
}

#[test]
fn check_at_bound_exits_one_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gc3.toml", GC3);
    let report = dir.path().join("r.json");
    let o = run(&["check", "--config", &cfg, "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("at-bound, exhaustive, violation found (2394 of 9608)"), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["violations"], 2394);
    let cx = dir.path().join("r.counterexample.toml");
    let r = run(&["run", cx.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stdout(&r).starts_with("VIOLATES clause1"), "{}", stdout(&r));
}

#[test]
fn cap_falls_back_to_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gc3.toml", GC3);
    let o = run(&["check", &cfg, "--cap", "1e2", "--seed", "5"]);
    assert!(stdout(&o).contains("sampled(5)"), "{}", stdout(&o));
    assert!(stdout(&o).contains("note:"));
    let env = bin().args(["check", &cfg, "--seed", "5"]).env("MAD_LAB_CAP", "100").output().unwrap();
    assert!(stdout(&env).contains("sampled(5)"), "{}", stdout(&env));
    // Explicit flag beats the environment.
    let flag = bin().args(["check", &cfg, "--cap", "1e8"]).env("MAD_LAB_CAP", "100").output().unwrap();
    assert!(stdout(&flag).contains(", exhaustive,"), "{}", stdout(&flag));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["check", "--cap", "lots", "x.toml"]).status.code(), Some(2));
    let bad_t = write(dir.path(), "bad.toml", &GC3.replace("t = 1", "t = 3"));
    let o = run(&["run", &bad_t]);
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["error"], "config");
    let schema = write(dir.path(), "schema.toml", &GC3.replace("schema_version = 1", "schema_version = 9"));
    assert_eq!(run(&["run", &schema]).status.code(), Some(2));
    let fault = write(dir.path(), "fault.toml", &GC3.replace("\"byzantine\"", "\"omission\""));
    assert_eq!(run(&["check", &fault]).status.code(), Some(2));
    // Search adversaries belong to `check`.
    assert_eq!(run(&["run", &write(dir.path(), "gc.toml", GC3)]).status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_and_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let spec = configs().join("sweep_small.toml");
    let o = run(&["sweep", spec.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("protocol,fault,n,t,mode,executions,violations,witness_path"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    let bad: Vec<&&str> = rows.iter().filter(|r| !r.contains(",0,")).collect();
    assert_eq!(bad.len(), 1, "{text}");
    let witness = bad[0].rsplit(',').next().unwrap();
    assert!(Path::new(witness).exists(), "{witness}");
    assert_eq!(run(&["run", witness]).status.code(), Some(1));
}

#[test]
fn replay_detects_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let cfg = configs().join("statcons_gc.toml");
    assert_eq!(run(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["replay", out.to_str().unwrap()]).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let edited = text.replacen("\"rounds\"", "\"rounds\" ", 1);
    let edited = if edited == text { text.replacen('1', "0", 1) } else { edited };
    let bad = write(dir.path(), "bad.jsonl", &edited);
    assert_ne!(run(&["replay", &bad]).status.code(), Some(0));
}
