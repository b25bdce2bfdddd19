//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Reference values come from oracles local to this file: closed-form
//! behavior counts, a brute-force adversary that builds engine decisions
//! directly (bypassing the library's enumerator and memoized search), and
//! task relations re-implemented here over raw outputs and states.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mad_lab::adversary::{
    ActionTemplate, AdversaryStrategy, CorruptionSchedule, Decision, ProcSet, RoundScript, RoundView, ScheduleKind,
    ScriptedEdge, ScriptedStrategy, TamperAction,
};
use mad_lab::engine::{execute, EdgeEvent, Execution, FaultType, RejectReason};
use mad_lab::harness::{AdversaryConfig, InputSpec, OutputPaths, ProtocolId, ScenarioConfig, SCHEMA_VERSION};
use mad_lab::model::{all_bit_vectors, Bit, CAOutput, Clause, Grade, Value};
use mad_lab::oracle::{check_with, exhaustive_check, find_violation, standard_leaf, CheckOptions, CheckReport, Counterexample, Leaf};
use mad_lab::protocols::{AuthCa, CommitAdopt, GcCa, Indulgent, OmissionCa, Protocol, RoundDomain, StatCons, WcRound};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---------------------------------------------------------------- reference relations

/// Commit-adopt: unanimous v => everyone commits v; any commit of v => everyone outputs v.
fn ca_ok(inputs: &[Bit], outs: &[Option<CAOutput>]) -> bool {
    let Some(outs) = outs.iter().copied().collect::<Option<Vec<_>>>() else {
        return false;
    };
    let unanimous = inputs.iter().all(|&b| b == inputs[0]);
    if unanimous && outs.iter().any(|o| o.grade != Grade::Commit || o.value != inputs[0]) {
        return false;
    }
    for o in &outs {
        if o.grade == Grade::Commit && outs.iter().any(|p| p.value != o.value) {
            return false;
        }
    }
    true
}

/// Binary consensus: everyone decided, same value, somebody's input.
fn consensus_ok(inputs: &[Bit], outs: &[Option<Bit>]) -> bool {
    let Some(outs) = outs.iter().copied().collect::<Option<Vec<_>>>() else {
        return false;
    };
    outs.iter().all(|&b| b == outs[0]) && inputs.contains(&outs[0])
}

/// MAdABSM contract over true inputs and every processor's vector: some index
/// set of size n - t is correct everywhere, and non-bot entries never conflict.
fn madabsm_ok(truth: &[Value], views: &[Vec<Value>], t: usize) -> Result<(), &'static str> {
    let n = truth.len();
    if views.iter().any(|v| v.len() != n) {
        return Err("vector length");
    }
    let covered = (0..n).filter(|&l| views.iter().all(|v| v[l] == truth[l])).count();
    if covered + t < n {
        return Err("coverage");
    }
    for l in 0..n {
        let vals: Vec<&Value> = views.iter().map(|v| &v[l]).filter(|x| **x != Value::Bot).collect();
        if vals.windows(2).any(|w| w[0] != w[1]) {
            return Err("consistency");
        }
    }
    Ok(())
}

/// Weak consensus over the first-round outputs `y`.
fn wc_ok(inputs: &[Bit], ys: &[Option<Value>]) -> Result<(), &'static str> {
    let Some(ys) = ys.iter().cloned().collect::<Option<Vec<_>>>() else {
        return Err("termination");
    };
    let bits: Vec<Bit> = ys.iter().filter_map(Value::as_bit).collect();
    if bits.windows(2).any(|w| w[0] != w[1]) {
        return Err("weak consistency");
    }
    if ys.iter().any(|y| *y != Value::Bot && y.as_bit().is_none()) {
        return Err("output outside {0,1,bot}");
    }
    if inputs.iter().all(|&b| b == inputs[0]) && ys.iter().any(|y| *y != Value::Bit(inputs[0])) {
        return Err("persistency");
    }
    Ok(())
}

// ---------------------------------------------------------------- reference counts

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Templates per corrupted edge in a round with this domain.
fn per_edge(domain: &RoundDomain, fault: FaultType, n: usize, t: usize) -> u128 {
    let d = domain.values().len() as u128;
    match (fault, domain) {
        (FaultType::Omission, _) => 2,
        (_, RoundDomain::Scalar(_)) => 2 + (d - 1) + 1,
        (f, RoundDomain::Claims(_)) => {
            let max = if f == FaultType::AuthByzantine { t } else { n };
            2 + (1..=max).map(|k| binom(n, k) * (d - 1).pow(k as u32)).sum::<u128>() + 1
        }
    }
}

/// Mobile behaviors: product over rounds of sum over sets |S| <= t of A^(|S|(n-1)).
fn mobile_count<P: Protocol>(p: &P, fault: FaultType, t: usize, rounds: usize) -> u128 {
    let n = p.n();
    (0..rounds)
        .map(|r| {
            let a = per_edge(&p.domain(r), fault, n, t);
            (0..=t).map(|k| binom(n, k) * a.pow((k * (n - 1)) as u32)).sum::<u128>()
        })
        .product()
}

// ---------------------------------------------------------------- brute-force adversary

/// One round of a brute-force plan: corruption mask and one choice per
/// corrupted edge (0 deliver, 1 drop, 2.. other domain values in order, last garbage).
#[derive(Clone)]
struct PlanRound {
    set: u64,
    choices: Vec<usize>,
}

struct Plan(Vec<PlanRound>);

impl AdversaryStrategy for Plan {
    fn decide(&mut self, view: &RoundView<'_>) -> Decision {
        let Some(pr) = self.0.get(view.round.0) else {
            return Decision::none();
        };
        let n = view.n;
        let mut actions = Vec::new();
        let mut k = 0;
        for from in (0..n).filter(|i| pr.set >> i & 1 == 1) {
            for to in (0..n).filter(|&j| j != from) {
                let c = pr.choices[k];
                k += 1;
                let intended = &view.intended[from][to];
                let others: Vec<&Value> = view.domain.values().iter().filter(|v| *v != intended).collect();
                let act = match c {
                    0 => continue,
                    1 => TamperAction::Drop,
                    c if c - 2 < others.len() => TamperAction::Replace(others[c - 2].clone()),
                    _ => TamperAction::Replace(Value::garbage()),
                };
                actions.push((from, to, act));
            }
        }
        Decision { corrupted: ProcSet::from_bits(pr.set), actions }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({"kind": "plan"})
    }
}

fn masks(n: usize, t: usize) -> Vec<u64> {
    (0..1u64 << n).filter(|m| m.count_ones() as usize <= t).collect()
}

fn choice_vectors(edges: usize, a: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..edges {
        out = out.into_iter().flat_map(|v| (0..a).map(move |c| [v.clone(), vec![c]].concat())).collect();
    }
    out
}

/// Every plan over scalar-domain rounds. Stationary plans keep one mask throughout.
fn all_plans<P: Protocol>(p: &P, fault: FaultType, t: usize, stationary: bool) -> Vec<Plan> {
    let n = p.n();
    let rounds = p.rounds().expect("fixed-length protocol");
    let arity: Vec<usize> = (0..rounds).map(|r| per_edge(&p.domain(r), fault, n, t) as usize).collect();
    let mut plans = Vec::new();
    let round_opts = |r: usize, m: u64| -> Vec<PlanRound> {
        choice_vectors(m.count_ones() as usize * (n - 1), arity[r]).into_iter().map(|c| PlanRound { set: m, choices: c }).collect()
    };
    let grow = |fixed: Option<u64>| {
        let mut partial: Vec<Vec<PlanRound>> = vec![Vec::new()];
        for r in 0..rounds {
            let ms = fixed.map_or_else(|| masks(n, t), |m| vec![m]);
            partial = partial
                .into_iter()
                .flat_map(|pre| {
                    let opts: Vec<PlanRound> = ms.iter().flat_map(|&m| round_opts(r, m)).collect();
                    opts.into_iter().map(move |o| [pre.clone(), vec![o]].concat())
                })
                .collect();
        }
        partial.into_iter().map(Plan).collect::<Vec<_>>()
    };
    if stationary {
        for m in masks(n, t) {
            plans.extend(grow(Some(m)));
        }
    } else {
        plans.extend(grow(None));
    }
    plans
}

/// Brute-force violation count of a commit-adopt machine: (executions, violations).
fn brute_force_ca<P: Protocol<Input = Bit, Output = CAOutput>>(p: &P, fault: FaultType, t: usize, stationary: bool) -> (u128, u128) {
    let plans = all_plans(p, fault, t, stationary);
    let schedule = if stationary { CorruptionSchedule::stationary(t) } else { CorruptionSchedule::mobile(t) };
    let mut execs = 0;
    let mut bad = 0;
    for x in all_bit_vectors(p.n()) {
        for plan in &plans {
            let mut adv = Plan(plan.0.clone());
            let tr = execute(p, &x, &mut adv, fault, schedule, 100).expect("plan is legal");
            execs += 1;
            if !ca_ok(&x, &tr.outputs) {
                bad += 1;
            }
        }
    }
    (execs, bad)
}

// ---------------------------------------------------------------- criteria

fn fail_on(report: &CheckReport) -> Result<(), String> {
    ensure(report.violations == 0, format!("{} violations: {:?}", report.violations, report.violated_clauses))?;
    ensure(report.property_failures.is_empty(), format!("property failures {:?}", report.property_failures))
}

fn criterion1() -> Outcome {
    let p = OmissionCa::new(3, 2).unwrap();
    let sched = CorruptionSchedule::mobile(2);
    let expect = mobile_count(&p, FaultType::Omission, 2, 2);
    ensure(expect == 3721, format!("reference count {expect}"))?;
    let t0 = Instant::now();
    let r = exhaustive_check(&p, FaultType::Omission, sched, &all_bit_vectors(3), &CheckOptions::default()).map_err(|e| e.to_string())?;
    let took = t0.elapsed();
    ensure(r.is_exhaustive(), "expected exhaustive mode")?;
    ensure(r.behaviors == expect, format!("behaviors {} != {expect}", r.behaviors))?;
    ensure(r.executions == 8 * expect, format!("executions {}", r.executions))?;
    fail_on(&r)?;
    ensure(took < Duration::from_secs(10), format!("exhaustive took {}", secs(took)))?;
    let (bf_execs, bf_bad) = brute_force_ca(&p, FaultType::Omission, 2, false);
    ensure(bf_execs == r.executions && bf_bad == 0, format!("brute force {bf_bad}/{bf_execs}"))?;

    let p4 = OmissionCa::new(4, 3).unwrap();
    let opts = CheckOptions { force_sampled: true, samples: 100_000, seed: 1, ..CheckOptions::default() };
    let t1 = Instant::now();
    let s = exhaustive_check(&p4, FaultType::Omission, CorruptionSchedule::mobile(3), &all_bit_vectors(4), &opts).map_err(|e| e.to_string())?;
    fail_on(&s)?;
    ensure(s.behaviors >= 100_000, "fewer than 1e5 sampled behaviors")?;
    let ub = s.violation_rate_upper95.ok_or("no upper bound reported")?;
    Ok(format!(
        "n=3 t=2: {} executions, 0 violations in {}; n=4 t=3 sampled: {} behaviors x 16 inputs, 0 violations, rate <= {ub:.2e} in {}",
        r.executions,
        secs(took),
        s.behaviors,
        secs(t1.elapsed())
    ))
}

/// Standard leaf plus the WC contract on every processor's first-round output.
fn gc_leaf(x: &[Bit], e: &Execution<'_, GcCa>) -> Leaf {
    let mut l = standard_leaf(x, e);
    let ys: Vec<Option<Value>> = e.states().iter().map(|s| s.y.clone()).collect();
    if let Err(what) = wc_ok(x, &ys) {
        l.properties.push(match what {
            "termination" => "ref_wc_termination",
            "weak consistency" => "ref_wc_weak_consistency",
            "persistency" => "ref_wc_persistency",
            _ => "ref_wc_other",
        });
    }
    if !ca_ok(x, &e.outputs()) {
        l.properties.push("ref_commit_adopt");
    }
    l
}

fn gc_n4() -> Result<(CheckReport, Duration), String> {
    let p = GcCa::new(4, 1).unwrap();
    let t0 = Instant::now();
    let r = check_with(&p, FaultType::Byzantine, CorruptionSchedule::mobile(1), &all_bit_vectors(4), &CheckOptions::default(), &gc_leaf)
        .map_err(|e| e.to_string())?;
    Ok((r, t0.elapsed()))
}

fn cx_line<P: Protocol>(c: &Counterexample<P>) -> String {
    let x: Vec<String> = c.trace.scenario.inputs.iter().map(|v| v.to_string()).collect();
    let clauses: Vec<String> = c.violated_clauses.iter().map(|c| c.to_string()).collect();
    format!("inputs {} with {} tampered edges violates {}", x.join(""), c.strategy.tamper_count(), clauses.join(","))
}

fn criterion2(gc: &(CheckReport, Duration)) -> Outcome {
    let (r, took) = gc;
    let p = GcCa::new(4, 1).unwrap();
    let expect = mobile_count(&p, FaultType::Byzantine, 1, 2);
    ensure(r.is_exhaustive(), "expected exhaustive mode")?;
    ensure(r.behaviors == expect, format!("behaviors {} != reference {expect}", r.behaviors))?;
    ensure(r.violations == 0, format!("{} violations", r.violations))?;
    ensure(!r.property_failures.contains_key("ref_commit_adopt"), "reference relation disagrees")?;
    ensure(*took < Duration::from_secs(60), format!("took {}", secs(*took)))?;

    let p3 = GcCa::new(3, 1).unwrap();
    let t0 = Instant::now();
    let cx = find_violation(&p3, FaultType::Byzantine, CorruptionSchedule::stationary(1), &all_bit_vectors(3), u128::MAX, &CheckOptions::default())
        .map_err(|e| e.to_string())?
        .ok_or("no counterexample for gc_ca n=3 t=1")?;
    let took3 = t0.elapsed();
    ensure(took3 < Duration::from_secs(10), format!("search took {}", secs(took3)))?;
    let x: Vec<Bit> = cx.inputs.clone();
    ensure(!ca_ok(&x, &cx.trace.outputs), "reference relation does not see a violation")?;
    let (bf_execs, bf_bad) = brute_force_ca(&p3, FaultType::Byzantine, 1, true);
    let full = exhaustive_check(&p3, FaultType::Byzantine, CorruptionSchedule::stationary(1), &all_bit_vectors(3), &CheckOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(
        bf_execs == full.executions && bf_bad == full.violations && bf_bad > 0,
        format!("brute force {bf_bad}/{bf_execs} vs oracle {}/{}", full.violations, full.executions),
    )?;
    Ok(format!(
        "n=4 t=1: {} behaviors x 16 inputs, 0 violations in {}; n=3 t=1 stationary: {} in {} (brute force agrees: {bf_bad}/{bf_execs} violating)",
        r.behaviors,
        secs(*took),
        cx_line(&cx),
        secs(took3)
    ))
}

/// Standard leaf plus the reference commit-adopt and MAdABSM contracts on both emulations.
fn auth_leaf(x: &[Bit], e: &Execution<'_, AuthCa>) -> Leaf {
    let mut l = standard_leaf(x, e);
    if !ca_ok(x, &e.outputs()) {
        l.properties.push("ref_commit_adopt");
    }
    let t = 1;
    let states = e.states();
    let truth: Vec<Value> = x.iter().map(|&b| Value::Bit(b)).collect();
    match states.iter().map(|s| s.z.clone()).collect::<Option<Vec<_>>>() {
        Some(z) => {
            if madabsm_ok(&truth, &z, t).is_err() {
                l.properties.push("ref_madabsm_first");
            }
        }
        None => l.properties.push("ref_madabsm_first_missing"),
    }
    let proposals: Option<Vec<Value>> = states.iter().map(|s| s.proposal.map(Value::Propose)).collect();
    match (proposals, states.iter().map(|s| s.d.clone()).collect::<Option<Vec<_>>>()) {
        (Some(truth), Some(d)) => {
            if madabsm_ok(&truth, &d, t).is_err() {
                l.properties.push("ref_madabsm_second");
            }
        }
        _ => l.properties.push("ref_madabsm_second_missing"),
    }
    l
}

fn auth_n3() -> Result<(CheckReport, Duration), String> {
    let p = AuthCa::new(3, 1).unwrap();
    let t0 = Instant::now();
    let r = check_with(&p, FaultType::AuthByzantine, CorruptionSchedule::mobile(1), &all_bit_vectors(3), &CheckOptions::default(), &auth_leaf)
        .map_err(|e| e.to_string())?;
    Ok((r, t0.elapsed()))
}

fn criterion3(auth: &(CheckReport, Duration)) -> Outcome {
    let (r, took) = auth;
    let p = AuthCa::new(3, 1).unwrap();
    let expect = mobile_count(&p, FaultType::AuthByzantine, 1, 4);
    ensure(r.is_exhaustive(), format!("expected exhaustive mode, got {:?} ({:?})", r.mode, r.fallback))?;
    ensure(r.behaviors == expect, format!("behaviors {} != reference {expect}", r.behaviors))?;
    ensure(r.violations == 0, format!("{} violations", r.violations))?;
    ensure(!r.property_failures.contains_key("ref_commit_adopt"), "reference relation disagrees")?;
    let p2 = AuthCa::new(2, 1).unwrap();
    let t0 = Instant::now();
    let cx = find_violation(&p2, FaultType::AuthByzantine, CorruptionSchedule::mobile(1), &all_bit_vectors(2), u128::MAX, &CheckOptions::default())
        .map_err(|e| e.to_string())?
        .ok_or("no counterexample for auth_ca n=2 t=1")?;
    let took2 = t0.elapsed();
    ensure(!ca_ok(&cx.inputs, &cx.trace.outputs), "reference relation does not see a violation")?;
    let total = *took + took2;
    ensure(total < Duration::from_secs(300), format!("combined {}", secs(total)))?;
    Ok(format!(
        "n=3 t=1: {} behaviors x 8 inputs, 0 violations in {}; n=2 t=1: {} in {}",
        r.behaviors,
        secs(*took),
        cx_line(&cx),
        secs(took2)
    ))
}

fn criterion4(auth: &(CheckReport, Duration)) -> Outcome {
    let (r, _) = auth;
    ensure(r.is_exhaustive(), "criterion 3 run was not exhaustive")?;
    ensure(r.property_failures.is_empty(), format!("failures {:?}", r.property_failures))?;
    Ok(format!("coverage and non-conflict hold for both emulations on all {} executions", r.executions))
}

fn criterion5(gc: &(CheckReport, Duration)) -> Outcome {
    let (r, _) = gc;
    ensure(r.is_exhaustive(), "gc_ca run was not exhaustive")?;
    ensure(r.property_failures.is_empty(), format!("failures {:?}", r.property_failures))?;
    // The weak-consensus round on its own, horizon one round.
    let wc = WcRound::new(4, 1).unwrap();
    let leaf = |x: &[Bit], e: &Execution<'_, WcRound>| {
        let mut l = standard_leaf(x, e);
        if e.round().0 != 1 || wc_ok(x, &e.outputs()).is_err() {
            l.properties.push("ref_wc");
        }
        l
    };
    let w = check_with(&wc, FaultType::Byzantine, CorruptionSchedule::mobile(1), &all_bit_vectors(4), &CheckOptions::default(), &leaf)
        .map_err(|e| e.to_string())?;
    ensure(w.behaviors == mobile_count(&wc, FaultType::Byzantine, 1, 1), "wc behavior count")?;
    fail_on(&w)?;
    Ok(format!(
        "weak consistency, persistency, termination hold on all {} gc_ca executions and all {} single-round executions",
        r.executions, w.executions
    ))
}

fn consensus_leaf<P: Protocol<Input = Bit, Output = Bit>>(x: &[Bit], e: &Execution<'_, P>) -> Leaf {
    let mut l = standard_leaf(x, e);
    if !consensus_ok(x, &e.outputs()) {
        l.properties.push("ref_consensus");
    }
    l
}

fn sampled_inputs(n: usize, k: usize, seed: u64) -> Vec<Vec<Bit>> {
    let mut v = InputSpec::Sampled { sampled: mad_lab::harness::SampledInputs { k, seed } }.resolve(n).unwrap();
    for u in [vec![Bit::Zero; n], vec![Bit::One; n]] {
        if !v.contains(&u) {
            v.push(u);
        }
    }
    v
}

fn statcons_case<C: CommitAdopt>(ca: C, fault: FaultType, t: usize, inputs: &[Vec<Bit>]) -> Result<String, String> {
    let p = StatCons::new(ca);
    let opts = CheckOptions { force_sampled: true, samples: 10_000, seed: 6, ..CheckOptions::default() };
    let t0 = Instant::now();
    let r = check_with(&p, fault, CorruptionSchedule::stationary(t), inputs, &opts, &consensus_leaf).map_err(|e| e.to_string())?;
    fail_on(&r).map_err(|e| format!("{}: {e}", p.name()))?;
    Ok(format!("{} n={} t={t}: {} runs in {}", p.name(), p.n(), r.executions, secs(t0.elapsed())))
}

fn criterion6() -> Outcome {
    let parts = [
        statcons_case(OmissionCa::new(4, 3).unwrap(), FaultType::Omission, 3, &all_bit_vectors(4))?,
        statcons_case(GcCa::new(4, 1).unwrap(), FaultType::Byzantine, 1, &all_bit_vectors(4))?,
        statcons_case(AuthCa::new(5, 2).unwrap(), FaultType::AuthByzantine, 2, &sampled_inputs(5, 6, 60))?,
    ];
    Ok(format!("0 consensus violations: {}", parts.join("; ")))
}

fn indulgent_case<C: CommitAdopt>(ca: C, fault: FaultType, t: usize, inputs: &[Vec<Bit>], samples: u64) -> Result<String, String> {
    let p = Indulgent::new(ca);
    let l = p.super_phase_len();
    let mut out = Vec::new();
    for mult in [0, 1, 3] {
        let rho = mult * l;
        let deadline = rho / l + 2;
        let opts = CheckOptions { force_sampled: true, samples, seed: 7 + mult as u64, max_rounds: (deadline + 2) * l, ..CheckOptions::default() };
        let leaf = |x: &[Bit], e: &Execution<'_, Indulgent<C>>| {
            let mut lf = consensus_leaf(x, e);
            let states = e.states();
            let decided: Vec<Bit> = states.iter().filter_map(|s| s.decided).collect();
            let zero = decided.contains(&Bit::Zero) || states.iter().any(|s| s.committed[0]);
            let one = decided.contains(&Bit::One) || states.iter().any(|s| s.committed[1]);
            if zero && one {
                lf.properties.push("ref_two_values");
            }
            if states.iter().any(|s| s.decided_in.is_none_or(|d| d > deadline)) {
                lf.properties.push("ref_late");
            }
            lf
        };
        let r = check_with(&p, fault, CorruptionSchedule::eventually_stationary(rho, t), inputs, &opts, &leaf).map_err(|e| e.to_string())?;
        if r.violations > 0 || !r.property_failures.is_empty() {
            return Err(format!("{} rho={rho}: {} violations {:?} {:?}", p.name(), r.violations, r.violated_clauses, r.property_failures));
        }
        out.push(r.executions);
    }
    Ok(format!("{} (super-phase {l}): {:?} runs", p.name(), out))
}

fn first_super_phase<C: CommitAdopt>(ca: C, fault: FaultType, t: usize) -> Result<String, String> {
    let p = Indulgent::new(ca);
    let l = p.super_phase_len();
    let opts = CheckOptions { cap: u128::MAX, horizon: Some(l), ..CheckOptions::default() };
    let unanimous = vec![vec![Bit::Zero; p.n()], vec![Bit::One; p.n()]];
    let leaf = |x: &[Bit], e: &Execution<'_, Indulgent<C>>| {
        let ok = e.states().iter().all(|s| s.decided == Some(x[0]) && s.decided_in == Some(0));
        Leaf { violated: Vec::new(), properties: if ok { Vec::new() } else { vec!["ref_not_first"] } }
    };
    let r = check_with(&p, fault, CorruptionSchedule::mobile(t), &unanimous, &opts, &leaf).map_err(|e| e.to_string())?;
    ensure(r.is_exhaustive(), "not exhaustive")?;
    ensure(r.executions == 2 * r.behaviors, "leaf count")?;
    ensure(r.property_failures.is_empty(), format!("{}: {:?}", p.name(), r.property_failures))?;
    Ok(format!("{} t={t}: {:.3e} executions", p.name(), r.executions as f64))
}

fn criterion7() -> Outcome {
    let a = [
        indulgent_case(OmissionCa::new(4, 3).unwrap(), FaultType::Omission, 3, &all_bit_vectors(4), 2_000)?,
        indulgent_case(GcCa::new(4, 1).unwrap(), FaultType::Byzantine, 1, &all_bit_vectors(4), 2_000)?,
        indulgent_case(AuthCa::new(5, 2).unwrap(), FaultType::AuthByzantine, 2, &sampled_inputs(5, 6, 70), 1_000)?,
    ];
    let c = [
        first_super_phase(OmissionCa::new(3, 2).unwrap(), FaultType::Omission, 2)?,
        first_super_phase(GcCa::new(3, 0).unwrap(), FaultType::Byzantine, 0)?,
        first_super_phase(AuthCa::new(3, 1).unwrap(), FaultType::AuthByzantine, 1)?,
    ];
    Ok(format!("safety and liveness for rho in {{0, 1, 3}} super-phases: {}; unanimous inputs decide in super-phase 1: {}", a.join("; "), c.join("; ")))
}

fn criterion8() -> Outcome {
    let p = AuthCa::new(4, 1).unwrap();
    let n = p.n();
    let rounds = p.rounds().unwrap();
    let claim_rounds: Vec<usize> = (0..rounds).filter(|&r| p.domain(r).carries_claims()).collect();
    ensure(claim_rounds.len() == 2, "expected two claim rounds")?;
    // p0 is honest in every non-claim round, so claims of that round are not licensed by corruption.
    let mut forged = Vec::new();
    let mut script = vec![RoundScript::default(); rounds];
    for &r in &claim_rounds {
        script[r].corrupted = ProcSet::EMPTY.with(0);
        let mut k = 0;
        'edges: for to in 1..n {
            for entry in 0..n {
                if k == 5 {
                    break 'edges;
                }
                script[r].actions.push(ScriptedEdge { from: 0, to, action: ActionTemplate::Edit(vec![(entry, 0)]) });
                forged.push((r, to, entry));
                k += 1;
            }
        }
    }
    forged.sort();
    forged.dedup();
    ensure(forged.len() == 10, "need ten distinct forgeries")?;
    let honest: Vec<RoundScript> = script.iter().map(|s| RoundScript { corrupted: s.corrupted, actions: Vec::new() }).collect();
    let mut total_rejections = 0;
    for x in all_bit_vectors(n) {
        let sched = CorruptionSchedule::mobile(1);
        let forger = execute(&p, &x, &mut ScriptedStrategy::new(script.clone()), FaultType::AuthByzantine, sched, 10).map_err(|e| e.to_string())?;
        let plain = execute(&p, &x, &mut ScriptedStrategy::new(honest.clone()), FaultType::AuthByzantine, sched, 10).map_err(|e| e.to_string())?;
        let rejections: Vec<&EdgeEvent> = forger.rounds.iter().flat_map(|r| &r.events).collect();
        ensure(rejections.len() == 10, format!("{} events", rejections.len()))?;
        for ev in &rejections {
            ensure(
                matches!(ev, EdgeEvent::ConstraintRejected { reason: RejectReason::Forgery { .. }, .. }),
                format!("unexpected event {ev:?}"),
            )?;
        }
        ensure(forger.rejections() == 10, "rejection count")?;
        ensure(forger.delivered() == plain.delivered(), "delivered matrices differ from the all-deliver run")?;
        ensure(forger.outputs == plain.outputs, "outputs differ")?;
        total_rejections += forger.rejections();
    }
    Ok(format!("10 forgeries rejected per run and delivered matrices match the all-deliver run on all 16 input vectors ({total_rejections} rejections)"))
}

// ---------------------------------------------------------------- criterion 9 (through the binary)

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mad-lab"))
}

fn run_bin(args: &[&str]) -> Result<(i32, String), String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn cx_config<P: Protocol<Input = Bit>>(protocol: ProtocolId, n: usize, c: &Counterexample<P>) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        protocol,
        inner: None,
        n,
        t: c.schedule.budget,
        fault: c.fault,
        inputs: InputSpec::Explicit(c.inputs.clone()),
        max_rounds: 1000,
        horizon: None,
        schedule: c.schedule.kind,
        adversary: AdversaryConfig::Scripted { rounds: c.strategy.rounds.clone() },
        output: OutputPaths::default(),
        expect: None,
    }
}

fn replays_to(dir: &Path, name: &str, cfg: &ScenarioConfig, clauses: &[Clause]) -> Result<(), String> {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_toml()).map_err(|e| e.to_string())?;
    let (code, stdout) = run_bin(&["run", "--config", path.to_str().unwrap()])?;
    let want: Vec<String> = clauses.iter().map(|c| c.to_string()).collect();
    let prefix = format!("VIOLATES {} ", want.join(","));
    ensure(code == 1, format!("{name}: exit {code}"))?;
    ensure(stdout.starts_with(&prefix), format!("{name}: `{}` does not start with `{prefix}`", stdout.trim()))
}

fn seeded_config(protocol: ProtocolId, inner: Option<ProtocolId>, n: usize, t: usize, fault: FaultType, schedule: ScheduleKind) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        protocol,
        inner,
        n,
        t,
        fault,
        inputs: InputSpec::Named("all".into()),
        max_rounds: 400,
        horizon: None,
        schedule,
        adversary: AdversaryConfig::Random { seed: 42, stream: 0, extra: None },
        output: OutputPaths::default(),
        expect: None,
    }
}

fn criterion9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = CheckOptions::default();
    let all3 = all_bit_vectors(3);
    let gc = find_violation(&GcCa::new(3, 1).unwrap(), FaultType::Byzantine, CorruptionSchedule::stationary(1), &all3, u128::MAX, &opts)
        .map_err(|e| e.to_string())?
        .ok_or("no gc counterexample")?;
    replays_to(dir.path(), "gc.toml", &cx_config(ProtocolId::GcCa, 3, &gc), &gc.violated_clauses)?;
    let auth = find_violation(&AuthCa::new(2, 1).unwrap(), FaultType::AuthByzantine, CorruptionSchedule::mobile(1), &all_bit_vectors(2), u128::MAX, &opts)
        .map_err(|e| e.to_string())?
        .ok_or("no auth counterexample")?;
    replays_to(dir.path(), "auth.toml", &cx_config(ProtocolId::AuthCa, 2, &auth), &auth.violated_clauses)?;

    // Counterexamples written by `check` replay through `run` to the reported clauses.
    let mut check_cfg = cx_config(ProtocolId::GcCa, 3, &gc);
    check_cfg.inputs = InputSpec::Named("all".into());
    check_cfg.adversary = AdversaryConfig::Exhaustive { cap: None, fallback_samples: None, seed: None };
    let check_path = dir.path().join("check.toml");
    std::fs::write(&check_path, check_cfg.to_toml()).map_err(|e| e.to_string())?;
    let report_path = dir.path().join("report.json");
    let (code, _) = run_bin(&["check", "--config", check_path.to_str().unwrap(), "--out", report_path.to_str().unwrap()])?;
    ensure(code == 1, format!("check exit {code}"))?;
    let cx_path = dir.path().join("report.counterexample.toml");
    let emitted = ScenarioConfig::load(&cx_path).map_err(|e| e.to_string())?;
    let expected = emitted.expect.clone().ok_or("counterexample lacks expect block")?;
    replays_to(dir.path(), "emitted.toml", &emitted, &expected.violated_clauses)?;
    let (code, _) = run_bin(&["replay", cx_path.to_str().unwrap()])?;
    ensure(code == 1, format!("replay of counterexample exit {code}"))?;

    // Seeded scenarios: identical bytes across repeats, worker counts and replay.
    let scenarios = [
        seeded_config(ProtocolId::OmissionCa, None, 3, 2, FaultType::Omission, ScheduleKind::Mobile),
        seeded_config(ProtocolId::GcCa, None, 4, 1, FaultType::Byzantine, ScheduleKind::Mobile),
        seeded_config(ProtocolId::AuthCa, None, 3, 1, FaultType::AuthByzantine, ScheduleKind::Mobile),
        seeded_config(ProtocolId::Statcons, Some(ProtocolId::GcCa), 4, 1, FaultType::Byzantine, ScheduleKind::Stationary),
        seeded_config(ProtocolId::Indulgent, Some(ProtocolId::OmissionCa), 3, 2, FaultType::Omission, ScheduleKind::EventuallyStationary { stabilization_round: 5 }),
    ];
    let mut bytes = 0;
    for (i, cfg) in scenarios.iter().enumerate() {
        let path = dir.path().join(format!("seeded{i}.toml"));
        std::fs::write(&path, cfg.to_toml()).map_err(|e| e.to_string())?;
        let p = path.to_str().unwrap();
        let mut traces = Vec::new();
        let mut codes = Vec::new();
        for (k, jobs) in ["1", "1", "4"].iter().enumerate() {
            let out = dir.path().join(format!("seeded{i}-{k}.jsonl"));
            let (code, _) = run_bin(&["run", "--config", p, "--jobs", jobs, "--out", out.to_str().unwrap()])?;
            codes.push(code);
            traces.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        ensure(codes.iter().all(|&c| c == codes[0] && c != 2), format!("scenario {i}: exit codes {codes:?}"))?;
        ensure(traces.windows(2).all(|w| w[0] == w[1]), format!("scenario {i}: traces differ between runs"))?;
        let first = dir.path().join(format!("seeded{i}-0.jsonl"));
        let regen = dir.path().join(format!("seeded{i}-replay.jsonl"));
        let (code, stdout) = run_bin(&["replay", first.to_str().unwrap(), "--out", regen.to_str().unwrap()])?;
        ensure(code == codes[0], format!("scenario {i}: replay exit {code}"))?;
        ensure(stdout.contains("byte for byte"), format!("scenario {i}: {stdout}"))?;
        ensure(std::fs::read(&regen).map_err(|e| e.to_string())? == traces[0], format!("scenario {i}: replay bytes differ"))?;
        bytes += traces[0].len();
    }
    Ok(format!(
        "gc and auth counterexamples replay to {:?} / {:?}; check-emitted counterexample replays; 5 seeded scenarios byte-identical across runs, --jobs and replay ({bytes} bytes)",
        gc.violated_clauses, auth.violated_clauses
    ))
}

// ---------------------------------------------------------------- driver

fn report(id: usize, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let took = secs(t0.elapsed());
    match res {
        Ok(detail) => {
            println!("criterion {id}: PASS ({took}) {detail}");
            true
        }
        Err(why) => {
            println!("criterion {id}: FAIL ({took}) {why}");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters: this target has a single entry.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    println!("acceptance criteria");
    let mut ok = true;
    ok &= report(1, criterion1);
    let gc = gc_n4();
    let auth = auth_n3();
    ok &= report(2, || criterion2(gc.as_ref().map_err(|e| e.clone())?));
    ok &= report(3, || criterion3(auth.as_ref().map_err(|e| e.clone())?));
    ok &= report(4, || criterion4(auth.as_ref().map_err(|e| e.clone())?));
    ok &= report(5, || criterion5(gc.as_ref().map_err(|e| e.clone())?));
    ok &= report(6, criterion6);
    ok &= report(7, criterion7);
    ok &= report(8, criterion8);
    ok &= report(9, criterion9);
    if !ok {
        std::process::exit(1);
    }
}
