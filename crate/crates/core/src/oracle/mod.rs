//! Ground truth by brute force: run a protocol against every enumerated
//! adversary behavior (or a seeded sample when the space is over the cap) and
//! every input vector, aggregate verdicts, and search for small
//! counterexamples.

mod explore;
mod stats;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversary::{space_size, CorruptionSchedule, RandomStrategy, ScriptedStrategy};
use crate::engine::{execute, final_verdict, run_to_end, EngineError, Execution, ExecutionTrace, FaultType, RunStatus};
use crate::model::Clause;
use crate::par;
use crate::protocols::{Protocol, RoundDomain};

pub use explore::{Explorer, Leaf, SpaceTable, Tally};
pub use stats::clopper_pearson_upper;

/// Leaf evaluator that also sees the input vector.
pub type InputLeaf<'a, P> = dyn Fn(&[<P as Protocol>::Input], &Execution<'_, P>) -> Leaf + Sync + 'a;

/// Tally, leaves seen and first witness for one input vector.
type PerInput = (Tally, usize, Option<(ScriptedStrategy, Leaf)>);

/// Default enumeration cap.
pub const DEFAULT_CAP: u128 = 100_000_000;
/// Samples drawn when an exhaustive check falls back to sampling.
pub const DEFAULT_FALLBACK_SAMPLES: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckMode {
    Exhaustive,
    Sampled { seed: u64, samples: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub protocol: String,
    pub n: usize,
    pub t: usize,
    pub fault: FaultType,
    pub schedule: CorruptionSchedule,
    /// Rounds each execution runs for (the unbounded ones stop earlier once
    /// everybody has decided).
    pub horizon: usize,
}

/// A violating execution in replayable form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub inputs: Vec<serde_json::Value>,
    pub strategy: ScriptedStrategy,
    pub violated_clauses: Vec<Clause>,
    pub failed_properties: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub instance: InstanceInfo,
    pub mode: CheckMode,
    /// Adversary behaviors per input vector (the space size when exhaustive).
    pub behaviors: u128,
    pub input_vectors: usize,
    pub executions: u128,
    pub violations: u128,
    pub violated_clauses: BTreeMap<Clause, u128>,
    pub property_failures: BTreeMap<String, u128>,
    /// 95% Clopper-Pearson upper bound on the violation rate (sampled mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation_rate_upper95: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
    /// Memoized search states visited (exhaustive mode).
    pub distinct_states: usize,
    pub witnesses: Vec<Witness>,
    pub wall_time_ms: u128,
}

impl CheckReport {
    /// No task violation and no property failure.
    pub fn clean(&self) -> bool {
        self.violations == 0 && self.property_failures.is_empty()
    }

    pub fn is_exhaustive(&self) -> bool {
        self.mode == CheckMode::Exhaustive
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub cap: u128,
    /// Run sampled even when the space fits under the cap.
    pub force_sampled: bool,
    pub seed: u64,
    pub samples: u64,
    pub max_rounds: usize,
    /// Exploration horizon for unbounded protocols.
    pub horizon: Option<usize>,
    pub witnesses: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            cap: DEFAULT_CAP,
            force_sampled: false,
            seed: 0,
            samples: DEFAULT_FALLBACK_SAMPLES,
            max_rounds: 1000,
            horizon: None,
            witnesses: 3,
        }
    }
}

/// The standard leaf: task verdict (missing outputs count as liveness
/// violations) plus the protocol's own audits.
pub fn standard_leaf<P: Protocol>(inputs: &[P::Input], exec: &Execution<'_, P>) -> Leaf {
    let protocol = exec.protocol();
    let v = final_verdict(protocol, inputs, &exec.outputs());
    Leaf { violated: v.violated_clauses, properties: protocol.audit(inputs, exec.states()) }
}

fn horizon_of<P: Protocol>(protocol: &P, opts: &CheckOptions) -> usize {
    protocol.rounds().or(opts.horizon).unwrap_or(opts.max_rounds)
}

pub fn domains<P: Protocol>(protocol: &P, horizon: usize) -> Vec<RoundDomain> {
    (0..horizon).map(|r| protocol.domain(r)).collect()
}

/// Static behavior count of `protocol` under this adversary over `horizon` rounds.
pub fn behaviors<P: Protocol>(protocol: &P, fault: FaultType, schedule: CorruptionSchedule, horizon: usize) -> u128 {
    space_size(protocol.n(), schedule.budget, fault, schedule, &domains(protocol, horizon))
}

fn witness<P: Protocol>(inputs: &[P::Input], strategy: ScriptedStrategy, leaf: &Leaf) -> Witness {
    Witness {
        inputs: inputs.iter().map(|x| serde_json::to_value(x).expect("inputs serialize")).collect(),
        strategy,
        violated_clauses: leaf.violated.clone(),
        failed_properties: leaf.properties.iter().map(|s| s.to_string()).collect(),
    }
}

/// Run every input vector against every behavior, falling back to seeded
/// sampling above the cap.
pub fn exhaustive_check<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[Vec<P::Input>],
    opts: &CheckOptions,
) -> Result<CheckReport, EngineError> {
    check_with(protocol, fault, schedule, inputs, opts, &|x, e| standard_leaf(x, e))
}

/// [`exhaustive_check`] with a caller-supplied leaf evaluation.
pub fn check_with<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[Vec<P::Input>],
    opts: &CheckOptions,
    leaf: &InputLeaf<'_, P>,
) -> Result<CheckReport, EngineError> {
    let started = Instant::now();
    let horizon = horizon_of(protocol, opts);
    let size = behaviors(protocol, fault, schedule, horizon);
    let instance = InstanceInfo { protocol: protocol.name(), n: protocol.n(), t: schedule.budget, fault, schedule, horizon };
    let mut report = if opts.force_sampled || size > opts.cap {
        let mut r = sampled(protocol, fault, schedule, inputs, opts, horizon, leaf, instance)?;
        if !opts.force_sampled {
            r.fallback = Some(format!("space of {size} behaviors exceeds cap {}", opts.cap));
        }
        r
    } else {
        exhaustive(protocol, fault, schedule, inputs, opts, horizon, size, leaf, instance)?
    };
    report.wall_time_ms = started.elapsed().as_millis();
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn exhaustive<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[Vec<P::Input>],
    opts: &CheckOptions,
    horizon: usize,
    size: u128,
    leaf: &InputLeaf<'_, P>,
    instance: InstanceInfo,
) -> Result<CheckReport, EngineError> {
    let per_input = par::map(inputs, |x| -> Result<PerInput, EngineError> {
        let f = |e: &Execution<'_, P>| leaf(x, e);
        let mut ex = Explorer::new(SpaceTable::new(protocol, fault, schedule, horizon), &f);
        let root = Execution::new(protocol, fault, schedule, x, false)?;
        let tally = (*ex.explore(&root)?).clone();
        let states = ex.distinct_states();
        let first = match &tally.first_violation {
            Some(path) => {
                let script = ex.spaces().script(path);
                let l = replay_leaf(protocol, fault, schedule, x, &script, horizon, leaf)?;
                Some((script, l))
            }
            None => match &tally.first_property_failure {
                Some(path) => {
                    let script = ex.spaces().script(path);
                    let l = replay_leaf(protocol, fault, schedule, x, &script, horizon, leaf)?;
                    Some((script, l))
                }
                None => None,
            },
        };
        Ok((tally, states, first))
    });
    let mut total = Tally::default();
    let mut witnesses = Vec::new();
    let mut distinct_states = 0;
    for (x, r) in inputs.iter().zip(per_input) {
        let (tally, states, first) = r?;
        assert_eq!(tally.executions, size, "explored leaves must match the behavior count");
        total.merge(&tally);
        distinct_states += states;
        if let Some((script, l)) = first {
            if witnesses.len() < opts.witnesses {
                witnesses.push(witness::<P>(x, script, &l));
            }
        }
    }
    Ok(CheckReport {
        instance,
        mode: CheckMode::Exhaustive,
        behaviors: size,
        input_vectors: inputs.len(),
        executions: total.executions,
        violations: total.violations,
        violated_clauses: total.clauses,
        property_failures: total.properties.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        violation_rate_upper95: None,
        fallback: None,
        distinct_states,
        witnesses,
        wall_time_ms: 0,
    })
}

fn replay_leaf<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[P::Input],
    script: &ScriptedStrategy,
    horizon: usize,
    leaf: &InputLeaf<'_, P>,
) -> Result<Leaf, EngineError> {
    let mut exec = Execution::new(protocol, fault, schedule, inputs, false)?;
    let mut adv = script.clone();
    while exec.round().0 < horizon {
        exec.step(&mut adv)?;
    }
    Ok(leaf(inputs, &exec))
}

/// Seeded random adversary for sample `stream`.
pub fn sample_strategy(seed: u64, stream: u64, fault: FaultType, schedule: CorruptionSchedule, n: usize) -> RandomStrategy {
    RandomStrategy::new(seed, stream, fault, schedule, n, RandomStrategy::default_alphabet(fault))
        .expect("default alphabet is legal for every fault type")
}

struct SampleChunk {
    tally: Tally,
    first: Option<(usize, ScriptedStrategy, Leaf)>,
}

#[allow(clippy::too_many_arguments)]
fn sampled<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[Vec<P::Input>],
    opts: &CheckOptions,
    horizon: usize,
    leaf: &InputLeaf<'_, P>,
    instance: InstanceInfo,
) -> Result<CheckReport, EngineError> {
    const CHUNK: u64 = 256;
    let n = protocol.n();
    let samples = opts.samples;
    let chunks = samples.div_ceil(CHUNK) as usize;
    let fixed = protocol.rounds().is_some() || opts.horizon.is_some();
    let results = par::map_range(chunks, |c| -> Result<Vec<SampleChunk>, EngineError> {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(samples);
        let mut out = Vec::new();
        for s in lo..hi {
            let mut chunk = SampleChunk { tally: Tally::default(), first: None };
            for (i, x) in inputs.iter().enumerate() {
                let mut adv = sample_strategy(opts.seed, s, fault, schedule, n);
                let mut exec = Execution::new(protocol, fault, schedule, x, false)?;
                if fixed {
                    while exec.round().0 < horizon {
                        exec.step(&mut adv)?;
                    }
                } else {
                    run_to_end(&mut exec, &mut adv, opts.max_rounds)?;
                }
                let l = leaf(x, &exec);
                chunk.tally.executions += 1;
                if l.is_violation() {
                    chunk.tally.violations += 1;
                    for c in &l.violated {
                        *chunk.tally.clauses.entry(*c).or_default() += 1;
                    }
                }
                for p in &l.properties {
                    *chunk.tally.properties.entry(p).or_default() += 1;
                }
                if chunk.first.is_none() && (l.is_violation() || !l.properties.is_empty()) {
                    chunk.first = Some((i, adv.into_script(), l));
                }
            }
            out.push(chunk);
        }
        Ok(out)
    });
    let mut total = Tally::default();
    let mut witnesses = Vec::new();
    for r in results {
        for chunk in r? {
            total.merge(&chunk.tally);
            if let Some((i, script, l)) = chunk.first {
                if witnesses.len() < opts.witnesses {
                    witnesses.push(witness::<P>(&inputs[i], script, &l));
                }
            }
        }
    }
    Ok(CheckReport {
        instance,
        mode: CheckMode::Sampled { seed: opts.seed, samples },
        behaviors: samples as u128,
        input_vectors: inputs.len(),
        executions: total.executions,
        violations: total.violations,
        violated_clauses: total.clauses,
        property_failures: total.properties.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        violation_rate_upper95: Some(clopper_pearson_upper(total.violations, total.executions, 0.95)),
        fallback: None,
        distinct_states: 0,
        witnesses,
        wall_time_ms: 0,
    })
}

/// A minimized violating execution.
#[derive(Clone, Debug)]
pub struct Counterexample<P: Protocol> {
    pub inputs: Vec<P::Input>,
    pub fault: FaultType,
    pub schedule: CorruptionSchedule,
    pub strategy: ScriptedStrategy,
    pub trace: ExecutionTrace<P>,
    pub violated_clauses: Vec<Clause>,
    /// Executions examined before the first violation turned up.
    pub searched: u128,
}

fn violates<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[P::Input],
    script: &ScriptedStrategy,
    max_rounds: usize,
) -> Result<bool, EngineError> {
    let mut exec = Execution::new(protocol, fault, schedule, inputs, false)?;
    let mut adv = script.clone();
    run_to_end(&mut exec, &mut adv, max_rounds)?;
    Ok(!final_verdict(protocol, inputs, &exec.outputs()).holds)
}

/// Greedily revert tamper templates to `Deliver` while the execution still
/// violates the task, until no single revert keeps it violating.
pub fn minimize<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[P::Input],
    script: ScriptedStrategy,
    max_rounds: usize,
) -> Result<ScriptedStrategy, EngineError> {
    let mut cur = script;
    loop {
        let mut changed = false;
        for pos in cur.tamper_positions() {
            let cand = cur.with_delivered(pos);
            if violates(protocol, fault, schedule, inputs, &cand, max_rounds)? {
                cur = cand;
                changed = true;
                break;
            }
        }
        if !changed {
            return Ok(cur);
        }
    }
}

/// First violating execution in enumeration order (inputs in the given
/// order, then behaviors), minimized. Spaces above the cap are searched with
/// seeded random adversaries instead. `budget` bounds the executions tried;
/// in exhaustive mode it is checked per input vector.
pub fn find_violation<P: Protocol>(
    protocol: &P,
    fault: FaultType,
    schedule: CorruptionSchedule,
    inputs: &[Vec<P::Input>],
    budget: u128,
    opts: &CheckOptions,
) -> Result<Option<Counterexample<P>>, EngineError> {
    let horizon = horizon_of(protocol, opts);
    let size = behaviors(protocol, fault, schedule, horizon);
    let mut searched: u128 = 0;
    let mut found: Option<(Vec<P::Input>, ScriptedStrategy)> = None;
    if size <= opts.cap && !opts.force_sampled {
        let leaf = |x: &[P::Input], e: &Execution<'_, P>| standard_leaf(x, e);
        for x in inputs {
            if searched >= budget {
                break;
            }
            let f = |e: &Execution<'_, P>| Leaf { properties: Vec::new(), ..leaf(x, e) };
            let mut ex = Explorer::new(SpaceTable::new(protocol, fault, schedule, horizon), &f);
            let root = Execution::new(protocol, fault, schedule, x, false)?;
            let tally = ex.explore(&root)?;
            if let Some(path) = &tally.first_violation {
                let script = ex.spaces().script(path);
                found = Some((x.clone(), script));
                break;
            }
            searched = searched.saturating_add(tally.executions);
        }
    } else {
        let n = protocol.n();
        'outer: for s in 0..u64::MAX {
            for x in inputs {
                if searched >= budget {
                    break 'outer;
                }
                searched += 1;
                let mut adv = sample_strategy(opts.seed, s, fault, schedule, n);
                let mut exec = Execution::new(protocol, fault, schedule, x, false)?;
                run_to_end(&mut exec, &mut adv, opts.max_rounds)?;
                if !final_verdict(protocol, x, &exec.outputs()).holds {
                    found = Some((x.clone(), adv.into_script()));
                    break 'outer;
                }
            }
        }
    }
    let Some((x, script)) = found else {
        return Ok(None);
    };
    let strategy = minimize(protocol, fault, schedule, &x, script, opts.max_rounds)?;
    let mut adv = strategy.clone();
    let trace = execute(protocol, &x, &mut adv, fault, schedule, opts.max_rounds)?;
    debug_assert!(!trace.verdict.holds);
    debug_assert!(trace.status == RunStatus::Completed || protocol.rounds().is_none());
    Ok(Some(Counterexample {
        violated_clauses: trace.verdict.violated_clauses.clone(),
        inputs: x,
        fault,
        schedule,
        strategy,
        trace,
        searched,
    }))
}
