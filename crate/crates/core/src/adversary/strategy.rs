use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::engine::{FaultType, ProvenanceLedger};
use crate::model::{RoundNumber, Value};
use crate::protocols::RoundDomain;

use super::action::{ActionTemplate, Decision, RoundScript, ScriptedEdge, TamperAction};
use super::enumerate::edge_actions;
use super::schedule::{CorruptionSchedule, ProcSet};

/// Everything the (rushing, full-information) adversary sees in one round.
pub struct RoundView<'a> {
    pub round: RoundNumber,
    pub n: usize,
    pub fault: FaultType,
    pub schedule: CorruptionSchedule,
    /// `intended[sender][recipient]` for the current round.
    pub intended: &'a [Vec<Value>],
    pub ledger: &'a ProvenanceLedger,
    pub domain: &'a RoundDomain,
}

pub trait AdversaryStrategy {
    fn decide(&mut self, view: &RoundView<'_>) -> Decision;

    /// JSON description for trace headers.
    fn describe(&self) -> serde_json::Value;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("omission adversaries cannot substitute values, but the alphabet lists {0}")]
    AlphabetForbidden(String),
    #[error("byzantine adversaries need a non-empty substitution alphabet")]
    EmptyAlphabet,
    #[error("budget t={t} must be below n={n}")]
    Budget { t: usize, n: usize },
}

/// Never corrupts anyone.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAdversary;

pub fn strategy_none() -> NoAdversary {
    NoAdversary
}

impl AdversaryStrategy for NoAdversary {
    fn decide(&mut self, _view: &RoundView<'_>) -> Decision {
        Decision::none()
    }

    fn describe(&self) -> serde_json::Value {
        json!({"kind": "none"})
    }
}

/// Corrupts `p0..p(t-1)` in every round and drops all their outgoing messages.
#[derive(Clone, Copy, Debug)]
pub struct Silence {
    pub t: usize,
}

impl AdversaryStrategy for Silence {
    fn decide(&mut self, view: &RoundView<'_>) -> Decision {
        let corrupted: ProcSet = (0..self.t.min(view.n)).collect();
        let actions = corrupted
            .iter()
            .flat_map(|i| (0..view.n).filter(move |&j| j != i).map(move |j| (i, j, TamperAction::Drop)))
            .collect();
        Decision { corrupted, actions }
    }

    fn describe(&self) -> serde_json::Value {
        json!({"kind": "silence"})
    }
}

/// Replays a fixed per-round script; rounds past the script are left alone.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedStrategy {
    pub rounds: Vec<RoundScript>,
}

impl ScriptedStrategy {
    pub fn new(rounds: Vec<RoundScript>) -> Self {
        ScriptedStrategy { rounds }
    }

    pub fn tamper_count(&self) -> usize {
        self.rounds.iter().map(RoundScript::tamper_count).sum()
    }

    /// All `(round, edge index)` positions holding a non-deliver template.
    pub fn tamper_positions(&self) -> Vec<(usize, usize)> {
        self.rounds
            .iter()
            .enumerate()
            .flat_map(|(r, s)| s.actions.iter().enumerate().filter(|(_, e)| !e.action.is_deliver()).map(move |(k, _)| (r, k)))
            .collect()
    }

    /// A copy with the template at `pos` reverted to `Deliver`.
    pub fn with_delivered(&self, pos: (usize, usize)) -> Self {
        let mut out = self.clone();
        out.rounds[pos.0].actions[pos.1].action = ActionTemplate::Deliver;
        out.rounds[pos.0].actions.retain(|e| !e.action.is_deliver());
        out
    }
}

impl AdversaryStrategy for ScriptedStrategy {
    fn decide(&mut self, view: &RoundView<'_>) -> Decision {
        match self.rounds.get(view.round.0) {
            Some(script) => script.instantiate(view.intended, view.domain),
            None => Decision::none(),
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({"kind": "scripted", "rounds": self.rounds})
    }
}

/// Seeded random adversary.
///
/// Each round it picks a legal corruption set uniformly (mobile rounds: among
/// all sets of size at most `t`; fixed rounds: the terminal set, drawn once
/// among the sets of size exactly `t`) and then, per corrupted outgoing edge,
/// a template uniformly from the fault type's action space plus any extra
/// literals.
#[derive(Clone, Debug)]
pub struct RandomStrategy {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    fault: FaultType,
    schedule: CorruptionSchedule,
    n: usize,
    extra: Vec<Value>,
    terminal: Option<ProcSet>,
    log: Vec<RoundScript>,
    /// Template alphabets per round domain seen so far.
    cache: Vec<(RoundDomain, Vec<ActionTemplate>)>,
    sets: Vec<ProcSet>,
}

pub fn strategy_random(
    seed: u64,
    fault: FaultType,
    schedule: CorruptionSchedule,
    n: usize,
    alphabet: Vec<Value>,
) -> Result<RandomStrategy, AdversaryError> {
    RandomStrategy::new(seed, 0, fault, schedule, n, alphabet)
}

impl RandomStrategy {
    pub fn new(
        seed: u64,
        stream: u64,
        fault: FaultType,
        schedule: CorruptionSchedule,
        n: usize,
        alphabet: Vec<Value>,
    ) -> Result<Self, AdversaryError> {
        if schedule.budget >= n {
            return Err(AdversaryError::Budget { t: schedule.budget, n });
        }
        match fault {
            FaultType::Omission => {
                if let Some(v) = alphabet.first() {
                    return Err(AdversaryError::AlphabetForbidden(v.to_string()));
                }
            }
            FaultType::Byzantine | FaultType::AuthByzantine => {
                if alphabet.is_empty() {
                    return Err(AdversaryError::EmptyAlphabet);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(RandomStrategy {
            seed,
            stream,
            rng,
            fault,
            schedule,
            n,
            extra: alphabet,
            terminal: None,
            log: Vec::new(),
            cache: Vec::new(),
            sets: ProcSet::all_up_to(n, schedule.budget),
        })
    }

    /// Alphabet used when none is given: nothing for omission, the canonical
    /// garbage value otherwise.
    pub fn default_alphabet(fault: FaultType) -> Vec<Value> {
        match fault {
            FaultType::Omission => Vec::new(),
            _ => vec![Value::garbage()],
        }
    }

    /// The decisions taken so far, as a replayable script.
    pub fn into_script(self) -> super::ScriptedStrategy {
        ScriptedStrategy::new(self.log)
    }

    pub fn script(&self) -> &[RoundScript] {
        &self.log
    }

    fn templates(&mut self, domain: &RoundDomain) -> usize {
        if let Some(i) = self.cache.iter().position(|(d, _)| d == domain) {
            return i;
        }
        let mut acts = edge_actions(domain, self.fault, self.n, self.schedule.budget);
        for v in &self.extra {
            let lit = ActionTemplate::Literal(v.clone());
            if !acts.contains(&lit) {
                acts.push(lit);
            }
        }
        self.cache.push((domain.clone(), acts));
        self.cache.len() - 1
    }

    fn pick_set(&mut self, round: RoundNumber) -> ProcSet {
        let t = self.schedule.budget;
        if self.schedule.kind.is_fixed_at(round) {
            if let Some(b) = self.terminal {
                return b;
            }
            let full: Vec<ProcSet> = self.sets.iter().copied().filter(|s| s.len() == t).collect();
            let b = full[self.rng.random_range(0..full.len())];
            self.terminal = Some(b);
            b
        } else {
            self.sets[self.rng.random_range(0..self.sets.len())]
        }
    }
}

impl AdversaryStrategy for RandomStrategy {
    fn decide(&mut self, view: &RoundView<'_>) -> Decision {
        let corrupted = self.pick_set(view.round);
        let n = self.n;
        let mut actions = Vec::new();
        let slot = self.templates(view.domain);
        let len = self.cache[slot].1.len();
        for from in corrupted.iter() {
            for to in (0..n).filter(|&j| j != from) {
                let k = self.rng.random_range(0..len);
                let action = self.cache[slot].1[k].clone();
                if !action.is_deliver() {
                    actions.push(ScriptedEdge { from, to, action });
                }
            }
        }
        let script = RoundScript { corrupted, actions };
        let decision = script.instantiate(view.intended, view.domain);
        self.log.push(script);
        decision
    }

    fn describe(&self) -> serde_json::Value {
        json!({"kind": "random", "seed": self.seed, "stream": self.stream, "extra": self.extra})
    }
}

/// Serializable description of a concrete strategy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    None,
    Silence,
    Random {
        seed: u64,
        #[serde(default)]
        stream: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extra: Option<Vec<Value>>,
    },
    Scripted { rounds: Vec<RoundScript> },
}

impl StrategySpec {
    pub fn build(&self, fault: FaultType, schedule: CorruptionSchedule, n: usize) -> Result<Box<dyn AdversaryStrategy>, AdversaryError> {
        Ok(match self {
            StrategySpec::None => Box::new(NoAdversary),
            StrategySpec::Silence => Box::new(Silence { t: schedule.budget }),
            StrategySpec::Random { seed, stream, extra } => {
                let alphabet = extra.clone().unwrap_or_else(|| RandomStrategy::default_alphabet(fault));
                Box::new(RandomStrategy::new(*seed, *stream, fault, schedule, n, alphabet)?)
            }
            StrategySpec::Scripted { rounds } => Box::new(ScriptedStrategy::new(rounds.clone())),
        })
    }
}
