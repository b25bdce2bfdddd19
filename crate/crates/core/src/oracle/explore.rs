//! Exhaustive depth-first walk of the adversary decision tree for one input
//! vector.
//!
//! Nodes are memoized on [`ExecutionKey`]: two prefixes that leave every
//! machine, the corruption tracker and the claim-relevant ledger tail in the
//! same state have identical futures, so the subtree is explored once and its
//! tallies are reused with multiplicity. Leaf counts therefore equal the size
//! of the static behavior space.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::adversary::{CorruptionSchedule, ProcSet, RoundSpace, ScriptedStrategy};
use crate::engine::{EngineError, Execution, ExecutionKey, FaultType};
use crate::model::Clause;
use crate::protocols::Protocol;

/// Outcome of one complete execution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Leaf {
    pub violated: Vec<Clause>,
    pub properties: Vec<&'static str>,
}

impl Leaf {
    pub fn is_violation(&self) -> bool {
        !self.violated.is_empty()
    }
}

/// Aggregated tallies of a subtree.
#[derive(Clone, Debug, Default)]
pub struct Tally {
    pub executions: u128,
    pub violations: u128,
    pub clauses: BTreeMap<Clause, u128>,
    pub properties: BTreeMap<&'static str, u128>,
    /// Decision indices (one per remaining round) of the first violating leaf.
    pub first_violation: Option<Vec<u128>>,
    /// Decision indices of the first leaf failing a property.
    pub first_property_failure: Option<Vec<u128>>,
}

impl Tally {
    fn leaf(leaf: &Leaf) -> Self {
        let mut t = Tally { executions: 1, ..Tally::default() };
        if leaf.is_violation() {
            t.violations = 1;
            for c in &leaf.violated {
                t.clauses.insert(*c, 1);
            }
            t.first_violation = Some(Vec::new());
        }
        for p in &leaf.properties {
            t.properties.insert(p, 1);
        }
        if !leaf.properties.is_empty() {
            t.first_property_failure = Some(Vec::new());
        }
        t
    }

    fn absorb(&mut self, idx: u128, child: &Tally) {
        self.executions = self.executions.saturating_add(child.executions);
        self.violations = self.violations.saturating_add(child.violations);
        for (c, k) in &child.clauses {
            *self.clauses.entry(*c).or_default() += k;
        }
        for (p, k) in &child.properties {
            *self.properties.entry(p).or_default() += k;
        }
        if self.first_violation.is_none() {
            if let Some(path) = &child.first_violation {
                self.first_violation = Some(std::iter::once(idx).chain(path.iter().copied()).collect());
            }
        }
        if self.first_property_failure.is_none() {
            if let Some(path) = &child.first_property_failure {
                self.first_property_failure = Some(std::iter::once(idx).chain(path.iter().copied()).collect());
            }
        }
    }

    /// Merge a sibling tally whose executions come after this one's.
    pub fn merge(&mut self, other: &Tally) {
        self.executions = self.executions.saturating_add(other.executions);
        self.violations = self.violations.saturating_add(other.violations);
        for (c, k) in &other.clauses {
            *self.clauses.entry(*c).or_default() += k;
        }
        for (p, k) in &other.properties {
            *self.properties.entry(p).or_default() += k;
        }
    }
}

/// Per-round decision spaces for a schedule, restricted to the terminal set
/// once the schedule is fixed.
pub struct SpaceTable {
    base: Vec<RoundSpace>,
    first_fixed: Option<usize>,
    restricted: HashMap<(usize, ProcSet), RoundSpace>,
}

impl SpaceTable {
    pub fn new<P: Protocol>(protocol: &P, fault: FaultType, schedule: CorruptionSchedule, horizon: usize) -> Self {
        let n = protocol.n();
        let base = (0..horizon).map(|r| RoundSpace::new(&protocol.domain(r), fault, n, schedule.budget, None)).collect();
        SpaceTable { base, first_fixed: schedule.kind.first_fixed_round(), restricted: HashMap::new() }
    }

    pub fn horizon(&self) -> usize {
        self.base.len()
    }

    /// Decision space of `round`, given the terminal set chosen so far.
    pub fn space(&mut self, round: usize, terminal: ProcSet) -> &RoundSpace {
        match self.first_fixed {
            Some(f) if round > f => {
                let base = &self.base[round];
                self.restricted.entry((round, terminal)).or_insert_with(|| base.restricted(terminal))
            }
            _ => &self.base[round],
        }
    }

    /// Turn a decision path into a replayable script.
    pub fn script(&mut self, path: &[u128]) -> ScriptedStrategy {
        let mut terminal = ProcSet::EMPTY;
        let mut rounds = Vec::with_capacity(path.len());
        for (r, &idx) in path.iter().enumerate() {
            let script = self.space(r, terminal).get(idx);
            if self.first_fixed == Some(r) {
                terminal = script.corrupted;
            }
            rounds.push(script);
        }
        ScriptedStrategy::new(rounds)
    }
}

type LeafFn<'a, P> = dyn Fn(&Execution<'_, P>) -> Leaf + Sync + 'a;

/// Memoized explorer for one input vector.
pub struct Explorer<'a, P: Protocol> {
    spaces: SpaceTable,
    leaf: &'a LeafFn<'a, P>,
    memo: HashMap<ExecutionKey<P::State>, Arc<Tally>>,
}

impl<'a, P: Protocol> Explorer<'a, P> {
    pub fn new(spaces: SpaceTable, leaf: &'a LeafFn<'a, P>) -> Self {
        Explorer { spaces, leaf, memo: HashMap::new() }
    }

    pub fn distinct_states(&self) -> usize {
        self.memo.len()
    }

    pub fn spaces(&mut self) -> &mut SpaceTable {
        &mut self.spaces
    }

    pub fn explore(&mut self, exec: &Execution<'_, P>) -> Result<Arc<Tally>, EngineError> {
        let round = exec.round().0;
        if round >= self.spaces.horizon() {
            return Ok(Arc::new(Tally::leaf(&(self.leaf)(exec))));
        }
        let key = exec.key();
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        let intended = exec.intended()?;
        let domain = exec.domain();
        let space = self.spaces.space(round, exec.terminal_set()).clone();
        let mut tally = Tally::default();
        for idx in 0..space.count() {
            let decision = space.get(idx).instantiate(&intended, &domain);
            let mut child = exec.clone();
            child.apply(&decision, intended.clone())?;
            let sub = self.explore(&child)?;
            tally.absorb(idx, &sub);
        }
        let tally = Arc::new(tally);
        self.memo.insert(key, tally.clone());
        Ok(tally)
    }
}
