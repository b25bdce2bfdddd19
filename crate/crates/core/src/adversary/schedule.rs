use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ProcessorId, RoundNumber};

/// A set of processors, `n <= 64`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcSet(u64);

impl ProcSet {
    pub const EMPTY: ProcSet = ProcSet(0);

    pub fn from_bits(bits: u64) -> Self {
        ProcSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, p: usize) -> bool {
        p < 64 && self.0 >> p & 1 == 1
    }

    pub fn insert(&mut self, p: usize) {
        assert!(p < 64, "processor index {p} out of range");
        self.0 |= 1 << p;
    }

    pub fn with(mut self, p: usize) -> Self {
        self.insert(p);
        self
    }

    pub fn union(self, other: ProcSet) -> ProcSet {
        ProcSet(self.0 | other.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    /// Highest member plus one; 0 for the empty set.
    pub fn span(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    /// All subsets of `[0, n)` with at most `t` members, in lexicographic order
    /// of their sorted member lists (the empty set first).
    pub fn all_up_to(n: usize, t: usize) -> Vec<ProcSet> {
        fn rec(start: usize, n: usize, left: usize, cur: ProcSet, out: &mut Vec<ProcSet>) {
            out.push(cur);
            if left == 0 {
                return;
            }
            for i in start..n {
                rec(i + 1, n, left - 1, cur.with(i), out);
            }
        }
        let mut out = Vec::new();
        rec(0, n, t, ProcSet::EMPTY, &mut out);
        out
    }
}

impl FromIterator<usize> for ProcSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = ProcSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Debug for ProcSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for ProcSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ProcSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(d)?;
        if let Some(&bad) = members.iter().find(|&&p| p >= 64) {
            return Err(serde::de::Error::custom(format!("processor index {bad} out of range")));
        }
        Ok(members.into_iter().collect())
    }
}

/// When the adversary may move its corruptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// At most `t` processors over the whole execution.
    Stationary,
    /// At most `t` processors per round, freely re-chosen every round.
    Mobile,
    /// Mobile up to and including `stabilization_round`, then confined to one
    /// set of at most `t` processors.
    EventuallyStationary { stabilization_round: usize },
}

impl ScheduleKind {
    /// True if the corruption set chosen for `round` is pinned to the terminal set.
    pub fn is_fixed_at(self, round: RoundNumber) -> bool {
        match self {
            ScheduleKind::Stationary => true,
            ScheduleKind::Mobile => false,
            ScheduleKind::EventuallyStationary { stabilization_round } => round.0 > stabilization_round,
        }
    }

    /// First round whose corruption set belongs to the terminal set, if any.
    pub fn first_fixed_round(self) -> Option<usize> {
        match self {
            ScheduleKind::Stationary => Some(0),
            ScheduleKind::Mobile => None,
            ScheduleKind::EventuallyStationary { stabilization_round } => Some(stabilization_round + 1),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Stationary => write!(f, "stationary"),
            ScheduleKind::Mobile => write!(f, "mobile"),
            ScheduleKind::EventuallyStationary { stabilization_round } => {
                write!(f, "eventually-stationary({stabilization_round})")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSchedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    pub budget: usize,
}

impl CorruptionSchedule {
    pub fn new(kind: ScheduleKind, budget: usize) -> Self {
        CorruptionSchedule { kind, budget }
    }

    pub fn mobile(budget: usize) -> Self {
        Self::new(ScheduleKind::Mobile, budget)
    }

    pub fn stationary(budget: usize) -> Self {
        Self::new(ScheduleKind::Stationary, budget)
    }

    pub fn eventually_stationary(stabilization_round: usize, budget: usize) -> Self {
        Self::new(ScheduleKind::EventuallyStationary { stabilization_round }, budget)
    }
}

/// Tracks the corruption sets chosen so far and checks each new one against
/// the schedule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScheduleTracker {
    schedule: CorruptionSchedule,
    n: usize,
    /// Union of all sets chosen in rounds where the schedule is fixed.
    terminal: ProcSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleViolation {
    pub round: RoundNumber,
    pub detail: String,
}

impl ScheduleTracker {
    pub fn new(schedule: CorruptionSchedule, n: usize) -> Self {
        ScheduleTracker { schedule, n, terminal: ProcSet::EMPTY }
    }

    pub fn schedule(&self) -> CorruptionSchedule {
        self.schedule
    }

    /// The set the adversary is confined to from here on (empty before stabilization).
    pub fn terminal(&self) -> ProcSet {
        self.terminal
    }

    pub fn admit(&mut self, round: RoundNumber, set: ProcSet) -> Result<(), ScheduleViolation> {
        let fail = |detail: String| Err(ScheduleViolation { round, detail });
        if set.span() > self.n {
            return fail(format!("corruption set {set:?} names processors outside [0, {})", self.n));
        }
        if set.len() > self.schedule.budget {
            return fail(format!("corruption set {set:?} exceeds budget t={}", self.schedule.budget));
        }
        if self.schedule.kind.is_fixed_at(round) {
            let union = self.terminal.union(set);
            if union.len() > self.schedule.budget {
                return fail(format!(
                    "{} schedule would corrupt {:?} in total, more than t={}",
                    self.schedule.kind, union, self.schedule.budget
                ));
            }
            self.terminal = union;
        }
        Ok(())
    }
}

pub fn describe(set: ProcSet) -> String {
    let ids: Vec<String> = set.iter().map(|p| ProcessorId(p).to_string()).collect();
    format!("{{{}}}", ids.join(","))
}
