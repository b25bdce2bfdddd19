//! Bounded exhaustive enumeration of adversary behaviors.
//!
//! A behavior is one [`RoundScript`] per round. Per round the enumeration
//! walks corruption sets in lexicographic order and, inside a set, every
//! assignment of per-edge templates (edges ordered by sender, then
//! recipient; the first edge is the most significant digit). Self-edges are
//! never tampered with and are not enumerated.

use std::sync::Arc;

use thiserror::Error;

use crate::engine::FaultType;
use crate::model::Value;
use crate::protocols::RoundDomain;

use super::action::{ActionTemplate, RoundScript, ScriptedEdge};
use super::schedule::{CorruptionSchedule, ProcSet};
use super::strategy::ScriptedStrategy;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("adversary search space has {size} behaviors, above the cap of {cap}")]
pub struct SearchSpaceTooLarge {
    pub size: u128,
    pub cap: u128,
}

/// Per-edge template alphabet for one round, in enumeration order:
/// `Deliver < Drop < Alternative(k) < Edit(..) < Literal(garbage)`.
///
/// Claim-vector rounds get `Edit`s instead of `Alternative`s. Under the
/// authenticated type at most `t` entries are edited at once: an entry may
/// only carry new content if its claimed sender was corrupted in the claimed
/// round, and at most `t` senders were.
pub fn edge_actions(domain: &RoundDomain, fault: FaultType, n: usize, t: usize) -> Vec<ActionTemplate> {
    let mut out = vec![ActionTemplate::Deliver, ActionTemplate::Drop];
    if fault == FaultType::Omission {
        return out;
    }
    let alts = domain.values().len().saturating_sub(1);
    match domain {
        RoundDomain::Scalar(_) => out.extend((0..alts).map(ActionTemplate::Alternative)),
        RoundDomain::Claims(_) => {
            let max_entries = if fault == FaultType::AuthByzantine { t.min(n) } else { n };
            if alts > 0 {
                for size in 1..=max_entries {
                    for subset in ProcSet::all_up_to(n, size).into_iter().filter(|s| s.len() == size) {
                        let entries: Vec<usize> = subset.iter().collect();
                        for code in 0..alts.pow(size as u32) {
                            let mut rest = code;
                            let mut edit = vec![(0, 0); size];
                            for (slot, &entry) in edit.iter_mut().zip(&entries).rev() {
                                *slot = (entry, rest % alts);
                                rest /= alts;
                            }
                            out.push(ActionTemplate::Edit(edit));
                        }
                    }
                }
            }
        }
    }
    out.push(ActionTemplate::Literal(Value::garbage()));
    out
}

fn pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}

/// All decisions of one round, indexable in enumeration order.
#[derive(Clone, Debug)]
pub struct RoundSpace {
    n: usize,
    sets: Vec<ProcSet>,
    /// `offsets[k]` = index of the first decision using `sets[k]`.
    offsets: Vec<u128>,
    total: u128,
    templates: Arc<Vec<ActionTemplate>>,
}

impl RoundSpace {
    /// `fixed = Some(b)` restricts the round to the single corruption set `b`.
    pub fn new(domain: &RoundDomain, fault: FaultType, n: usize, t: usize, fixed: Option<ProcSet>) -> Self {
        let templates = Arc::new(edge_actions(domain, fault, n, t));
        let sets = match fixed {
            Some(b) => vec![b],
            None => ProcSet::all_up_to(n, t),
        };
        Self::from_parts(n, sets, templates)
    }

    fn from_parts(n: usize, sets: Vec<ProcSet>, templates: Arc<Vec<ActionTemplate>>) -> Self {
        let a = templates.len() as u128;
        let mut offsets = Vec::with_capacity(sets.len());
        let mut total: u128 = 0;
        for s in &sets {
            offsets.push(total);
            total = total.saturating_add(pow(a, s.len() * (n - 1)));
        }
        RoundSpace { n, sets, offsets, total, templates }
    }

    pub fn restricted(&self, b: ProcSet) -> Self {
        Self::from_parts(self.n, vec![b], self.templates.clone())
    }

    pub fn count(&self) -> u128 {
        self.total
    }

    pub fn templates(&self) -> &[ActionTemplate] {
        &self.templates
    }

    pub fn set_of(&self, idx: u128) -> ProcSet {
        let k = self.offsets.partition_point(|&o| o <= idx) - 1;
        self.sets[k]
    }

    pub fn get(&self, idx: u128) -> RoundScript {
        assert!(idx < self.total, "decision index {idx} out of range");
        let k = self.offsets.partition_point(|&o| o <= idx) - 1;
        let set = self.sets[k];
        let mut rest = idx - self.offsets[k];
        let a = self.templates.len() as u128;
        let edges: Vec<(usize, usize)> =
            set.iter().flat_map(|i| (0..self.n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let mut digits = vec![0usize; edges.len()];
        for d in digits.iter_mut().rev() {
            *d = (rest % a) as usize;
            rest /= a;
        }
        let actions = edges
            .into_iter()
            .zip(digits)
            .filter(|&(_, d)| d != 0)
            .map(|((from, to), d)| ScriptedEdge { from, to, action: self.templates[d].clone() })
            .collect();
        RoundScript { corrupted: set, actions }
    }
}

/// Number of behaviors over rounds whose value domains are `domains`.
pub fn space_size(n: usize, t: usize, fault: FaultType, schedule: CorruptionSchedule, domains: &[RoundDomain]) -> u128 {
    let per_edge: Vec<u128> = domains.iter().map(|d| edge_actions(d, fault, n, t).len() as u128).collect();
    let first_fixed = schedule.kind.first_fixed_round().unwrap_or(usize::MAX).min(domains.len());
    let sets = ProcSet::all_up_to(n, t);
    let mut total: u128 = 1;
    for &a in &per_edge[..first_fixed] {
        let round: u128 = sets.iter().fold(0u128, |acc, s| acc.saturating_add(pow(a, s.len() * (n - 1))));
        total = total.saturating_mul(round);
    }
    if first_fixed < domains.len() {
        let tail: u128 = sets.iter().fold(0u128, |acc, s| {
            let path = per_edge[first_fixed..].iter().fold(1u128, |p, &a| p.saturating_mul(pow(a, s.len() * (n - 1))));
            acc.saturating_add(path)
        });
        total = total.saturating_mul(tail);
    }
    total
}

/// Odometer over every behavior, in enumeration order.
pub struct AdversaryEnumeration {
    base: Vec<RoundSpace>,
    spaces: Vec<RoundSpace>,
    first_fixed: usize,
    digits: Vec<u128>,
    size: u128,
    done: bool,
}

impl AdversaryEnumeration {
    pub fn size(&self) -> u128 {
        self.size
    }

    fn rebuild_tail(&mut self) {
        if self.first_fixed < self.base.len() {
            let b = self.spaces[self.first_fixed].set_of(self.digits[self.first_fixed]);
            for r in self.first_fixed + 1..self.base.len() {
                self.spaces[r] = self.base[r].restricted(b);
            }
        }
    }
}

impl Iterator for AdversaryEnumeration {
    type Item = ScriptedStrategy;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = ScriptedStrategy::new(self.spaces.iter().zip(&self.digits).map(|(s, &d)| s.get(d)).collect());
        let mut r = self.digits.len();
        loop {
            if r == 0 {
                self.done = true;
                break;
            }
            r -= 1;
            self.digits[r] += 1;
            if self.digits[r] < self.spaces[r].count() {
                if r <= self.first_fixed {
                    self.rebuild_tail();
                }
                break;
            }
            self.digits[r] = 0;
        }
        Some(item)
    }
}

/// Every behavior of a `t`-bounded adversary over the given rounds, or
/// [`SearchSpaceTooLarge`] when the space exceeds `cap`.
pub fn enumerate_adversaries(
    n: usize,
    t: usize,
    fault: FaultType,
    schedule: CorruptionSchedule,
    domains: &[RoundDomain],
    cap: u128,
) -> Result<AdversaryEnumeration, SearchSpaceTooLarge> {
    let size = space_size(n, t, fault, schedule, domains);
    if size > cap {
        return Err(SearchSpaceTooLarge { size, cap });
    }
    let first_fixed = schedule.kind.first_fixed_round().unwrap_or(usize::MAX).min(domains.len());
    let base: Vec<RoundSpace> = domains.iter().map(|d| RoundSpace::new(d, fault, n, t, None)).collect();
    let mut e = AdversaryEnumeration {
        spaces: base.clone(),
        base,
        first_fixed,
        digits: vec![0; domains.len()],
        size,
        done: false,
    };
    e.rebuild_tail();
    Ok(e)
}
