//! Corruption schedules, tamper actions, concrete strategies and the bounded
//! enumerator of adversary behaviors.

mod action;
mod enumerate;
mod schedule;
mod strategy;

pub use action::{ActionTemplate, Decision, RoundScript, ScriptedEdge, TamperAction};
pub use enumerate::{edge_actions, enumerate_adversaries, space_size, AdversaryEnumeration, RoundSpace, SearchSpaceTooLarge};
pub use schedule::{describe, CorruptionSchedule, ProcSet, ScheduleKind, ScheduleTracker, ScheduleViolation};
pub use strategy::{
    strategy_none, strategy_random, AdversaryError, AdversaryStrategy, NoAdversary, RandomStrategy, RoundView,
    ScriptedStrategy, Silence, StrategySpec,
};
