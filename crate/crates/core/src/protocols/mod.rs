//! Synchronous protocol state machines.
//!
//! Every machine follows the same lockstep contract: in each engine round a
//! processor emits one message per recipient from its current state, the
//! engine (and the adversary) decide what is delivered, and the processor
//! folds the delivered row back into its state. A `None` entry in the
//! delivered row is an explicit "nothing arrived on this channel" mark.
//!
//! Composite protocols ([`StatCons`], [`Indulgent`]) embed other machines and
//! forward the engine round to them, so nested claims always carry global
//! round numbers.

use std::fmt;
use std::hash::Hash;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ProcessorId, RoundNumber, TaskVerdict, Value};

mod auth_ca;
mod graded;
mod indulgent;
mod madabsm;
mod omission_ca;
mod statcons;

pub use auth_ca::{proposal_values, AuthCa, AuthCaState};
pub use graded::{gc_threshold_met, wc_output, GcCa, GcState, WcRound, WcState};
pub use indulgent::{Indulgent, IndulgentStage, IndulgentState};
pub use madabsm::{Madabsm, MadabsmOutput, MadabsmState};
pub use omission_ca::{OmissionCa, OmissionCaState};
pub use statcons::{StatCons, StatConsState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("need at least 2 processors, got {0}")]
    TooFewProcessors(usize),
    #[error("budget t={t} must be below n={n}")]
    BudgetTooLarge { t: usize, n: usize },
    #[error("at most 64 processors are supported, got {0}")]
    TooManyProcessors(usize),
}

pub(crate) fn check_size(n: usize, t: usize) -> Result<(), ProtocolError> {
    if n < 2 {
        return Err(ProtocolError::TooFewProcessors(n));
    }
    if n > 64 {
        return Err(ProtocolError::TooManyProcessors(n));
    }
    if t >= n {
        return Err(ProtocolError::BudgetTooLarge { t, n });
    }
    Ok(())
}

/// The honest value space of one protocol round; the adversary's substitution
/// alphabet is built from it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RoundDomain {
    /// Each message is one of these values.
    Scalar(Vec<Value>),
    /// Each message is a vector of `n` claims whose contents range over these values.
    Claims(Vec<Value>),
}

impl RoundDomain {
    pub fn values(&self) -> &[Value] {
        match self {
            RoundDomain::Scalar(v) | RoundDomain::Claims(v) => v,
        }
    }

    pub fn carries_claims(&self) -> bool {
        matches!(self, RoundDomain::Claims(_))
    }
}

/// A deterministic per-processor synchronous state machine.
pub trait Protocol: Sync {
    type Input: Clone + fmt::Debug + Serialize + DeserializeOwned + Send + Sync;
    type State: Clone + Eq + Hash + fmt::Debug + Send + Sync;
    type Output: Clone + Eq + fmt::Debug + fmt::Display + Serialize + DeserializeOwned + Send + Sync;

    fn name(&self) -> String;
    fn n(&self) -> usize;
    /// Number of communication rounds, or `None` for machines that run until
    /// the engine stops them.
    fn rounds(&self) -> Option<usize>;
    /// Honest value space of the `step`-th round since the protocol started.
    fn domain(&self, step: usize) -> RoundDomain;
    fn init(&self, me: ProcessorId, input: &Self::Input) -> Self::State;
    /// Outgoing row for this round, one entry per recipient (self included).
    fn send(&self, state: &Self::State, round: RoundNumber) -> Vec<Value>;
    /// Consume the delivered row, indexed by sender.
    fn receive(&self, state: &mut Self::State, round: RoundNumber, incoming: &[Option<Value>]);
    fn output(&self, state: &Self::State) -> Option<Self::Output>;
    /// Evaluate the protocol's task relation.
    fn verdict(&self, inputs: &[Self::Input], outputs: &[Self::Output]) -> TaskVerdict;
    /// Names of per-execution properties that fail on these final states.
    fn audit(&self, _inputs: &[Self::Input], _states: &[Self::State]) -> Vec<&'static str> {
        Vec::new()
    }
}

/// Bit-input commit-adopt machines, usable inside the composite protocols.
pub trait CommitAdopt:
    Protocol<Input = crate::model::Bit, Output = crate::model::CAOutput> + Clone
{
}

impl<T> CommitAdopt for T where T: Protocol<Input = crate::model::Bit, Output = crate::model::CAOutput> + Clone {}

pub(crate) fn broadcast(n: usize, v: Value) -> Vec<Value> {
    vec![v; n]
}

/// Count `x` with `3 * x > 2 * n`.
pub(crate) fn more_than_two_thirds(count: usize, n: usize) -> bool {
    3 * count > 2 * n
}

/// Count `x` with `2 * x > n`.
pub(crate) fn more_than_half(count: usize, n: usize) -> bool {
    2 * count > n
}
