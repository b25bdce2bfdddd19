use serde::{Deserialize, Serialize};

use crate::model::Value;
use crate::protocols::RoundDomain;

use super::schedule::ProcSet;

/// What the engine does with one corrupted outgoing edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperAction {
    Deliver,
    Drop,
    Replace(Value),
}

/// One concrete per-round adversary decision, as handed to the engine.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Decision {
    pub corrupted: ProcSet,
    /// `(sender, recipient, action)`; edges not listed are delivered.
    pub actions: Vec<(usize, usize, TamperAction)>,
}

impl Decision {
    pub fn none() -> Self {
        Decision::default()
    }
}

/// A per-edge action expressed relative to what the sender intended to send.
///
/// The adversary is rushing and sees the intended matrix before acting, so a
/// template is a legal adversary choice; instantiating it against a round's
/// intended message yields a [`TamperAction`]. Templates keep enumerated
/// behaviors distinct: `Alternative(k)` never re-sends the intended value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionTemplate {
    Deliver,
    Drop,
    /// Replace a scalar with the `k`-th domain value that differs from the intended one.
    Alternative(usize),
    /// In a claim vector, overwrite the content of claim `entry` with the
    /// `k`-th domain value that differs from its current content.
    Edit(Vec<(usize, usize)>),
    /// Replace with a fixed value.
    Literal(Value),
}

impl ActionTemplate {
    pub fn is_deliver(&self) -> bool {
        matches!(self, ActionTemplate::Deliver)
    }

    pub fn instantiate(&self, intended: &Value, domain: &RoundDomain) -> TamperAction {
        match self {
            ActionTemplate::Deliver => TamperAction::Deliver,
            ActionTemplate::Drop => TamperAction::Drop,
            ActionTemplate::Literal(v) => TamperAction::Replace(v.clone()),
            ActionTemplate::Alternative(k) => match domain.values().iter().filter(|v| *v != intended).nth(*k) {
                Some(v) => TamperAction::Replace(v.clone()),
                None => TamperAction::Deliver,
            },
            ActionTemplate::Edit(entries) => {
                let Value::Vector(items) = intended else {
                    return TamperAction::Deliver;
                };
                let mut items = items.clone();
                for &(entry, k) in entries {
                    let Some(Value::Claim(msg)) = items.get_mut(entry) else {
                        return TamperAction::Deliver;
                    };
                    let Some(v) = domain.values().iter().filter(|v| **v != msg.content).nth(k) else {
                        return TamperAction::Deliver;
                    };
                    std::sync::Arc::make_mut(msg).content = v.clone();
                }
                TamperAction::Replace(Value::Vector(items))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScriptedEdge {
    pub from: usize,
    pub to: usize,
    pub action: ActionTemplate,
}

/// One round of a scripted adversary: a corruption set plus the non-deliver
/// edge templates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoundScript {
    pub corrupted: ProcSet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ScriptedEdge>,
}

impl RoundScript {
    pub fn instantiate(&self, intended: &[Vec<Value>], domain: &RoundDomain) -> Decision {
        let actions = self
            .actions
            .iter()
            .filter(|e| !e.action.is_deliver())
            .map(|e| {
                let action = match intended.get(e.from).and_then(|row| row.get(e.to)) {
                    Some(v) => e.action.instantiate(v, domain),
                    None => TamperAction::Deliver,
                };
                (e.from, e.to, action)
            })
            .collect();
        Decision { corrupted: self.corrupted, actions }
    }

    /// Number of edges whose template is something other than `Deliver`.
    pub fn tamper_count(&self) -> usize {
        self.actions.iter().filter(|e| !e.action.is_deliver()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bit, ProcessorId, RoundNumber};

    #[test]
    fn alternative_skips_intended_value() {
        let dom = RoundDomain::Scalar(vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One), Value::Bot]);
        let a0 = ActionTemplate::Alternative(0).instantiate(&Value::Bit(Bit::Zero), &dom);
        let a1 = ActionTemplate::Alternative(1).instantiate(&Value::Bit(Bit::Zero), &dom);
        assert_eq!(a0, TamperAction::Replace(Value::Bit(Bit::One)));
        assert_eq!(a1, TamperAction::Replace(Value::Bot));
        assert_eq!(ActionTemplate::Alternative(2).instantiate(&Value::Bit(Bit::Zero), &dom), TamperAction::Deliver);
    }

    #[test]
    fn edit_rewrites_claim_contents() {
        let dom = RoundDomain::Claims(vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One)]);
        let v = Value::Vector(
            (0..3).map(|l| Value::claim(ProcessorId(l), RoundNumber(0), Value::Bit(Bit::Zero))).collect(),
        );
        let TamperAction::Replace(Value::Vector(out)) = ActionTemplate::Edit(vec![(1, 0)]).instantiate(&v, &dom) else {
            panic!("expected replacement");
        };
        assert_eq!(out[1], Value::claim(ProcessorId(1), RoundNumber(0), Value::Bit(Bit::One)));
        assert_eq!(out[0], Value::claim(ProcessorId(0), RoundNumber(0), Value::Bit(Bit::Zero)));
        assert_eq!(ActionTemplate::Edit(vec![(0, 0)]).instantiate(&Value::Bot, &dom), TamperAction::Deliver);
    }
}
