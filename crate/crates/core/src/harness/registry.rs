//! Config -> concrete protocol dispatch.

use crate::engine::FaultType;
use crate::model::{Bit, Value};
use crate::protocols::{AuthCa, CommitAdopt, GcCa, Indulgent, Madabsm, OmissionCa, Protocol, ProtocolError, StatCons, WcRound};

use super::config::ProtocolId;

/// Work to do with one concrete protocol. `inputs` are the config's bit
/// vectors converted to the protocol's input type, in the same order.
pub trait ProtocolVisitor {
    type Out;
    fn visit<P: Protocol>(self, protocol: &P, inputs: Vec<Vec<P::Input>>) -> Self::Out;
}

fn convert<I, F: Fn(Bit) -> I>(bits: &[Vec<Bit>], f: F) -> Vec<Vec<I>> {
    bits.iter().map(|x| x.iter().map(|&b| f(b)).collect()).collect()
}

fn composite<C: CommitAdopt, V: ProtocolVisitor>(outer: ProtocolId, ca: C, bits: &[Vec<Bit>], v: V) -> V::Out {
    let inputs = convert(bits, |b| b);
    match outer {
        ProtocolId::Statcons => v.visit(&StatCons::new(ca), inputs),
        ProtocolId::Indulgent => v.visit(&Indulgent::new(ca), inputs),
        _ => unreachable!("only composites wrap a commit-adopt machine"),
    }
}

/// Build the protocol named by `protocol` (and `inner` for the composites)
/// and hand it to `v`.
pub fn dispatch<V: ProtocolVisitor>(
    protocol: ProtocolId,
    inner: Option<ProtocolId>,
    n: usize,
    t: usize,
    bits: &[Vec<Bit>],
    v: V,
) -> Result<V::Out, ProtocolError> {
    let same = |b: Bit| b;
    Ok(match protocol {
        ProtocolId::OmissionCa => v.visit(&OmissionCa::new(n, t)?, convert(bits, same)),
        ProtocolId::Wc => v.visit(&WcRound::new(n, t)?, convert(bits, same)),
        ProtocolId::GcCa => v.visit(&GcCa::new(n, t)?, convert(bits, same)),
        ProtocolId::AuthCa => v.visit(&AuthCa::new(n, t)?, convert(bits, same)),
        ProtocolId::Madabsm => {
            let domain = vec![Value::Bit(Bit::Zero), Value::Bit(Bit::One)];
            v.visit(&Madabsm::new(n, t, domain)?, convert(bits, Value::Bit))
        }
        ProtocolId::Statcons | ProtocolId::Indulgent => match inner.expect("validated configs name an inner protocol") {
            ProtocolId::OmissionCa => composite(protocol, OmissionCa::new(n, t)?, bits, v),
            ProtocolId::GcCa => composite(protocol, GcCa::new(n, t)?, bits, v),
            ProtocolId::AuthCa => composite(protocol, AuthCa::new(n, t)?, bits, v),
            other => unreachable!("{other} is not a commit-adopt machine"),
        },
    })
}

/// Where `t` sits relative to the protocol's resilience bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundRelation {
    BelowBound,
    AtBound,
    AboveBound,
}

impl BoundRelation {
    /// Omission tolerates any `t < n`, Byzantine `t < n/3`, authenticated
    /// Byzantine `t < n/2`. "At" is the smallest `t` past the bound.
    pub fn of(fault: FaultType, n: usize, t: usize) -> Self {
        let first_bad = match fault {
            FaultType::Omission => n,
            FaultType::Byzantine => n.div_ceil(3),
            FaultType::AuthByzantine => n.div_ceil(2),
        };
        match t.cmp(&first_bad) {
            std::cmp::Ordering::Less => BoundRelation::BelowBound,
            std::cmp::Ordering::Equal => BoundRelation::AtBound,
            std::cmp::Ordering::Greater => BoundRelation::AboveBound,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundRelation::BelowBound => "below-bound",
            BoundRelation::AtBound => "at-bound",
            BoundRelation::AboveBound => "above-bound",
        }
    }
}

/// Parse a protocol name as written in trace headers, e.g. `statcons(gc_ca)`.
pub fn parse_protocol_name(name: &str) -> Option<(ProtocolId, Option<ProtocolId>)> {
    let base = |s: &str| {
        [ProtocolId::OmissionCa, ProtocolId::Wc, ProtocolId::GcCa, ProtocolId::Madabsm, ProtocolId::AuthCa]
            .into_iter()
            .find(|p| p.as_str() == s)
    };
    if let Some(p) = base(name) {
        return Some((p, None));
    }
    for outer in [ProtocolId::Statcons, ProtocolId::Indulgent] {
        if let Some(rest) = name.strip_prefix(outer.as_str()).and_then(|r| r.strip_prefix('(')).and_then(|r| r.strip_suffix(')')) {
            return Some((outer, Some(base(rest)?)));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Name;
    impl ProtocolVisitor for Name {
        type Out = (String, usize);
        fn visit<P: Protocol>(self, protocol: &P, inputs: Vec<Vec<P::Input>>) -> (String, usize) {
            (protocol.name(), inputs.len())
        }
    }

    #[test]
    fn dispatch_builds_named_protocol() {
        let bits = vec![vec![Bit::One; 4]];
        let (name, k) = dispatch(ProtocolId::Statcons, Some(ProtocolId::GcCa), 4, 1, &bits, Name).unwrap();
        assert_eq!((name.as_str(), k), ("statcons(gc_ca)", 1));
        assert_eq!(parse_protocol_name(&name), Some((ProtocolId::Statcons, Some(ProtocolId::GcCa))));
        assert_eq!(parse_protocol_name("madabsm"), Some((ProtocolId::Madabsm, None)));
        assert_eq!(parse_protocol_name("statcons(wcc)"), None);
    }

    #[test]
    fn bound_relations() {
        assert_eq!(BoundRelation::of(FaultType::Byzantine, 4, 1), BoundRelation::BelowBound);
        assert_eq!(BoundRelation::of(FaultType::Byzantine, 3, 1), BoundRelation::AtBound);
        assert_eq!(BoundRelation::of(FaultType::AuthByzantine, 5, 2), BoundRelation::BelowBound);
        assert_eq!(BoundRelation::of(FaultType::AuthByzantine, 5, 3), BoundRelation::AtBound);
        assert_eq!(BoundRelation::of(FaultType::AuthByzantine, 5, 4), BoundRelation::AboveBound);
        assert_eq!(BoundRelation::of(FaultType::Omission, 3, 2), BoundRelation::BelowBound);
    }
}
