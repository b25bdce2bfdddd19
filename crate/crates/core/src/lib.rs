//! Commit-adopt and consensus protocols under message adversaries, a
//! deterministic synchronous round engine, and an exhaustive adversary oracle.
//!
//! ```
//! use mad_lab::adversary::{strategy_none, CorruptionSchedule};
//! use mad_lab::engine::{execute, FaultType};
//! use mad_lab::model::{parse_bits, Bit, CAOutput};
//! use mad_lab::protocols::OmissionCa;
//!
//! let ca = OmissionCa::new(3, 2).unwrap();
//! let inputs = parse_bits("1,1,1").unwrap();
//! let trace = execute(&ca, &inputs, &mut strategy_none(), FaultType::Omission, CorruptionSchedule::mobile(2), 10).unwrap();
//! assert!(trace.verdict.holds);
//! assert_eq!(trace.outputs[0], Some(CAOutput::commit(Bit::One)));
//! ```

pub mod adversary;
pub mod engine;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod par;
pub mod protocols;
