//! Converts multi-step text instructions into visual tutorials.
//!
//! The pipeline parses an instruction into k-best action sequences
//! ([`parser`]), runs each sequence on a simulated device ([`device`],
//! [`executor`]), merges the per-sequence results into one tutorial
//! ([`synth`]) and tracks a user's progress through it from screen
//! snapshots ([`matcher`]). [`metrics`] scores whole corpora.

pub mod corpus;
pub mod device;
pub mod executor;
pub mod matcher;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod synth;

pub use device::{DeviceDef, DeviceInstance};
pub use executor::{ExecConfig, ExecutionTrace, StepOutcome};
pub use parser::{parse, segment, tokenize, ActionKind, ActionTuple, ParseBeam};
pub use synth::Tutorial;
