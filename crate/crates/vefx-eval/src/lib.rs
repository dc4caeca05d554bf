//! Quality measurement for instruction-guided video editing.
//!
//! Edits are judged on a 4-point scale along three decoupled dimensions:
//! Instruction Following (IF), Rendering Quality (RQ), and Edit
//! Exclusivity (EE). This crate implements the full measurement stack on
//! top of those labels:
//!
//! - dataset validation and the joined score table ([`table`])
//! - rank correlation and calibrated linear agreement ([`metrics`])
//! - group-wise pairwise preference accuracy ([`preference`])
//! - arithmetic-mean and geometric-aggregate leaderboards ([`aggregate`])
//! - coverage-adjusted estimates under incomplete benchmarks ([`adjust`])
//! - a trainable multi-dimension ordinal scoring head ([`head`])
//!
//! The `vefx-eval` binary exposes each stage as a subcommand; see the
//! crate README for the file formats.

pub mod aggregate;
pub mod adjust;
pub mod cli;
pub mod head;
pub mod metrics;
pub mod preference;
pub mod records;
pub mod report;
pub mod table;
pub mod types;

pub use records::{DataError, LoadOptions};
pub use table::{validate_dataset, EvalTable};
pub use types::{overall_human, Dimension, LabelTriplet, OrdinalScore, SoftScore, SoftTriplet};
