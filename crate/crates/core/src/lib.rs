//! Anytime-competitive decision making.
//!
//! A learned policy is wrapped in a safety layer that keeps its cumulative
//! cost within `(1+λ)` times a trusted prior's cost plus `h·b`, at every
//! round `h` of every episode. On top of that layer sits a model-based
//! learner that optimizes expected reward over the budget-augmented MDP.
//!
//! Modules:
//! - [`model`]: environment contract, model sequences, paired rollouts.
//! - [`safety`]: sensitivity tables, the allowed-deviation ledger, projection.
//! - [`envs`]: carbon-aware scheduling and sustainable inference simulators.
//! - [`learner`]: value iteration, model-class fitting, ACRL and baselines.
//! - [`oracle`]: brute-force checks on tiny enumerable instances.
//! - [`harness`]: experiment configs, metrics CSVs, sweeps.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envs;
pub mod error;
pub mod harness;
pub mod learner;
pub mod model;
pub mod oracle;
pub mod safety;

pub use error::{Error, Result};
