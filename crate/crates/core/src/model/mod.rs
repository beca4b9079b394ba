//! Domain types and the episodic environment contract.
//!
//! Every environment is a deterministic function of `(round, state, action)`
//! and the per-round draws of a [`ModelSequence`]. Paired rollouts of an
//! agent and the virtual prior therefore live on the same `y_{1:H}`.

mod env;
mod params;
mod rollout;
mod sequence;
mod vector;

pub use env::{
    BudgetView, Clipped, ConstantPolicy, Controller, Decision, Direct, Environment, Observation, Policy, RoundContext,
    Transition, UniformPolicy,
};
pub use params::{BoxBounds, EnvParams, Lipschitz, Perturbation};
pub use rollout::{paired_rollout, prior_rollout, rollout, CompetitiveSpec, EpisodeRecord, PairedRollout, RoundRecord};
pub use sequence::{component, counter_uniform, splitmix64, unit_f64, ModelSequence, RoundDraws, DRAWS_PER_ROUND};
pub use vector::{distance, norm, Action, State, Vector};
