//! Brute-force ground truth on tiny enumerable instances.
//!
//! Fixtures are small TOML files ([`TinyMdp`]). Everything here enumerates:
//! [`exhaustive_safety_check`] walks every model sequence and every open-loop
//! ML action sequence, [`exact_dp`] is a full expectimax over histories, and
//! [`theorem_check`] computes both sides of the regret bound.

mod bound;
mod exact;
mod exhaustive;
mod independent;
mod tiny;

pub use bound::{bound_eval, theorem_check, MarkovTable, TheoremReport};
pub use exact::{exact_dp, exact_dp_model, unconstrained_dp, ExactSolution, UnconstrainedSolution, MAX_NODES};
pub use exhaustive::{
    branch_sequences, exhaustive_safety_check, for_each_tuple, Counterexample, OpenLoop, SafetyCheckReport, MAX_LEAVES,
};
pub use independent::{IndependentAcd, ADMIT_TOLERANCE};
pub use tiny::{
    load_fixtures, parse_rational, TinyEnv, TinyMdp, TinyPrior, MAX_ACTIONS, MAX_HORIZON, MAX_MAPS, MAX_MODELS,
    MAX_STATES,
};
