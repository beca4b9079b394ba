//! Model-based learning over the budget-augmented MDP.
//!
//! [`value_iteration`] works on any [`FiniteMdp`]. [`GridPlanner`] aggregates
//! a scalar environment's augmented state `(x_h, D_h, h)` onto a grid, and
//! [`train`] runs the optimistic loop: pick the model in the confidence set
//! with the highest initial value, play its greedy policy, refit.

pub mod acrl;
pub mod checkpoint;
pub mod grid;
pub mod model_class;
pub mod planning;
pub mod tree;

pub use acrl::{
    acrl_train, baseline_crl, baseline_rl, play, train, EpisodeLog, Mode, Planner, TrainConfig, TrainLog,
    WindowSnapshot,
};
pub use checkpoint::Checkpoint;
pub use grid::{GreedyGridPolicy, GridConfig, GridLayout, GridPlanner};
pub use model_class::{BetaSchedule, ModelClassState};
pub use planning::{argmax, value_iteration, FiniteMdp, RoundTable, ValueTables};
pub use tree::{BranchingEnv, HistoryTree, TreeGreedy, TreeMdp, TreePlanner};
