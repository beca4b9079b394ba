use std::sync::Arc;

use smallvec::SmallVec;

use super::params::{BoxBounds, EnvParams};
use super::sequence::{counter_uniform, ModelSequence, RoundDraws};
use super::vector::{Action, State, Vector};
use crate::error::{Error, Result};

/// Exogenous, action-independent inputs for one round (arrivals, renewables, ...).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundContext(pub SmallVec<[f64; 4]>);

impl RoundContext {
    pub fn new(values: &[f64]) -> Self {
        RoundContext(SmallVec::from_slice(values))
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next_state: State,
    pub cost: f64,
    pub reward: f64,
}

/// An episodic environment `(f_h, c_h, r_h)` driven by a [`ModelSequence`].
///
/// Implementations provide the deterministic map [`Environment::transition`]
/// from `(round, context, state, action, draws)`; all randomness enters
/// through `draws`, which is what makes paired rollouts share `y_{1:H}`.
pub trait Environment: Send + Sync {
    fn name(&self) -> &str;

    fn params(&self) -> &EnvParams;

    /// Number of exogenous data windows the environment can replay.
    fn n_windows(&self) -> usize {
        1
    }

    /// The finite action set, for environments that only define these actions.
    fn action_grid(&self) -> Option<&[Action]> {
        None
    }

    fn context(&self, window: usize, round: usize) -> RoundContext;

    fn initial_state(&self, seq: &ModelSequence) -> State;

    /// Raw dynamics. `prev_action = None` drops any switching term from the
    /// reward (used by planners whose state does not carry the last action).
    /// The returned state must already be clipped to the state bounds.
    fn transition(
        &self,
        round: usize,
        ctx: &RoundContext,
        state: &[f64],
        action: &[f64],
        prev_action: Option<&[f64]>,
        draws: &RoundDraws,
    ) -> Transition;

    /// Checked step using the sequence's draws for `round`.
    fn step(
        &self,
        seq: &ModelSequence,
        round: usize,
        state: &[f64],
        action: &[f64],
        prev_action: Option<&[f64]>,
    ) -> Result<Transition> {
        let p = self.params();
        if round == 0 || round > p.horizon {
            return Err(Error::Horizon {
                round,
                horizon: p.horizon,
            });
        }
        if action.len() != p.action_dim() {
            return Err(Error::Dimension {
                expected: p.action_dim(),
                got: action.len(),
            });
        }
        if let Some(dim) = p.state_bounds.first_violation(state) {
            return Err(Error::StateOutOfBounds {
                state: state.to_vec(),
                dim,
            });
        }
        if let Some(dim) = p.action_bounds.first_violation(action) {
            return Err(Error::ActionOutOfBounds {
                action: action.to_vec(),
                dim,
            });
        }
        let ctx = self.context(seq.window, round);
        let t = self.transition(round, &ctx, state, action, prev_action, &seq.draws(round));
        debug_assert!(t.cost >= p.min_cost, "cost {} below floor {}", t.cost, p.min_cost);
        Ok(t)
    }
}

impl<E: Environment + ?Sized> Environment for Arc<E> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn params(&self) -> &EnvParams {
        (**self).params()
    }
    fn n_windows(&self) -> usize {
        (**self).n_windows()
    }
    fn action_grid(&self) -> Option<&[Action]> {
        (**self).action_grid()
    }
    fn context(&self, window: usize, round: usize) -> RoundContext {
        (**self).context(window, round)
    }
    fn initial_state(&self, seq: &ModelSequence) -> State {
        (**self).initial_state(seq)
    }
    fn transition(
        &self,
        round: usize,
        ctx: &RoundContext,
        state: &[f64],
        action: &[f64],
        prev_action: Option<&[f64]>,
        draws: &RoundDraws,
    ) -> Transition {
        (**self).transition(round, ctx, state, action, prev_action, draws)
    }
}

/// Budget information exposed to ML policies running under the safety layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetView {
    /// Allowed deviation `D_h`.
    pub allowed: f64,
    /// Radius of the safe ball, `D_h / Γ_{h,h}`.
    pub radius: f64,
}

/// What a policy sees at round `round` (1-based).
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub round: usize,
    pub state: &'a [f64],
    /// States `x_1 .. x_{h-1}` visited earlier in the episode.
    pub history: &'a [State],
    /// Actions `a_1 .. a_{h-1}` executed earlier in the episode.
    pub past_actions: &'a [Action],
    pub context: &'a RoundContext,
    pub prev_action: Option<&'a [f64]>,
    pub budget: Option<BudgetView>,
}

/// A deterministic, stateless policy.
pub trait Policy: Send + Sync {
    fn act(&self, obs: &Observation<'_>) -> Action;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, obs: &Observation<'_>) -> Action {
        (**self).act(obs)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&self, obs: &Observation<'_>) -> Action {
        (**self).act(obs)
    }
}

impl<P: Policy + ?Sized> Policy for Arc<P> {
    fn act(&self, obs: &Observation<'_>) -> Action {
        (**self).act(obs)
    }
}

/// Always plays the same action.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn act(&self, _obs: &Observation<'_>) -> Action {
        self.0.clone()
    }
}

/// Uniform actions in a box. Draws depend only on `(seed, round)`, so an
/// episode replays exactly.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub seed: u64,
    pub bounds: BoxBounds,
}

impl Policy for UniformPolicy {
    fn act(&self, obs: &Observation<'_>) -> Action {
        let (lo, hi) = (&self.bounds.lo, &self.bounds.hi);
        let v: Vec<f64> = (0..lo.dim())
            .map(|i| lo[i] + (hi[i] - lo[i]) * counter_uniform(self.seed, obs.round, i))
            .collect();
        Vector::from_slice(&v)
    }
}

/// A per-episode decision maker sitting between the ML policy and the environment.
pub trait Controller {
    /// `grid` is the environment's finite action set, if it has one.
    fn begin_episode(&mut self, params: &EnvParams, grid: Option<&[Action]>);

    fn decide(&mut self, obs: &Observation<'_>, prior_action: &[f64]) -> Result<Decision>;

    /// Called after the step with the realized cost and the executed deviation
    /// `‖a_h - π†(x_h)‖`.
    fn settle(&mut self, round: usize, cost: f64, deviation: f64) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// ML output before any projection.
    pub proposed: Action,
    /// Executed action.
    pub action: Action,
    pub allowed: Option<f64>,
    pub residual: Option<f64>,
}

/// Executes a policy verbatim.
pub struct Direct<P>(pub P);

impl<P: Policy> Controller for Direct<P> {
    fn begin_episode(&mut self, _params: &EnvParams, _grid: Option<&[Action]>) {}

    fn decide(&mut self, obs: &Observation<'_>, _prior_action: &[f64]) -> Result<Decision> {
        let a = self.0.act(obs);
        Ok(Decision {
            proposed: a.clone(),
            action: a,
            allowed: None,
            residual: None,
        })
    }

    fn settle(&mut self, _round: usize, _cost: f64, _deviation: f64) -> Result<()> {
        Ok(())
    }
}

/// Clips the wrapped policy's output into the action box, for ML policies
/// whose raw output may leave it.
pub struct Clipped<'a, P> {
    pub inner: P,
    pub bounds: &'a super::params::BoxBounds,
}

impl<P: Policy> Policy for Clipped<'_, P> {
    fn act(&self, obs: &Observation<'_>) -> Action {
        self.bounds.clip(&self.inner.act(obs))
    }
}

pub(crate) fn zeros_like(dim: usize) -> Vector {
    Vector::zeros(dim)
}
