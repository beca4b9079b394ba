use serde::{Deserialize, Serialize};

use super::exogenous::{DataConfig, Exogenous, SeriesConfig};
use super::trace::SynthKind;
use super::ModelClass;
use crate::error::{Error, Result};
use crate::model::{
    component, Action, BoxBounds, EnvParams, Environment, Lipschitz, ModelSequence, Observation, Perturbation, Policy,
    RoundContext, RoundDraws, State, Transition, Vector,
};

/// Sustainable AI inference on a battery-backed edge site.
///
/// State is the battery charge `x`; context is `(μ_h, e_h)`, demand and
/// renewables. `x' = clip([x + V_e(e) − V_a(a)]⁺)` with `V_a = w·a`,
/// `w ~ U[va_low, 1]`, and `V_e = z·e`, `z ~ U[ve_low, 1]`. Energy drawn beyond
/// the battery and renewables is fossil and costs `Q1 ([V_a(a) − x − V_e(e)]⁺)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub horizon: usize,
    pub capacity: f64,
    pub a_max: f64,
    pub q1: f64,
    /// Switching weight.
    pub gamma1: f64,
    /// Inference-utility weight.
    pub gamma2: f64,
    /// Carbon-cost weight inside the reward.
    pub gamma3: f64,
    pub c_d: f64,
    pub c_i: f64,
    pub va_low: f64,
    pub ve_low: f64,
    pub initial_max: f64,
    /// Slack `Q_c` of the carbon-bound prior.
    pub q_c: f64,
    /// Efficiency the prior assumes for `V̂_a`.
    pub prior_va: f64,
    /// Charging efficiency the prior assumes for `V̂_e`.
    pub prior_ve: f64,
    /// Use the prior's literal two-branch rule instead of its continuous form.
    pub literal_prior: bool,
    /// `primary` = demand, `secondary` = renewables.
    pub data: DataConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            horizon: 24,
            capacity: 10.0,
            a_max: 4.0,
            q1: 1.0,
            gamma1: 0.5,
            gamma2: 2.0,
            gamma3: 0.1,
            c_d: 1.0,
            c_i: 1.0,
            va_low: 0.7,
            ve_low: 0.8,
            initial_max: 2.0,
            q_c: 1.0,
            prior_va: 0.85,
            prior_ve: 0.9,
            literal_prior: false,
            data: DataConfig {
                primary: SeriesConfig {
                    seed: 21,
                    ..SeriesConfig::synthetic(SynthKind::Sinusoidal, 1.5, 0.0)
                },
                secondary: SeriesConfig {
                    seed: 22,
                    ..SeriesConfig::synthetic(SynthKind::Sinusoidal, 1.0, -std::f64::consts::FRAC_PI_2)
                },
                stride: 24,
                copies: 40,
                jitter: 0.3,
                seed: 23,
            },
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("q1", self.q1),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("c_d", self.c_d),
            ("c_i", self.c_i),
            ("initial_max", self.initial_max),
            ("q_c", self.q_c),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("inference.{name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.capacity > 0.0 && self.a_max > 0.0 && self.capacity.is_finite() && self.a_max.is_finite()) {
            return Err(Error::config(
                "inference.capacity and inference.a_max must be positive and finite",
            ));
        }
        for (name, v) in [("va_low", self.va_low), ("ve_low", self.ve_low)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("inference.{name} must lie in [0, 1]")));
            }
        }
        if !(self.prior_va > 0.0 && self.prior_ve >= 0.0) {
            return Err(Error::config("inference prior estimates must be positive"));
        }
        if self.initial_max > self.capacity {
            return Err(Error::config("inference.initial_max exceeds capacity"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<EnvParams> {
        let p = EnvParams {
            horizon: self.horizon,
            state_bounds: BoxBounds::interval(0.0, self.capacity)?,
            action_bounds: BoxBounds::interval(0.0, self.a_max)?,
            lipschitz: Lipschitz {
                // The fossil shortfall never exceeds V_a(a) ≤ a_max.
                cost: 2.0 * self.q1 * self.a_max,
                transition: 1.0,
                prior: 1.0 / self.prior_va,
            },
            min_cost: 0.0,
            perturbation: Perturbation::Geometric { rho: 1.0 },
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct InferenceEnv {
    cfg: InferenceConfig,
    params: EnvParams,
    data: Exogenous,
    name: String,
}

impl InferenceEnv {
    pub fn new(cfg: InferenceConfig) -> Result<Self> {
        let data = Exogenous::from_config(&cfg.data, cfg.horizon)?;
        Self::with_data(cfg, data)
    }

    pub fn with_data(cfg: InferenceConfig, data: Exogenous) -> Result<Self> {
        cfg.validate()?;
        if cfg.literal_prior {
            return Err(Error::config(
                "the literal two-branch prior is discontinuous in the state; its Lipschitz certificate would be void",
            ));
        }
        if data.horizon() != cfg.horizon {
            return Err(Error::config(format!(
                "exogenous data covers {} rounds, horizon is {}",
                data.horizon(),
                cfg.horizon
            )));
        }
        let params = cfg.params()?;
        Ok(InferenceEnv {
            name: "inference".into(),
            cfg,
            params,
            data,
        })
    }

    pub fn config(&self) -> &InferenceConfig {
        &self.cfg
    }

    pub fn data(&self) -> &Exogenous {
        &self.data
    }

    /// Realized `(w, z)` multipliers of `V_a` and `V_e` for a round.
    pub fn multipliers(&self, draws: &RoundDraws) -> (f64, f64) {
        let w = self.cfg.va_low + (1.0 - self.cfg.va_low) * draws.get(component::DYNAMICS_A);
        let z = self.cfg.ve_low + (1.0 - self.cfg.ve_low) * draws.get(component::DYNAMICS_B);
        (w, z)
    }

    pub fn carbon_cost(&self, shortfall: f64) -> f64 {
        self.cfg.q1 * shortfall.max(0.0).powi(2)
    }

    pub fn with_dynamics(&self, va_low: f64, ve_low: f64) -> Result<Self> {
        let cfg = InferenceConfig {
            va_low,
            ve_low,
            ..self.cfg.clone()
        };
        let mut e = Self::with_data(cfg, self.data.clone())?;
        e.name = format!("inference[va_low={va_low},ve_low={ve_low}]");
        Ok(e)
    }

    pub fn prior(&self) -> CarbonBoundPrior {
        CarbonBoundPrior {
            va_hat: self.cfg.prior_va,
            ve_hat: self.cfg.prior_ve,
            q1: self.cfg.q1,
            q_c: self.cfg.q_c,
            a_max: self.cfg.a_max,
            literal: false,
        }
    }
}

impl Environment for InferenceEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> &EnvParams {
        &self.params
    }

    fn n_windows(&self) -> usize {
        self.data.n_windows()
    }

    fn context(&self, window: usize, round: usize) -> RoundContext {
        self.data.context(window, round)
    }

    fn initial_state(&self, seq: &ModelSequence) -> State {
        Vector::scalar(self.cfg.initial_max * seq.draws(0).get(component::DYNAMICS_A))
    }

    fn transition(
        &self,
        _round: usize,
        ctx: &RoundContext,
        state: &[f64],
        action: &[f64],
        prev_action: Option<&[f64]>,
        draws: &RoundDraws,
    ) -> Transition {
        let (x, a) = (state[0], action[0]);
        let (mu, e) = (ctx.get(0), ctx.get(1));
        let (w, z) = self.multipliers(draws);
        let drawn = w * a;
        let charged = z * e;
        let next = (x + charged - drawn).max(0.0).min(self.cfg.capacity);
        let cost = self.carbon_cost(drawn - x - charged);
        let demand = -self.cfg.c_d * (mu - a).max(0.0).powi(2);
        let utility = (1.0 + self.cfg.c_i * a).ln();
        let switching = prev_action.map_or(0.0, |p| (a - p[0]).powi(2));
        Transition {
            next_state: Vector::scalar(next),
            cost,
            reward: demand + self.cfg.gamma2 * utility - self.cfg.gamma1 * switching - self.cfg.gamma3 * cost,
        }
    }
}

impl ModelClass for InferenceEnv {
    fn candidates(&self) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for va in [0.6, 0.7, 0.8] {
            for ve in [0.7, 0.8, 0.9] {
                out.push(self.with_dynamics(va, ve)?);
            }
        }
        Ok(out)
    }
}

/// Carbon-bound prior.
///
/// Meets the demand `μ` when the estimated energy `x + V̂_e(e)` plus the
/// slack covers it; otherwise draws just enough that the estimated fossil
/// cost equals `Q_c`. The default (continuous) form is
/// `a = min(μ, (x + V̂_e(e) + √(Q_c/Q1)) / va_hat)`, which agrees with the
/// second branch whenever that branch binds and is Lipschitz in `x`.
/// `literal = true` switches on the branch test `x + V̂_e(e) + Q_c ≥ μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarbonBoundPrior {
    pub va_hat: f64,
    pub ve_hat: f64,
    pub q1: f64,
    pub q_c: f64,
    pub a_max: f64,
    pub literal: bool,
}

impl CarbonBoundPrior {
    pub fn lipschitz(&self) -> f64 {
        1.0 / self.va_hat
    }

    /// Action given charge `x`, renewable `e` and demand `mu`.
    pub fn action(&self, x: f64, e: f64, mu: f64) -> f64 {
        let available = x + self.ve_hat * e;
        let slack = if self.q1 > 0.0 {
            (self.q_c / self.q1).sqrt()
        } else {
            f64::INFINITY
        };
        let bounded = (available + slack) / self.va_hat;
        let a = if self.literal {
            if available + self.q_c >= mu {
                mu
            } else {
                bounded
            }
        } else {
            mu.min(bounded)
        };
        a.clamp(0.0, self.a_max)
    }
}

impl Policy for CarbonBoundPrior {
    fn act(&self, obs: &Observation<'_>) -> Action {
        Vector::scalar(self.action(obs.state[0], obs.context.get(1), obs.context.get(0)))
    }
}

/// Carbon-bound action from explicit estimates: `ve_hat_e` is `V̂_e(e_h)`.
pub fn prior_carbon_b(env: &InferenceEnv, x: f64, ve_hat_e: f64, mu: f64, q_c: f64) -> Action {
    let p = CarbonBoundPrior {
        ve_hat: 1.0,
        q_c,
        ..env.prior()
    };
    Vector::scalar(p.action(x, ve_hat_e, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> InferenceEnv {
        InferenceEnv::new(InferenceConfig::default()).unwrap()
    }

    #[test]
    fn carbon_b_examples() {
        let p = CarbonBoundPrior {
            va_hat: 0.85,
            ve_hat: 1.0,
            q1: 1.0,
            q_c: 4.0,
            a_max: 100.0,
            literal: false,
        };
        assert!((p.action(0.0, 0.0, 10.0) - 2.0 / 0.85).abs() < 1e-12);
        assert_eq!(p.action(5.0, 1.0, 3.0), 3.0);
        let zero = CarbonBoundPrior { q_c: 0.0, ..p };
        assert_eq!(zero.action(0.0, 0.0, 0.0), 0.0);
        let lit = CarbonBoundPrior { literal: true, ..p };
        assert_eq!(lit.action(5.0, 1.0, 3.0), 3.0);
        assert!((lit.action(0.0, 0.0, 10.0) - 2.0 / 0.85).abs() < 1e-12);
        let e = env();
        assert!((prior_carbon_b(&e, 0.0, 0.0, 10.0, 4.0)[0] - 2.0 / 0.85).abs() < 1e-12);
    }

    #[test]
    fn fossil_cost_only_on_shortfall() {
        let e = env();
        let ctx = RoundContext::new(&[2.0, 1.0]);
        let full = RoundDraws([1.0 - 1e-12, 1.0 - 1e-12, 0.0, 0.0]);
        let t = e.transition(1, &ctx, &[5.0], &[2.0], None, &full);
        assert_eq!(t.cost, 0.0);
        let t = e.transition(1, &ctx, &[0.0], &[4.0], None, &full);
        assert!((t.cost - (4.0f64 - 1.0).powi(2)).abs() < 1e-9);
        assert_eq!(t.next_state[0], 0.0);
    }

    #[test]
    fn literal_prior_is_refused() {
        let cfg = InferenceConfig {
            literal_prior: true,
            ..Default::default()
        };
        assert!(matches!(InferenceEnv::new(cfg), Err(Error::Config(_))));
    }
}
