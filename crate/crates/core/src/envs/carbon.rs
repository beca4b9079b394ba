use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::exogenous::{DataConfig, Exogenous, SeriesConfig};
use super::trace::SynthKind;
use super::ModelClass;
use crate::error::{Error, Result};
use crate::model::{
    component, Action, BoxBounds, EnvParams, Environment, Lipschitz, ModelSequence, Observation, Perturbation, Policy,
    RoundContext, RoundDraws, State, Transition, Vector,
};

/// Carbon-aware workload scheduling.
///
/// State is the remaining demand `x`; context is `(μ_h, C_h)`, arrivals and
/// renewables. `x' = clip([V_x(x) + μ − V_a(a)]⁺)` with `V_x = u·x`,
/// `u ~ U[vx_low, 1]`, and `V_a = v·a`, `v` truncated normal. The QoS cost
/// `Q1 x² + Q2 x + Q3` is charged on the state the action is taken in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarbonConfig {
    pub horizon: usize,
    pub x_max: f64,
    pub a_max: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Revenue weight.
    pub gamma1: f64,
    /// Switching weight.
    pub gamma2: f64,
    pub c_r: f64,
    pub alpha: f64,
    pub vx_low: f64,
    pub va_center: f64,
    pub va_std: f64,
    pub va_low: f64,
    pub va_high: f64,
    pub initial_max: f64,
    /// Mean decay the prior assumes.
    pub prior_vx: f64,
    /// Mean efficiency the prior assumes.
    pub prior_va: f64,
    /// `primary` = arrivals, `secondary` = renewables.
    pub data: DataConfig,
}

impl Default for CarbonConfig {
    fn default() -> Self {
        CarbonConfig {
            horizon: 24,
            x_max: 10.0,
            a_max: 8.0,
            q1: 1.0,
            q2: 1.0,
            q3: 1.0,
            gamma1: 4.0,
            gamma2: 1.0,
            c_r: 1.0,
            alpha: 0.5,
            vx_low: 0.9,
            va_center: 0.8,
            va_std: 0.05,
            va_low: 0.6,
            va_high: 1.0,
            initial_max: 2.0,
            prior_vx: 0.95,
            prior_va: 0.8,
            data: DataConfig {
                primary: SeriesConfig {
                    seed: 11,
                    ..SeriesConfig::synthetic(SynthKind::Sinusoidal, 2.0, 0.0)
                },
                secondary: SeriesConfig {
                    seed: 12,
                    ..SeriesConfig::synthetic(SynthKind::Sinusoidal, 1.5, -std::f64::consts::FRAC_PI_2)
                },
                stride: 24,
                copies: 40,
                jitter: 0.3,
                seed: 13,
            },
        }
    }
}

impl CarbonConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("q1", self.q1),
            ("q2", self.q2),
            ("q3", self.q3),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("c_r", self.c_r),
            ("initial_max", self.initial_max),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("carbon.{name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.x_max > 0.0 && self.a_max > 0.0 && self.x_max.is_finite() && self.a_max.is_finite()) {
            return Err(Error::config(
                "carbon.x_max and carbon.a_max must be positive and finite",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("carbon.alpha must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.vx_low) {
            return Err(Error::config("carbon.vx_low must lie in [0, 1]"));
        }
        if !(0.0 < self.va_low
            && self.va_low <= self.va_center
            && self.va_center <= self.va_high
            && self.va_high <= 1.0)
        {
            return Err(Error::config("carbon needs 0 < va_low <= va_center <= va_high <= 1"));
        }
        if !(self.va_std > 0.0) {
            return Err(Error::config("carbon.va_std must be positive"));
        }
        if !(self.prior_vx > 0.0 && self.prior_va > 0.0) {
            return Err(Error::config("carbon prior estimates must be positive"));
        }
        if self.initial_max > self.x_max {
            return Err(Error::config("carbon.initial_max exceeds x_max"));
        }
        Ok(())
    }

    /// Certified constants over the clipped state box.
    pub fn params(&self) -> Result<EnvParams> {
        let p = EnvParams {
            horizon: self.horizon,
            state_bounds: BoxBounds::interval(0.0, self.x_max)?,
            action_bounds: BoxBounds::interval(0.0, self.a_max)?,
            lipschitz: Lipschitz {
                cost: 2.0 * self.q1 * self.x_max + self.q2,
                transition: self.va_high.max(1.0),
                prior: self.prior_vx / self.prior_va,
            },
            min_cost: self.q3,
            perturbation: Perturbation::Geometric { rho: 1.0 },
        };
        p.validate()?;
        Ok(p)
    }
}

/// Normal distribution truncated to `[lo, hi]`, sampled by inverse CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNormal {
    pub center: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

impl TruncatedNormal {
    pub fn new(center: f64, std: f64, lo: f64, hi: f64) -> Self {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        TruncatedNormal {
            center,
            std,
            lo,
            hi,
            cdf_lo: unit.cdf((lo - center) / std),
            cdf_hi: unit.cdf((hi - center) / std),
        }
    }

    /// Quantile at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let p = self.cdf_lo + u.clamp(0.0, 1.0) * (self.cdf_hi - self.cdf_lo);
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        (self.center + self.std * unit.inverse_cdf(p)).clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone)]
pub struct CarbonEnv {
    cfg: CarbonConfig,
    params: EnvParams,
    data: Exogenous,
    va: TruncatedNormal,
    name: String,
}

impl CarbonEnv {
    pub fn new(cfg: CarbonConfig) -> Result<Self> {
        let data = Exogenous::from_config(&cfg.data, cfg.horizon)?;
        Self::with_data(cfg, data)
    }

    pub fn with_data(cfg: CarbonConfig, data: Exogenous) -> Result<Self> {
        cfg.validate()?;
        if data.horizon() != cfg.horizon {
            return Err(Error::config(format!(
                "exogenous data covers {} rounds, horizon is {}",
                data.horizon(),
                cfg.horizon
            )));
        }
        let params = cfg.params()?;
        let va = TruncatedNormal::new(cfg.va_center, cfg.va_std, cfg.va_low, cfg.va_high);
        Ok(CarbonEnv {
            name: "carbon".into(),
            cfg,
            params,
            data,
            va,
        })
    }

    pub fn config(&self) -> &CarbonConfig {
        &self.cfg
    }

    pub fn data(&self) -> &Exogenous {
        &self.data
    }

    /// QoS cost of a state.
    pub fn qos_cost(&self, x: f64) -> f64 {
        self.cfg.q1 * x * x + self.cfg.q2 * x + self.cfg.q3
    }

    /// Realized `(u, v)` multipliers of `V_x` and `V_a` for a round.
    pub fn multipliers(&self, draws: &RoundDraws) -> (f64, f64) {
        let u = self.cfg.vx_low + (1.0 - self.cfg.vx_low) * draws.get(component::DYNAMICS_A);
        let v = self.va.quantile(draws.get(component::DYNAMICS_B));
        (u, v)
    }

    /// Same environment with a different decay floor and efficiency center.
    pub fn with_dynamics(&self, vx_low: f64, va_center: f64) -> Result<Self> {
        let cfg = CarbonConfig {
            vx_low,
            va_center,
            ..self.cfg.clone()
        };
        let mut e = Self::with_data(cfg, self.data.clone())?;
        e.name = format!("carbon[vx_low={vx_low},va_center={va_center}]");
        Ok(e)
    }

    pub fn prior(&self) -> OptQosPrior {
        OptQosPrior {
            vx_hat: self.cfg.prior_vx,
            va_hat: self.cfg.prior_va,
            a_max: self.cfg.a_max,
        }
    }
}

impl Environment for CarbonEnv {
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
        let (mu, renewable) = (ctx.get(0), ctx.get(1));
        let (u, v) = self.multipliers(draws);
        let processed = v * a;
        let next = (u * x + mu - processed).max(0.0).min(self.cfg.x_max);
        let efficiency = -(a - renewable).max(0.0).powi(2);
        let revenue = self.cfg.c_r * processed.max(0.0).powf(self.cfg.alpha);
        let switching = prev_action.map_or(0.0, |p| (a - p[0]).powi(2));
        Transition {
            next_state: Vector::scalar(next),
            cost: self.qos_cost(x),
            reward: efficiency + self.cfg.gamma1 * revenue - self.cfg.gamma2 * switching,
        }
    }
}

impl ModelClass for CarbonEnv {
    fn candidates(&self) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for vx in [0.85, 0.9, 0.95] {
            for va in [0.7, 0.8, 0.9] {
                out.push(self.with_dynamics(vx, va)?);
            }
        }
        Ok(out)
    }
}

/// OPT-QoS prior: processes the predicted backlog `V̂_x(x) + μ̂` in one round,
/// `a = clip((vx_hat·x + μ̂) / va_hat, 0, a_max)`, with `μ̂` the round's arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptQosPrior {
    pub vx_hat: f64,
    pub va_hat: f64,
    pub a_max: f64,
}

impl OptQosPrior {
    pub fn lipschitz(&self) -> f64 {
        self.vx_hat / self.va_hat
    }

    pub fn action(&self, x: f64, mu_hat: f64) -> f64 {
        ((self.vx_hat * x + mu_hat) / self.va_hat).clamp(0.0, self.a_max)
    }
}

impl Policy for OptQosPrior {
    fn act(&self, obs: &Observation<'_>) -> Action {
        Vector::scalar(self.action(obs.state[0], obs.context.get(0)))
    }
}

/// Free-function form of the OPT-QoS rule for `env`'s prior estimates.
pub fn prior_opt_qos(env: &CarbonEnv, x: f64, mu_hat: f64) -> Action {
    Vector::scalar(env.prior().action(x, mu_hat))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> CarbonEnv {
        CarbonEnv::new(CarbonConfig::default()).unwrap()
    }

    #[test]
    fn pinned_draws_step() {
        // u = 0.95, v = 0.8: V_x(10) = 9.5, V_a(8) = 6.4.
        let e = env();
        let ctx = RoundContext::new(&[5.0, 0.0]);
        let draws = RoundDraws([0.5, 0.5, 0.0, 0.0]);
        let (u, v) = e.multipliers(&draws);
        assert!((u - 0.95).abs() < 1e-15);
        assert!((v - 0.8).abs() < 1e-12);
        let t = e.transition(1, &ctx, &[10.0], &[8.0], None, &draws);
        assert!((t.next_state[0] - 8.1).abs() < 1e-9);
    }

    #[test]
    fn emptied_backlog_is_zero() {
        let e = env();
        let ctx = RoundContext::new(&[0.0, 0.0]);
        let t = e.transition(1, &ctx, &[1.0], &[8.0], None, &RoundDraws([0.3, 0.4, 0.0, 0.0]));
        assert_eq!(t.next_state[0], 0.0);
    }

    #[test]
    fn qos_cost_example() {
        assert_eq!(env().qos_cost(2.0), 7.0);
        assert_eq!(env().qos_cost(0.0), env().params().min_cost);
    }

    #[test]
    fn opt_qos_examples() {
        let p = OptQosPrior {
            vx_hat: 0.95,
            va_hat: 0.8,
            a_max: 100.0,
        };
        assert_eq!(p.action(0.0, 0.0), 0.0);
        assert!((p.action(8.0, 4.0) - 14.5).abs() < 1e-12);
        let e = env();
        assert_eq!(prior_opt_qos(&e, 10.0, 4.0).as_slice(), &[8.0]);
        assert!((e.params().lipschitz.prior - 1.1875).abs() < 1e-15);
    }

    #[test]
    fn truncated_normal_stays_in_support() {
        let t = TruncatedNormal::new(0.8, 0.05, 0.6, 1.0);
        for i in 0..=1000 {
            let v = t.quantile(i as f64 / 1000.0);
            assert!((0.6..=1.0).contains(&v));
        }
        assert!((t.quantile(0.5) - 0.8).abs() < 1e-9);
        let skew = TruncatedNormal::new(0.9, 0.05, 0.6, 1.0);
        assert!(skew.quantile(0.999_999) <= 1.0);
    }

    #[test]
    fn candidate_class_holds_the_truth() {
        let e = env();
        let c = e.candidates().unwrap();
        assert_eq!(c.len(), 9);
        assert!(c
            .iter()
            .any(|g| g.config().vx_low == 0.9 && g.config().va_center == 0.8));
    }
}
