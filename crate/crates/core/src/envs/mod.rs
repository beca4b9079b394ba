//! Simulators, their policy priors, exogenous traces and empirical certificates.

mod carbon;
mod certify;
mod exogenous;
mod inference;
mod trace;

use serde::{Deserialize, Serialize};

pub use carbon::{prior_opt_qos, CarbonConfig, CarbonEnv, OptQosPrior, TruncatedNormal};
pub use certify::{certify_prior, lipschitz_check, CertifyOptions, CertifyReport, LipschitzReport};
pub use exogenous::{DataConfig, Exogenous, SeriesConfig};
pub use inference::{prior_carbon_b, CarbonBoundPrior, InferenceConfig, InferenceEnv};
pub use trace::{augment, load_trace, synth_trace, synth_trace_with_phase, SynthKind, Trace, TraceSource};

use crate::error::Result;
use crate::model::{
    Action, EnvParams, Environment, ModelSequence, Observation, Policy, RoundContext, RoundDraws, State, Transition,
};

/// An environment that can enumerate a finite family of alternative
/// dynamics sharing its exogenous data, rewards and costs.
pub trait ModelClass: Environment + Clone + Sized {
    fn candidates(&self) -> Result<Vec<Self>>;
}

/// Environment selection in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Carbon(CarbonConfig),
    Inference(InferenceConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Carbon(CarbonConfig::default())
    }
}

impl EnvConfig {
    pub fn build(&self) -> Result<AnyEnv> {
        Ok(match self {
            EnvConfig::Carbon(c) => AnyEnv::Carbon(CarbonEnv::new(c.clone())?),
            EnvConfig::Inference(c) => AnyEnv::Inference(InferenceEnv::new(c.clone())?),
        })
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvConfig::Carbon(c) => c.horizon,
            EnvConfig::Inference(c) => c.horizon,
        }
    }

    pub fn set_horizon(&mut self, h: usize) {
        match self {
            EnvConfig::Carbon(c) => c.horizon = h,
            EnvConfig::Inference(c) => c.horizon = h,
        }
    }
}

/// Either shipped environment.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Carbon(CarbonEnv),
    Inference(InferenceEnv),
}

impl AnyEnv {
    pub fn prior(&self) -> AnyPrior {
        match self {
            AnyEnv::Carbon(e) => AnyPrior::OptQos(e.prior()),
            AnyEnv::Inference(e) => AnyPrior::CarbonBound(e.prior()),
        }
    }

    pub fn exogenous(&self) -> &Exogenous {
        match self {
            AnyEnv::Carbon(e) => e.data(),
            AnyEnv::Inference(e) => e.data(),
        }
    }
}

impl Environment for AnyEnv {
    fn name(&self) -> &str {
        match self {
            AnyEnv::Carbon(e) => e.name(),
            AnyEnv::Inference(e) => e.name(),
        }
    }

    fn params(&self) -> &EnvParams {
        match self {
            AnyEnv::Carbon(e) => e.params(),
            AnyEnv::Inference(e) => e.params(),
        }
    }

    fn n_windows(&self) -> usize {
        match self {
            AnyEnv::Carbon(e) => e.n_windows(),
            AnyEnv::Inference(e) => e.n_windows(),
        }
    }

    fn context(&self, window: usize, round: usize) -> RoundContext {
        match self {
            AnyEnv::Carbon(e) => e.context(window, round),
            AnyEnv::Inference(e) => e.context(window, round),
        }
    }

    fn initial_state(&self, seq: &ModelSequence) -> State {
        match self {
            AnyEnv::Carbon(e) => e.initial_state(seq),
            AnyEnv::Inference(e) => e.initial_state(seq),
        }
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
        match self {
            AnyEnv::Carbon(e) => e.transition(round, ctx, state, action, prev_action, draws),
            AnyEnv::Inference(e) => e.transition(round, ctx, state, action, prev_action, draws),
        }
    }
}

impl ModelClass for AnyEnv {
    fn candidates(&self) -> Result<Vec<Self>> {
        Ok(match self {
            AnyEnv::Carbon(e) => e.candidates()?.into_iter().map(AnyEnv::Carbon).collect(),
            AnyEnv::Inference(e) => e.candidates()?.into_iter().map(AnyEnv::Inference).collect(),
        })
    }
}

/// Prior matching an [`AnyEnv`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnyPrior {
    OptQos(OptQosPrior),
    CarbonBound(CarbonBoundPrior),
}

impl Policy for AnyPrior {
    fn act(&self, obs: &Observation<'_>) -> Action {
        match self {
            AnyPrior::OptQos(p) => p.act(obs),
            AnyPrior::CarbonBound(p) => p.act(obs),
        }
    }
}
