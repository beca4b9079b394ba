use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{distance, Environment, ModelSequence, Observation, Policy, RoundDraws, State, Vector};

/// Settings for [`certify_prior`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub trials: usize,
    pub seed: u64,
    /// Applied to the observed worst ratio to give `p_hat`.
    pub multiplier: f64,
    /// Largest perturbation applied to the branch-point state, per dimension.
    pub scale: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            trials: 2000,
            seed: 0,
            multiplier: 1.5,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    /// Worst observed `‖x_{h1+k} − x'_{h1+k}‖ / ‖x_{h1} − x'_{h1}‖` per lag `k`.
    pub raw: Vec<f64>,
    /// `raw` times the multiplier, with `p_hat(0) = 1`.
    pub p_hat: Vec<f64>,
    /// Worst observed `‖π(x) − π(x')‖ / ‖x − x'‖`.
    pub l_prior_hat: f64,
    /// Lags where `raw` exceeds the configured perturbation function.
    pub flagged: Vec<usize>,
    /// Pairs skipped because the perturbation vanished after clipping.
    pub skipped: usize,
}

fn prior_step<E, P>(env: &E, prior: &P, seq: &ModelSequence, round: usize, x: &State, history: &[State]) -> State
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let ctx = env.context(seq.window, round);
    let obs = Observation {
        round,
        state: x,
        history,
        past_actions: &[],
        context: &ctx,
        prev_action: None,
        budget: None,
    };
    let a = prior.act(&obs);
    env.transition(round, &ctx, x, &a, None, &seq.draws(round)).next_state
}

/// Monte-Carlo estimate of the prior's perturbation function and Lipschitz constant.
///
/// Each trial follows the prior along its own trajectory up to a random
/// round `h1`, perturbs the state there and rolls both copies forward on the
/// same draws.
pub fn certify_prior<E, P>(env: &E, prior: &P, opts: CertifyOptions) -> CertifyReport
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let params = env.params();
    let h = params.horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut raw = vec![0.0f64; h];
    raw[0] = 1.0;
    let mut skipped = 0;
    let mut l_prior_hat = 0.0f64;
    for _ in 0..opts.trials {
        let seq = ModelSequence::new(rng.gen(), rng.gen_range(0..env.n_windows().max(1)));
        let h1 = rng.gen_range(1..=h);
        let mut x = env.initial_state(&seq);
        let mut hist = Vec::new();
        for round in 1..h1 {
            let next = prior_step(env, prior, &seq, round, &x, &hist);
            hist.push(std::mem::replace(&mut x, next));
        }
        let mut y: State = x
            .iter()
            .map(|v| v + opts.scale * rng.gen_range(-1.0..=1.0))
            .collect::<Vector>();
        params.state_bounds.clip_in_place(&mut y);
        let d0 = distance(&x, &y);
        if d0 == 0.0 {
            skipped += 1;
            continue;
        }
        // Prior Lipschitz probe at the branch point.
        let ctx = env.context(seq.window, h1);
        let ax = prior.act(&obs_at(h1, &x, &hist, &ctx));
        let ay = prior.act(&obs_at(h1, &y, &hist, &ctx));
        l_prior_hat = l_prior_hat.max(distance(&ax, &ay) / d0);
        let (mut hx, mut hy) = (hist.clone(), hist);
        for round in h1..h {
            let nx = prior_step(env, prior, &seq, round, &x, &hx);
            let ny = prior_step(env, prior, &seq, round, &y, &hy);
            hx.push(std::mem::replace(&mut x, nx));
            hy.push(std::mem::replace(&mut y, ny));
            let lag = round + 1 - h1;
            raw[lag] = raw[lag].max(distance(&x, &y) / d0);
        }
    }
    let mut p_hat: Vec<f64> = raw.iter().map(|r| r * opts.multiplier).collect();
    p_hat[0] = 1.0;
    let flagged = (1..h)
        .filter(|&k| raw[k] > params.perturbation.at(k) * (1.0 + 1e-12))
        .collect();
    CertifyReport {
        raw,
        p_hat,
        l_prior_hat,
        flagged,
        skipped,
    }
}

fn obs_at<'a>(round: usize, x: &'a State, hist: &'a [State], ctx: &'a crate::model::RoundContext) -> Observation<'a> {
    Observation {
        round,
        state: x,
        history: hist,
        past_actions: &[],
        context: ctx,
        prev_action: None,
        budget: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// Worst `|Δc| / (‖Δx‖ + ‖Δa‖)`.
    pub cost_ratio: f64,
    /// Worst `‖Δf‖ / (‖Δx‖ + ‖Δa‖)`.
    pub transition_ratio: f64,
    pub cost_violations: usize,
    pub transition_violations: usize,
    /// Smallest cost seen.
    pub min_cost: f64,
}

/// Empirical check of the exported cost and transition constants on random
/// in-domain pairs sharing one draw.
pub fn lipschitz_check<E: Environment + ?Sized>(env: &E, pairs: usize, seed: u64) -> LipschitzReport {
    let p = env.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng, b: &crate::model::BoxBounds| -> Vector {
        b.lo.iter()
            .zip(b.hi.iter())
            .map(|(l, h)| rng.gen_range(*l..=*h))
            .collect()
    };
    let mut rep = LipschitzReport {
        pairs,
        cost_ratio: 0.0,
        transition_ratio: 0.0,
        cost_violations: 0,
        transition_violations: 0,
        min_cost: f64::INFINITY,
    };
    for _ in 0..pairs {
        let round = rng.gen_range(1..=p.horizon);
        let ctx = env.context(rng.gen_range(0..env.n_windows().max(1)), round);
        let draws = RoundDraws(rng.gen());
        let (x, y) = (sample(&mut rng, &p.state_bounds), sample(&mut rng, &p.state_bounds));
        let (a, b) = (sample(&mut rng, &p.action_bounds), sample(&mut rng, &p.action_bounds));
        let tx = env.transition(round, &ctx, &x, &a, None, &draws);
        let ty = env.transition(round, &ctx, &y, &b, None, &draws);
        rep.min_cost = rep.min_cost.min(tx.cost).min(ty.cost);
        let gap = distance(&x, &y) + distance(&a, &b);
        if gap == 0.0 {
            continue;
        }
        let dc = (tx.cost - ty.cost).abs();
        let df = distance(&tx.next_state, &ty.next_state);
        rep.cost_ratio = rep.cost_ratio.max(dc / gap);
        rep.transition_ratio = rep.transition_ratio.max(df / gap);
        let slack = 1e-9;
        if dc > p.lipschitz.cost * gap * (1.0 + slack) + slack {
            rep.cost_violations += 1;
        }
        if df > p.lipschitz.transition * gap * (1.0 + slack) + slack {
            rep.transition_violations += 1;
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{CarbonConfig, CarbonEnv, InferenceConfig, InferenceEnv, OptQosPrior};

    #[test]
    fn opt_qos_contracts() {
        let env = CarbonEnv::new(CarbonConfig::default()).unwrap();
        let rep = certify_prior(
            &env,
            &env.prior(),
            CertifyOptions {
                trials: 500,
                ..Default::default()
            },
        );
        assert!(rep.flagged.is_empty(), "{rep:?}");
        assert!(rep.raw[1..].iter().all(|&r| r <= 1.0));
        assert!(rep.l_prior_hat <= env.params().lipschitz.prior + 1e-9);
    }

    #[test]
    fn instant_clearing_collapses_perturbations() {
        let env = CarbonEnv::new(CarbonConfig {
            a_max: 1e6,
            ..Default::default()
        })
        .unwrap();
        // Overshoot so every backlog is cleared regardless of the draws.
        let prior = OptQosPrior {
            vx_hat: 2.0,
            va_hat: 0.5,
            a_max: 1e6,
        };
        let rep = certify_prior(
            &env,
            &prior,
            CertifyOptions {
                trials: 300,
                ..Default::default()
            },
        );
        assert!(rep.raw[1..].iter().all(|&r| r == 0.0), "{:?}", rep.raw);
    }

    #[test]
    fn certificates_hold_on_random_pairs() {
        let c = CarbonEnv::new(CarbonConfig::default()).unwrap();
        let r = lipschitz_check(&c, 20_000, 1);
        assert_eq!(r.cost_violations + r.transition_violations, 0, "{r:?}");
        assert!(r.min_cost >= 1.0);
        let s = InferenceEnv::new(InferenceConfig::default()).unwrap();
        let r = lipschitz_check(&s, 20_000, 2);
        assert_eq!(r.cost_violations + r.transition_violations, 0, "{r:?}");
    }
}
