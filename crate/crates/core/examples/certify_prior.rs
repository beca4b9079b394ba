// Empirical checks of the constants the safety layer relies on: the prior's
// perturbation profile and the cost and transition Lipschitz bounds.

use acmdp::envs::{
    certify_prior, lipschitz_check, CarbonConfig, CarbonEnv, CertifyOptions, InferenceConfig, InferenceEnv,
};
use acmdp::model::{Environment, Policy};

fn show<E: Environment, P: Policy>(env: &E, prior: &P) {
    let r = certify_prior(
        env,
        prior,
        CertifyOptions {
            trials: 500,
            ..Default::default()
        },
    );
    let l = lipschitz_check(env, 2000, 1);
    println!("{}:", env.name());
    println!(
        "  p_hat = {:?}",
        r.p_hat
            .iter()
            .map(|p| (p * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    println!("  prior Lipschitz ≈ {:.3}, flagged lags {:?}", r.l_prior_hat, r.flagged);
    println!(
        "  cost ratio {:.3} ({} over), transition ratio {:.3} ({} over), min cost {:.3}",
        l.cost_ratio, l.cost_violations, l.transition_ratio, l.transition_violations, l.min_cost
    );
}

pub fn run() -> anyhow::Result<()> {
    let carbon = CarbonEnv::new(CarbonConfig::default())?;
    show(&carbon, &carbon.prior());
    let inference = InferenceEnv::new(InferenceConfig::default())?;
    show(&inference, &inference.prior());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
