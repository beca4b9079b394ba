// Sustainable inference: train ACRL briefly on the aggregated grid planner
// and compare it with the carbon-bounded prior on held-out sequences.

use acmdp::envs::{InferenceConfig, InferenceEnv, ModelClass};
use acmdp::learner::{acrl_train, play, GridConfig, GridPlanner, Mode, TrainConfig};
use acmdp::model::{CompetitiveSpec, Environment, ModelSequence};

pub fn run() -> anyhow::Result<()> {
    let env = InferenceEnv::new(InferenceConfig::default())?;
    let prior = env.prior();
    let spec = CompetitiveSpec::new(2.0, 2.0)?;
    let planner = GridPlanner::new(
        env.candidates()?,
        prior,
        spec,
        &GridConfig::default(),
        env.data().nominal(),
        Mode::Acd,
    )?;
    let train: Vec<ModelSequence> = (0..60)
        .map(|k| ModelSequence::new(k, k as usize % env.n_windows()))
        .collect();
    let log = acrl_train(&env, &prior, &planner, spec, &TrainConfig::default(), &train)?;
    println!(
        "trained {} episodes, final model {}",
        log.episodes.len(),
        log.final_model
    );

    let (mut acrl, mut base, mut violations) = (0.0, 0.0, 0);
    let held_out: Vec<ModelSequence> = (0..100)
        .map(|i| ModelSequence::new(1 << 40 | i, i as usize % env.n_windows()))
        .collect();
    for s in &held_out {
        let (pair, rep) = play(&env, s, log.policy.clone(), &prior, spec, true)?;
        acrl += pair.agent.total_reward();
        base += pair.prior.total_reward();
        violations += !rep.satisfied as usize;
    }
    let n = held_out.len() as f64;
    println!(
        "mean return: acrl {:.3}, prior {:.3}; violations {violations}",
        acrl / n,
        base / n
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
