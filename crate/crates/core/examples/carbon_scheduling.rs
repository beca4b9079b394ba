// Carbon-aware scheduling: the prior, a policy that defers all work, and a
// uniformly random policy, with and without ACD, over the same 200 model
// sequences.

use acmdp::envs::{CarbonConfig, CarbonEnv};
use acmdp::learner::play;
use acmdp::model::{CompetitiveSpec, ConstantPolicy, Environment, ModelSequence, UniformPolicy, Vector};

pub fn run() -> anyhow::Result<()> {
    let env = CarbonEnv::new(CarbonConfig::default())?;
    let prior = env.prior();
    let spec = CompetitiveSpec::new(2.0, 2.0)?;
    let bounds = env.params().action_bounds.clone();
    let seqs: Vec<ModelSequence> = (0..200)
        .map(|i| ModelSequence::new(i, i as usize % env.n_windows()))
        .collect();

    println!("{:<16} {:>10} {:>10} {:>10}", "policy", "return", "cost", "violated");
    let report = |name: &str, f: &dyn Fn(&ModelSequence) -> acmdp::Result<(f64, f64, bool)>| -> anyhow::Result<()> {
        let (mut ret, mut cost, mut bad) = (0.0, 0.0, 0);
        for s in &seqs {
            let (r, c, v) = f(s)?;
            ret += r;
            cost += c;
            bad += v as usize;
        }
        let n = seqs.len() as f64;
        println!("{name:<16} {:>10.3} {:>10.3} {:>10}", ret / n, cost / n, bad);
        Ok(())
    };
    let summarize = |(pair, rep): (acmdp::model::PairedRollout, acmdp::safety::AnytimeReport)| {
        (pair.agent.total_reward(), pair.agent.total_cost(), !rep.satisfied)
    };
    report("prior", &|s| Ok(summarize(play(&env, s, prior, &prior, spec, false)?)))?;
    let defer = ConstantPolicy(Vector::scalar(bounds.lo[0]));
    report("defer", &|s| {
        Ok(summarize(play(&env, s, defer.clone(), &prior, spec, false)?))
    })?;
    report("defer+acd", &|s| {
        Ok(summarize(play(&env, s, defer.clone(), &prior, spec, true)?))
    })?;
    report("random+acd", &|s| {
        let ml = UniformPolicy {
            seed: s.episode_seed,
            bounds: bounds.clone(),
        };
        Ok(summarize(play(&env, s, ml, &prior, spec, true)?))
    })?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
