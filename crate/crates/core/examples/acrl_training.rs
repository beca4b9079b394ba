// ACRL on the slippery tabular toy, where the ACD-optimal value is known
// exactly. Prints the cumulative pseudo-regret `PReg(k)/k` by decile.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use acmdp::envs::ModelClass;
use acmdp::learner::{acrl_train, Mode, Planner, TrainConfig, TreeGreedy, TreePlanner};
use acmdp::model::{CompetitiveSpec, ModelSequence};
use acmdp::oracle::{exact_dp, TinyEnv, TinyMdp};

pub fn run() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/slippery.toml");
    let mdp = Arc::new(TinyMdp::load(&path)?);
    let env = TinyEnv::new(mdp.clone());
    let prior = env.prior();
    let spec = CompetitiveSpec::new(1.0, 1.0)?;
    let planner = TreePlanner::new(&env.candidates()?, &prior, spec, Mode::Acd)?;
    let v_circ = exact_dp(&mdp, spec, true)?.value;

    let k = 1000;
    let seqs: Vec<ModelSequence> = (1..=k).map(|i| ModelSequence::new(i as u64, 0)).collect();
    let log = acrl_train(&env, &prior, &planner, spec, &TrainConfig::default(), &seqs)?;

    // Exact value of the greedy policy planned under each candidate, on the true model.
    let truth = planner.probabilities(mdp.true_model);
    let mut value: HashMap<usize, f64> = HashMap::new();
    let mut preg = 0.0;
    println!("v° = {v_circ:.4}");
    for (i, e) in log.episodes.iter().enumerate() {
        let v = match value.get(&e.model) {
            Some(v) => *v,
            None => {
                let greedy = TreeGreedy::new(planner.tree().clone(), Arc::new(planner.plan(e.model, 0.0)?));
                let v = planner.tree().policy_value(truth, |h, n| greedy.choice(h, n));
                value.insert(e.model, v);
                v
            }
        };
        preg += v_circ - v;
        if (i + 1) % (k / 10) == 0 {
            println!(
                "k = {:>5}  PReg(k)/k = {:.4}  model {}",
                i + 1,
                preg / (i + 1) as f64,
                e.model
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
