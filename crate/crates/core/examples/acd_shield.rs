// Wraps a policy that never schedules any work in ACD on the carbon
// simulator and prints the ledger round by round. Left alone, its backlog
// cost blows through the budget within a few rounds.

use acmdp::envs::{CarbonConfig, CarbonEnv};
use acmdp::model::{paired_rollout, CompetitiveSpec, ConstantPolicy, Environment, ModelSequence, Vector};
use acmdp::safety::AcdController;

pub fn run() -> anyhow::Result<()> {
    let env = CarbonEnv::new(CarbonConfig::default())?;
    let prior = env.prior();
    let spec = CompetitiveSpec::new(2.0, 2.0)?;
    let idle = ConstantPolicy(Vector::scalar(env.params().action_bounds.lo[0]));
    let seq = ModelSequence::new(7, 0);

    let mut ctl = AcdController::new(idle.clone(), spec);
    let pair = paired_rollout(&env, &seq, &mut ctl, &prior)?;
    println!("round  proposed  executed  prior   D_h     J_h      bound");
    for r in &pair.agent.rounds {
        let jp = pair.prior.rounds[r.round - 1].cum_cost;
        println!(
            "{:>5}  {:>8.3}  {:>8.3}  {:>6.3}  {:>6.3}  {:>7.3}  {:>7.3}",
            r.round,
            r.proposed[0],
            r.action[0],
            r.prior_action[0],
            r.allowed.unwrap_or(f64::NAN),
            r.cum_cost,
            spec.bound(jp, r.round)
        );
    }
    let shielded = pair.check(&spec)?;
    println!(
        "shielded: satisfied={} worst slack {:.4}",
        shielded.satisfied, shielded.worst_slack
    );

    let mut bare = AcdController::new(idle, spec).shielded(false);
    let unshielded = paired_rollout(&env, &seq, &mut bare, &prior)?.check(&spec)?;
    println!(
        "unshielded: satisfied={} first violation at round {:?}",
        unshielded.satisfied, unshielded.first_violation
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
