//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line with its
//! measured quantity and pinned tolerance; the test fails if any line is `FAIL`.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use acmdp::envs::{AnyEnv, AnyPrior, CarbonConfig, EnvConfig, InferenceConfig, ModelClass};
use acmdp::harness::{eval_sequence, execute, read_csv, train_sequence, ExperimentConfig, MetricsRow};
use acmdp::learner::{
    acrl_train, baseline_crl, baseline_rl, play, GridConfig, GridPlanner, Mode, Planner, TrainConfig, TreeGreedy,
    TreePlanner,
};
use acmdp::model::{
    counter_uniform, distance, paired_rollout, Action, CompetitiveSpec, ConstantPolicy, Direct, Environment, Lipschitz,
    ModelSequence, Observation, Perturbation, Policy, UniformPolicy, Vector,
};
use acmdp::oracle::{
    exact_dp, exact_dp_model, exhaustive_safety_check, load_fixtures, theorem_check, IndependentAcd, TinyEnv, TinyMdp,
};
use acmdp::safety::{SafetyLedger, SensitivityTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn line(id: usize, name: &str, (pass, detail): &Outcome, took: Duration) {
    // Written straight to the process stdout so the lines survive output capture.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{} [{id:>2}] {name}: {detail} ({:.1}s)",
        if *pass { "PASS" } else { "FAIL" },
        took.as_secs_f64()
    );
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixtures() -> Vec<Arc<TinyMdp>> {
    load_fixtures(&fixtures_dir())
        .unwrap()
        .into_iter()
        .map(Arc::new)
        .collect()
}

fn specs(t: &TinyMdp) -> Vec<CompetitiveSpec> {
    t.specs
        .iter()
        .map(|s| CompetitiveSpec::new(s[0], s[1]).unwrap())
        .collect()
}

fn grid_envs() -> Vec<AnyEnv> {
    vec![
        EnvConfig::Carbon(CarbonConfig::default()).build().unwrap(),
        EnvConfig::Inference(InferenceConfig::default()).build().unwrap(),
    ]
}

fn grid_planner(env: &AnyEnv, spec: CompetitiveSpec, mode: Mode) -> GridPlanner<AnyEnv, AnyPrior> {
    GridPlanner::new(
        env.candidates().unwrap(),
        env.prior(),
        spec,
        &GridConfig::default(),
        env.exogenous().nominal(),
        mode,
    )
    .unwrap()
}

/// 1. Exhaustive anytime safety on the shipped fixtures, under 30 s.
fn exhaustive_safety() -> Outcome {
    let t0 = Instant::now();
    let all = fixtures();
    let (mut leaves, mut violations, mut disagreements, mut checks) = (0, 0, 0, 0);
    for t in &all {
        for spec in specs(t) {
            let r = exhaustive_safety_check(t, spec).unwrap();
            leaves += r.leaves;
            violations += r.violations;
            disagreements += r.disagreements;
            checks += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        all.len() >= 3 && violations == 0 && disagreements == 0 && secs < 30.0,
        format!(
            "{} fixtures, {checks} specs, {leaves} leaves, {violations} violations, {disagreements} disagreements with the independent rule; need >= 3 fixtures, 0, 0, < 30 s",
            all.len()
        ),
    )
}

/// Constant action at the lower bound on even episodes, upper bound on odd ones.
fn extreme(env: &AnyEnv, i: usize) -> ConstantPolicy {
    let b = &env.params().action_bounds;
    ConstantPolicy(Vector::scalar(if i.is_multiple_of(2) { b.lo[0] } else { b.hi[0] }))
}

/// 2. Zero violations for ACD over adversarial, random and trained ML policies.
fn statistical_safety() -> Outcome {
    const N: usize = 10_000;
    let t0 = Instant::now();
    let mut total = 0usize;
    let mut violations = 0usize;
    let mut per_kind: HashMap<&str, usize> = HashMap::new();
    for env in grid_envs() {
        let prior = env.prior();
        let train: Vec<ModelSequence> = (1..=100).map(|k| train_sequence(&env, 0, k)).collect();
        let free = CompetitiveSpec::new(2.0, 2.0).unwrap();
        let rl = baseline_rl(
            &env,
            &prior,
            &grid_planner(&env, free, Mode::Unconstrained),
            free,
            &TrainConfig::default(),
            &train,
        )
        .unwrap()
        .policy;
        let eval: Vec<ModelSequence> = (1..=N).map(|i| eval_sequence(&env, 0, i)).collect();
        let bounds = env.params().action_bounds.clone();
        for lambda in [0.0, 2.0, 6.0] {
            for b in [2.0, 6.0] {
                let spec = CompetitiveSpec::new(lambda, b).unwrap();
                let acrl = acrl_train(
                    &env,
                    &prior,
                    &grid_planner(&env, spec, Mode::Acd),
                    spec,
                    &TrainConfig::default(),
                    &train,
                )
                .unwrap()
                .policy;
                let mut tally = |kind: &'static str, bad: bool| {
                    total += 1;
                    if bad {
                        violations += 1;
                        *per_kind.entry(kind).or_default() += 1;
                    }
                };
                for (i, s) in eval.iter().enumerate() {
                    let bad = |(_, r): (_, acmdp::safety::AnytimeReport)| !r.satisfied;
                    tally(
                        "adversarial",
                        bad(play(&env, s, extreme(&env, i), &prior, spec, true).unwrap()),
                    );
                    let random = UniformPolicy {
                        seed: s.episode_seed,
                        bounds: bounds.clone(),
                    };
                    tally("random", bad(play(&env, s, random, &prior, spec, true).unwrap()));
                    tally("acrl", bad(play(&env, s, acrl.clone(), &prior, spec, true).unwrap()));
                    tally("rl", bad(play(&env, s, rl.clone(), &prior, spec, true).unwrap()));
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        violations == 0 && secs < 300.0,
        format!(
            "{violations} violations in {total} ACD episodes (2 envs x 6 specs x 4 ML policies x {N}){}; need 0, < 300 s",
            if per_kind.is_empty() { String::new() } else { format!(" {per_kind:?}") }
        ),
    )
}

/// 3. Unshielded RL and CRL violate on carbon at λ = b = 2.
fn violation_contrast() -> Outcome {
    let env = EnvConfig::Carbon(CarbonConfig::default()).build().unwrap();
    let prior = env.prior();
    let spec = CompetitiveSpec::new(2.0, 2.0).unwrap();
    let train: Vec<ModelSequence> = (1..=300).map(|k| train_sequence(&env, 0, k)).collect();
    let cfg = TrainConfig::default();
    let rl = baseline_rl(
        &env,
        &prior,
        &grid_planner(&env, spec, Mode::Unconstrained),
        spec,
        &cfg,
        &train,
    )
    .unwrap();
    let crl = baseline_crl(
        &env,
        &prior,
        &grid_planner(&env, spec, Mode::Lagrangian),
        spec,
        &cfg,
        &train,
    )
    .unwrap();
    let rate = |policy: &dyn Fn(&ModelSequence) -> bool| {
        (1..=1000).filter(|&i| policy(&eval_sequence(&env, 0, i))).count() as f64 / 1000.0
    };
    let r_rl = rate(&|s| {
        !play(&env, s, rl.policy.clone(), &prior, spec, false)
            .unwrap()
            .1
            .satisfied
    });
    let r_crl = rate(&|s| {
        !play(&env, s, crl.policy.clone(), &prior, spec, false)
            .unwrap()
            .1
            .satisfied
    });
    (
        r_rl >= 0.01 && r_crl >= 0.01,
        format!("violation rate over 1000 held-out episodes: rl {r_rl:.3}, crl {r_crl:.3}; need >= 0.010 each"),
    )
}

/// 4. Incremental `D_h` equals the from-scratch `max_k min_h'` recomputation.
fn budget_equivalence() -> Outcome {
    const TRAJ: usize = 100_000;
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..TRAJ {
        let h = rng.gen_range(1..=10);
        let lip = Lipschitz {
            cost: rng.gen_range(0.1..3.0),
            transition: rng.gen_range(0.0..2.0),
            prior: rng.gen_range(0.0..2.0),
        };
        let mut p = vec![1.0];
        for _ in 1..h {
            let last = *p.last().unwrap();
            p.push(last * rng.gen_range(0.0..1.1));
        }
        let (lambda, b, eps) = (
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..5.0),
            rng.gen_range(0.0..2.0),
        );
        let spec = CompetitiveSpec::new(lambda, b).unwrap();
        let table = Arc::new(SensitivityTable::new(
            &lip,
            &Perturbation::Table { values: p.clone() },
            h,
        ));
        let scratch = IndependentAcd::new(&lip, &p, h, lambda, b, eps);
        let mut ledger = SafetyLedger::new(spec, table.clone(), eps);
        let (mut costs, mut devs) = (Vec::new(), Vec::new());
        for round in 1..=h {
            let inc = ledger.allowed();
            let full = scratch.allowed(&costs, &devs);
            let err = (inc - full).abs() / inc.abs().max(full.abs()).max(1.0);
            worst = worst.max(err);
            if err > TOL {
                failures += 1;
            }
            // Spend a random share of the budget, sometimes all of it.
            let share = if rng.gen_bool(0.2) {
                1.0
            } else {
                rng.gen_range(0.0..1.0)
            };
            let mut d = share * inc / table.diagonal(round);
            while table.diagonal(round) * d > inc {
                d = f64::from_bits(d.to_bits() - 1);
            }
            let c = eps + rng.gen_range(0.0..4.0);
            ledger.close_round(c, d).unwrap();
            costs.push(c);
            devs.push(d);
        }
    }
    (
        failures == 0,
        format!("{TRAJ} trajectories, worst relative gap {worst:.2e}, {failures} rounds over {TOL:.0e}"),
    )
}

/// Policy picking ML action `choose(round, node)` over a tree, valued exactly.
fn greedy_value(planner: &TreePlanner, plan_model: usize, truth: usize) -> f64 {
    let greedy = TreeGreedy::new(planner.tree().clone(), Arc::new(planner.plan(plan_model, 0.0).unwrap()));
    planner
        .tree()
        .policy_value(planner.probabilities(truth), |h, n| greedy.choice(h, n))
}

/// 5. Value iteration against exhaustive DP, exact and sampled.
fn dp_correctness() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut mc_fail = Vec::new();
    for t in fixtures() {
        let env = TinyEnv::new(t.clone());
        let candidates = env.candidates().unwrap();
        let prior = env.prior();
        for spec in specs(&t) {
            let planner = TreePlanner::new(&candidates, &prior, spec, Mode::Acd).unwrap();
            for g in 0..t.models.len() {
                let vi = planner.plan(g, 0.0).unwrap().v(1, 0);
                let ex = exact_dp_model(&t, g, spec, true).unwrap().value;
                worst = worst.max((vi - ex).abs());
                compared += 1;
            }
            // Sampled: play the planned policy through ACD on random sequences.
            let exact = exact_dp(&t, spec, true).unwrap().value;
            let greedy = planner.policy(t.true_model, Arc::new(planner.plan(t.true_model, 0.0).unwrap()));
            let n = 4000;
            let returns: Vec<f64> = (0..n)
                .map(|i| {
                    play(&env, &ModelSequence::new(i, 0), greedy.clone(), &prior, spec, true)
                        .unwrap()
                        .0
                        .agent
                        .total_reward()
                })
                .collect();
            let mean = returns.iter().sum::<f64>() / n as f64;
            let sd = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let se = sd / (n as f64).sqrt();
            if (mean - exact).abs() > 3.0 * se + 1e-12 {
                mc_fail.push(format!(
                    "{} λ={} b={}: {mean:.4} vs {exact:.4} ± {:.4}",
                    t.name,
                    spec.lambda,
                    spec.b,
                    3.0 * se
                ));
            }
        }
    }
    (
        worst <= TOL && mc_fail.is_empty(),
        format!(
            "{compared} (fixture, spec, model) values, max |VI - exact| {worst:.1e} (tol {TOL:.0e}); sampled means outside 3σ: {}",
            if mc_fail.is_empty() { "none".to_string() } else { mc_fail.join("; ") }
        ),
    )
}

/// 6. The regret bound on every fixture and spec.
fn theorem_bound() -> Outcome {
    const TOL: f64 = 1e-9;
    let (mut checks, mut held, mut grid_limited, mut zero_gap_cases) = (0, 0, 0, 0);
    let mut fails = Vec::new();
    for t in fixtures() {
        for spec in specs(&t) {
            let r = theorem_check(&t, spec).unwrap();
            checks += 1;
            grid_limited += r.grid_limited as usize;
            zero_gap_cases += r.budget_covers_eta as usize;
            if r.holds(TOL) {
                held += 1;
            } else {
                fails.push(format!(
                    "{} λ={} b={}: gap {:.4} bound {:.4}",
                    r.fixture, r.lambda, r.b, r.gap, r.bound
                ));
            }
        }
    }
    (
        held == checks,
        format!(
            "{held}/{checks} hold (tol {TOL:.0e}); {zero_gap_cases} with budget covering η have zero gap; {grid_limited} grid-limited cases checked against the projection bound{}",
            if fails.is_empty() { String::new() } else { format!("; {}", fails.join("; ")) }
        ),
    )
}

fn final_window_regret(dir: &Path, window: usize) -> Vec<(u64, f64)> {
    let rows: Vec<MetricsRow> = read_csv(&dir.join("metrics.csv")).unwrap();
    let mut by_seed: Vec<(u64, Vec<f64>)> = Vec::new();
    for r in rows {
        match by_seed.iter_mut().find(|(s, _)| *s == r.seed) {
            Some((_, v)) => v.push(r.regret),
            None => by_seed.push((r.seed, vec![r.regret])),
        }
    }
    by_seed
        .into_iter()
        .map(|(s, v)| (s, v[v.len() - window..].iter().sum::<f64>() / window as f64))
        .collect()
}

/// 7. Final-window regret is nonincreasing in λ, within one paired-seed SE.
fn tradeoff_ordering() -> Outcome {
    let t0 = Instant::now();
    let lambdas = [2.0, 6.0, 10.0];
    let base = r#"
name = "ordering"
roster = ["acrl"]
episodes = 500
seeds = "0..5"
horizon = 24
window = 50
checkpoint_every = 0
spec = { lambda = 2.0, b = 2.0 }
reference = { source = "trained", episodes = 500 }
[env]
kind = "carbon"
"#;
    let cfg = ExperimentConfig::from_toml(base).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut finals = Vec::new();
    for &l in &lambdas {
        let c = cfg.with_param(acmdp::harness::SweepParam::Lambda, l).unwrap();
        let dir = tmp.path().join(format!("lambda={l}"));
        let s = execute(&c, &dir, None).unwrap();
        assert!(s.passed());
        finals.push(final_window_regret(&dir, 50));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for w in 0..lambdas.len() - 1 {
        let diffs: Vec<f64> = finals[w]
            .iter()
            .zip(&finals[w + 1])
            .map(|(a, b)| {
                assert_eq!(a.0, b.0);
                b.1 - a.1
            })
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let se = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        ok &= mean <= se;
        parts.push(format!(
            "Δ(λ {}→{}) = {mean:+.3} (SE {se:.3})",
            lambdas[w],
            lambdas[w + 1]
        ));
    }
    let means: Vec<String> = finals
        .iter()
        .map(|f| format!("{:.3}", f.iter().map(|x| x.1).sum::<f64>() / f.len() as f64))
        .collect();
    let secs = t0.elapsed().as_secs_f64();
    (
        ok && secs < 1800.0,
        format!(
            "mean final-window regret at λ = 2, 6, 10: {}; {}; need each Δ <= 1 SE, < 1800 s",
            means.join(", "),
            parts.join(", ")
        ),
    )
}

/// 8. Pseudo-regret `PReg(k)/k` halves from the first decile to the end of a K = 2000 run.
fn learning_shape() -> Outcome {
    const K: usize = 2000;
    let t = Arc::new(TinyMdp::load(&fixtures_dir().join("slippery.toml")).unwrap());
    let env = TinyEnv::new(t.clone());
    let prior = env.prior();
    let spec = CompetitiveSpec::new(1.0, 1.0).unwrap();
    let planner = TreePlanner::new(&env.candidates().unwrap(), &prior, spec, Mode::Acd).unwrap();
    let v_circ = exact_dp(&t, spec, true).unwrap().value;
    let values: Vec<f64> = (0..t.models.len())
        .map(|g| greedy_value(&planner, g, t.true_model))
        .collect();
    let mut good = 0;
    let mut parts = Vec::new();
    for seed in 0..5 {
        let seqs: Vec<ModelSequence> = (1..=K).map(|k| train_sequence(&env, seed, k)).collect();
        let log = acrl_train(&env, &prior, &planner, spec, &TrainConfig::default(), &seqs).unwrap();
        let mut cum = 0.0;
        let mut first = 0.0;
        for (i, e) in log.episodes.iter().enumerate() {
            cum += v_circ - values[e.model];
            if i + 1 == K / 10 {
                first = cum / (K / 10) as f64;
            }
        }
        let last = cum / K as f64;
        let drop = if first > 0.0 { 1.0 - last / first } else { f64::NAN };
        good += (first > 0.0 && drop >= 0.5 || first == 0.0 && last == 0.0) as usize;
        parts.push(format!("{first:.3}→{last:.3}"));
    }
    (
        good >= 4,
        format!(
            "PReg(k)/k at k = {} and {K} per seed: {}; {good}/5 seeds drop >= 50%, need >= 4",
            K / 10,
            parts.join(", ")
        ),
    )
}

/// Prior action, replaced by a uniform draw with probability 0.3 per round.
#[derive(Clone)]
struct Jitter {
    prior: AnyPrior,
    seed: u64,
    lo: f64,
    hi: f64,
}

impl Policy for Jitter {
    fn act(&self, obs: &Observation<'_>) -> Action {
        if counter_uniform(self.seed, obs.round, 0) < 0.3 {
            Vector::scalar(self.lo + (self.hi - self.lo) * counter_uniform(self.seed, obs.round, 1))
        } else {
            self.prior.act(obs)
        }
    }
}

/// 9. State-perturbation and cost-gap bounds on paired perturbed rollouts.
fn perturbation_bounds() -> Outcome {
    const N: u64 = 100_000;
    const REL: f64 = 1e-9;
    let mut parts = Vec::new();
    let mut ok = true;
    for env in grid_envs() {
        let p = env.params().clone();
        let table = SensitivityTable::from_params(&p);
        let (mut state_fail, mut cost_fail, mut rounds) = (0, 0, 0);
        for i in 0..N {
            let seq = ModelSequence::new(7_000_000 + i, i as usize % env.n_windows());
            let mut agent = Direct(Jitter {
                prior: env.prior(),
                seed: i,
                lo: p.action_bounds.lo[0],
                hi: p.action_bounds.hi[0],
            });
            let pair = paired_rollout(&env, &seq, &mut agent, &env.prior()).unwrap();
            let d: Vec<f64> = pair.agent.rounds.iter().map(|r| r.deviation).collect();
            for (h, (a, b)) in pair.agent.rounds.iter().zip(&pair.prior.rounds).enumerate() {
                let h = h + 1;
                rounds += 1;
                let state_bound: f64 =
                    p.lipschitz.transition * (1..h).map(|i| p.perturbation.at(h - 1 - i) * d[i - 1]).sum::<f64>();
                if distance(&a.state, &b.state) > state_bound * (1.0 + REL) + 1e-12 {
                    state_fail += 1;
                }
                let cost_bound: f64 = (1..=h).map(|j| table.q(j, h) * d[j - 1]).sum();
                if (a.cost - b.cost).abs() > cost_bound * (1.0 + REL) + 1e-12 {
                    cost_fail += 1;
                }
            }
        }
        ok &= state_fail == 0 && cost_fail == 0;
        parts.push(format!(
            "{}: {rounds} rounds, {state_fail} state / {cost_fail} cost exceptions",
            env.name()
        ));
    }
    (ok, format!("{N} paired rollouts per env; {}; need 0", parts.join("; ")))
}

/// 10. Repeated runs, at different thread counts, write identical bytes.
fn reproducibility() -> Outcome {
    let cfg = ExperimentConfig::from_toml(
        r#"
name = "repro"
roster = ["acrl", "rl", "crl", "rl+acd", "random+acd", "prior"]
episodes = 40
eval_episodes = 20
seeds = "0..3"
horizon = 12
window = 10
checkpoint_every = 2
spec = { lambda = 2.0, b = 2.0 }
reference = { source = "trained", episodes = 30 }
[env]
kind = "carbon"
"#,
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let runs = [(Some(1), "a"), (Some(1), "b"), (Some(3), "c")];
    for (jobs, name) in runs {
        execute(&cfg, &tmp.path().join(name), jobs).unwrap();
    }
    let files = ["metrics.csv", "eval.csv", "learning_curve.csv", "summary.json"];
    let mut same = true;
    for f in files {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        for (_, other) in &runs[1..] {
            same &= a == std::fs::read(tmp.path().join(other).join(f)).unwrap();
        }
    }
    let rows = std::fs::read_to_string(tmp.path().join("a/metrics.csv"))
        .unwrap()
        .lines()
        .count()
        - 2;
    (
        same,
        format!(
            "3 runs (1, 1 and 3 threads), {} files, {rows} metrics rows each, byte-identical: {same}",
            files.len()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("anytime safety, exhaustive", exhaustive_safety),
        ("anytime safety, statistical", statistical_safety),
        ("violation contrast", violation_contrast),
        ("budget-update equivalence", budget_equivalence),
        ("DP correctness", dp_correctness),
        ("regret bound on fixtures", theorem_bound),
        ("trade-off ordering in λ", tradeoff_ordering),
        ("learning shape", learning_shape),
        ("perturbation bounds", perturbation_bounds),
        ("reproducibility", reproducibility),
    ];
    let _ = writeln!(std::io::stdout());
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        line(i + 1, name, &outcome, t0.elapsed());
        if !outcome.0 {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
