// A small experiment through the harness: config in, CSVs and a summary out.

use acmdp::harness::{execute, read_csv, CurveRow, ExperimentConfig};

const CONFIG: &str = r#"
name = "carbon-demo"
roster = ["acrl", "rl", "random+acd", "prior"]
episodes = 60
eval_episodes = 40
seeds = "0..2"
window = 20
checkpoint_every = 0

[spec]
lambda = 2.0
b = 2.0

[env]
kind = "carbon"
horizon = 12

[reference]
episodes = 60
"#;

pub fn run() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let dir = std::env::temp_dir().join(format!("acmdp-demo-{}", &cfg.hash()?[..12]));
    let summary = execute(&cfg, &dir, None)?;
    for p in &summary.policies {
        println!(
            "{:<11} final-window regret {:>8.3}  held-out violation rate {:.3}",
            p.policy, p.final_window_regret, p.violation_rate
        );
    }
    let curve: Vec<CurveRow> = read_csv(&dir.join("learning_curve.csv"))?;
    println!("{} learning-curve rows in {}", curve.len(), dir.display());
    println!("safety gate passed: {}", summary.passed());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
