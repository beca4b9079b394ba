use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use acmdp::harness::{self, ExperimentConfig, LoadedConfig, ReferenceKind, SeedRange, SweepParam};
use acmdp::Error;

/// Default output root when neither `--out` nor the config names one.
const OUT_ENV: &str = "ACMDP_OUT";

#[derive(Parser)]
#[command(name = "acmdp", version, about = "Anytime-competitive RL experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Seed range `a..b`, overriding the config.
    #[arg(long)]
    seeds: Option<SeedRange>,
    /// Output root; falls back to the config, then $ACMDP_OUT, then `runs`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Unconstrained,
    AcdOptimal,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train and evaluate the roster.
    Run(Common),
    /// One run per value of a parameter, plus an aggregated sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// lambda, b or beta0; defaults to the config's [sweep] table.
        #[arg(long)]
        param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Train and freeze a reference policy.
    Reference {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "unconstrained")]
        kind: Kind,
    },
    /// Exhaustive safety, DP agreement and bound checks on tiny fixtures.
    Verify {
        /// Fixture directory.
        #[arg(default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))]
        dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a trace CSV or a `synth:<kind>[:len[:level[:seed]]]` trace.
    TraceInfo {
        trace: String,
        #[arg(long, default_value_t = 24)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn load(c: &Common) -> Result<(LoadedConfig, PathBuf)> {
    let mut loaded = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seeds {
        loaded.config.seeds = s;
    }
    loaded.config.validate()?;
    let root = c
        .out
        .clone()
        .or_else(|| loaded.config.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    Ok((loaded, root))
}

fn report_policies(summary: &harness::RunSummary) {
    for p in &summary.policies {
        println!(
            "  {:<11} regret {:>9.4} ± {:<8.4} violation rate {:.4} ({} violated rows)",
            p.policy, p.final_window_regret, p.final_window_regret_ci95, p.violation_rate, p.violations
        );
    }
}

/// Returns true when every gate passed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Run(c) => {
            let (loaded, root) = load(&c)?;
            let (dir, summary) = harness::run(&loaded, &root, c.jobs)?;
            println!("{}", dir.display());
            report_policies(&summary);
            if !summary.passed() {
                eprintln!(
                    "ACD-wrapped policies violated the constraint {} times",
                    summary.acd_violations
                );
            }
            Ok(summary.passed())
        }
        Cmd::Sweep { common, param, values } => {
            let (loaded, root) = load(&common)?;
            let cfg = &loaded.config;
            let param = param
                .or(cfg.sweep.as_ref().map(|s| s.over))
                .context("no sweep parameter: pass --param or add a [sweep] table")?;
            let values = values
                .or_else(|| cfg.sweep.as_ref().filter(|s| s.over == param).map(|s| s.values.clone()))
                .context("no sweep values: pass --values or add them to [sweep]")?;
            let dir = harness::sweep_dir(cfg, param, &root)?;
            let s = harness::sweep(cfg, param, &values, &dir, common.jobs)?;
            println!("{}", dir.join("sweep.csv").display());
            for r in &s.rows {
                println!(
                    "  {}={:<6} {:<11} regret {:>9.4} ± {:<8.4} violation rate {:.4}",
                    param.name(),
                    r.param,
                    r.policy,
                    r.mean_regret,
                    r.ci95,
                    r.violation_rate
                );
            }
            Ok(s.passed())
        }
        Cmd::Reference { common, kind } => {
            let (loaded, root) = load(&common)?;
            let kind = match kind {
                Kind::Unconstrained => ReferenceKind::Unconstrained,
                Kind::AcdOptimal => ReferenceKind::AcdOptimal,
            };
            let dir = harness::run_dir(&loaded.config, &root)?;
            let s = harness::reference(&loaded.config, kind, &dir, common.jobs)?;
            println!("{}", dir.display());
            println!(
                "  {:?}: {} episodes, final model {}, mean held-out return {:.4} over {}",
                s.kind, s.episodes, s.final_model, s.mean_eval_return, s.eval_episodes
            );
            Ok(true)
        }
        Cmd::Verify { dir, jobs } => {
            let r = harness::in_pool(jobs, || harness::verify(&dir))??;
            if r.is_empty() {
                eprintln!("warning: no fixtures in {}", dir.display());
            }
            for c in &r.checks {
                let s = &c.safety;
                println!(
                    "{} {:<10} λ={:<5} b={:<5} leaves {:>6}  violations {}  disagreements {}  dp {}  bound {}{}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    s.fixture,
                    s.lambda,
                    s.b,
                    s.leaves,
                    s.violations,
                    s.disagreements,
                    if c.dp.iter().all(|d| d.agrees()) {
                        "ok"
                    } else {
                        "MISMATCH"
                    },
                    if c.theorem.holds(harness::DP_TOLERANCE) {
                        "ok"
                    } else {
                        "FAILS"
                    },
                    if c.theorem.grid_limited { " (grid-limited)" } else { "" },
                );
                for ce in &s.counterexamples {
                    println!("    counterexample: {ce}");
                }
            }
            Ok(r.passed())
        }
        Cmd::TraceInfo { trace, horizon, stride } => {
            let t = harness::open_trace(&trace)?;
            let i = harness::trace_info(&t, horizon, stride)?;
            println!("name      {}", i.name);
            println!("source    {:?}", i.source);
            println!("length    {}", i.len);
            println!("min       {}", i.min);
            println!("max       {}", i.max);
            println!("mean      {}", i.mean);
            println!("windows   {} (horizon {}, stride {})", i.windows, i.horizon, i.stride);
            Ok(true)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Validation(_) | Error::Refused(_)) => 2,
        Some(Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse { .. } | Error::Checkpoint(_)) => 3,
        Some(Error::SafetyFault { .. }) => 4,
        _ if e.downcast_ref::<std::io::Error>().is_some() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
