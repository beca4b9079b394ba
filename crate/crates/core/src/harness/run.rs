use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EnvChoice, ExperimentConfig, LoadedConfig, ReferenceSource, RosterEntry, MAX_EPISODES};
use super::metrics::{fill_windowed, learning_curve, mean_ci95, write_csv, MetricsRow, CURVE_HEADER, METRICS_HEADER};
use crate::envs::{AnyEnv, AnyPrior, EnvConfig, ModelClass};
use crate::error::{Error, Result};
use crate::learner::{
    play, train, Checkpoint, GridConfig, GridPlanner, Mode, Planner, TrainConfig, TrainLog, TreePlanner,
};
use crate::model::{prior_rollout, CompetitiveSpec, Environment, ModelSequence, Policy, RoundContext, UniformPolicy};
use crate::oracle::{TinyEnv, TinyMdp, TinyPrior};
use crate::safety::AnytimeReport;

const EVAL_BASE: u64 = 1 << 40;
const REFERENCE_BASE: u64 = 1 << 41;

/// Training sequence `k` (1-based) of `seed`.
pub fn train_sequence<E: Environment + ?Sized>(env: &E, seed: u64, k: usize) -> ModelSequence {
    ModelSequence::new(seed * MAX_EPISODES as u64 + k as u64, (k - 1) % env.n_windows())
}

/// Held-out sequence `i` (1-based) of `seed`; disjoint from every training seed.
pub fn eval_sequence<E: Environment + ?Sized>(env: &E, seed: u64, i: usize) -> ModelSequence {
    ModelSequence::new(
        EVAL_BASE + seed * MAX_EPISODES as u64 + i as u64,
        (i - 1) % env.n_windows(),
    )
}

/// Sequence `k` of the range the reference learners train on.
pub fn reference_sequence<E: Environment + ?Sized>(env: &E, k: usize) -> ModelSequence {
    ModelSequence::new(REFERENCE_BASE + k as u64, (k - 1) % env.n_windows())
}

/// An environment, its prior and a planner factory.
pub trait Bench: Sync {
    type Env: Environment;
    type Prior: Policy + Clone;
    type Planner: Planner;

    fn env(&self) -> &Self::Env;

    fn prior(&self) -> &Self::Prior;

    fn planner(&self, spec: CompetitiveSpec, mode: Mode) -> Result<Self::Planner>;
}

/// Carbon or inference environment with the aggregated grid planner.
pub struct GridBench {
    env: AnyEnv,
    prior: AnyPrior,
    candidates: Vec<AnyEnv>,
    nominal: Vec<RoundContext>,
    grid: GridConfig,
}

impl GridBench {
    pub fn new(cfg: &EnvConfig, grid: GridConfig) -> Result<Self> {
        let env = cfg.build()?;
        let prior = env.prior();
        let candidates = env.candidates()?;
        let nominal = env.exogenous().nominal();
        Ok(GridBench {
            env,
            prior,
            candidates,
            nominal,
            grid,
        })
    }
}

impl Bench for GridBench {
    type Env = AnyEnv;
    type Prior = AnyPrior;
    type Planner = GridPlanner<AnyEnv, AnyPrior>;

    fn env(&self) -> &AnyEnv {
        &self.env
    }

    fn prior(&self) -> &AnyPrior {
        &self.prior
    }

    fn planner(&self, spec: CompetitiveSpec, mode: Mode) -> Result<Self::Planner> {
        GridPlanner::new(
            self.candidates.clone(),
            self.prior,
            spec,
            &self.grid,
            self.nominal.clone(),
            mode,
        )
    }
}

/// Tiny fixture with the exact history-tree planner.
pub struct TinyBench {
    env: TinyEnv,
    prior: TinyPrior,
    candidates: Vec<TinyEnv>,
}

impl TinyBench {
    pub fn new(mdp: Arc<TinyMdp>) -> Result<Self> {
        let env = TinyEnv::new(mdp);
        let prior = env.prior();
        let candidates = env.candidates()?;
        Ok(TinyBench { env, prior, candidates })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(Arc::new(TinyMdp::load(path)?))
    }
}

impl Bench for TinyBench {
    type Env = TinyEnv;
    type Prior = TinyPrior;
    type Planner = TreePlanner;

    fn env(&self) -> &TinyEnv {
        &self.env
    }

    fn prior(&self) -> &TinyPrior {
        &self.prior
    }

    fn planner(&self, spec: CompetitiveSpec, mode: Mode) -> Result<TreePlanner> {
        TreePlanner::new(&self.candidates, &self.prior, spec, mode)
    }
}

/// Builds the bench an experiment asks for and hands it to `f`.
macro_rules! with_bench {
    ($cfg:expr, |$b:ident| $body:expr) => {{
        let cfg: &ExperimentConfig = $cfg;
        match &cfg.env {
            EnvChoice::Carbon(c) => {
                let mut e = EnvConfig::Carbon(c.clone());
                if let Some(h) = cfg.horizon {
                    e.set_horizon(h);
                }
                let $b = GridBench::new(&e, cfg.grid.clone())?;
                $body
            }
            EnvChoice::Inference(c) => {
                let mut e = EnvConfig::Inference(c.clone());
                if let Some(h) = cfg.horizon {
                    e.set_horizon(h);
                }
                let $b = GridBench::new(&e, cfg.grid.clone())?;
                $body
            }
            EnvChoice::Tiny { fixture } => {
                let $b = TinyBench::load(fixture)?;
                $body
            }
        }
    }};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// `π̂*`: the unconstrained learner, played without projection.
    Unconstrained,
    /// `π̂°`: ACRL, played through ACD.
    AcdOptimal,
}

impl ReferenceKind {
    fn mode(self) -> Mode {
        match self {
            ReferenceKind::Unconstrained => Mode::Unconstrained,
            ReferenceKind::AcdOptimal => Mode::Acd,
        }
    }
}

/// Trains a reference learner on the reference seed range and freezes it.
pub fn reference_policy<B: Bench>(
    bench: &B,
    cfg: &ExperimentConfig,
    kind: ReferenceKind,
) -> Result<TrainLog<<B::Planner as Planner>::Policy>> {
    let k = cfg.reference.episodes;
    if k == 0 {
        return Err(Error::Refused(
            "a reference policy needs at least one training episode".into(),
        ));
    }
    let spec = cfg.competitive_spec()?;
    let planner = bench.planner(spec, kind.mode())?;
    let seqs: Vec<ModelSequence> = (1..=k).map(|i| reference_sequence(bench.env(), i)).collect();
    let tc = TrainConfig {
        shield: None,
        ..cfg.train.clone()
    };
    train(bench.env(), bench.prior(), &planner, spec, &tc, &seqs, |_| Ok(()))
}

struct References<P> {
    star: Option<P>,
    circ: Option<P>,
}

impl<P: Policy + Clone> References<P> {
    /// `(star return, circ return)` on `seq`; the prior stands in for a missing reference.
    fn returns<B: Bench<Prior = Pr>, Pr: Policy + Clone>(
        &self,
        b: &B,
        spec: CompetitiveSpec,
        seq: &ModelSequence,
    ) -> Result<(f64, f64)> {
        let prior_return = || -> Result<f64> { Ok(prior_rollout(b.env(), seq, b.prior())?.total_reward()) };
        let star = match &self.star {
            Some(p) => play(b.env(), seq, p.clone(), b.prior(), spec, false)?
                .0
                .agent
                .total_reward(),
            None => prior_return()?,
        };
        let circ = match &self.circ {
            Some(p) => play(b.env(), seq, p.clone(), b.prior(), spec, true)?
                .0
                .agent
                .total_reward(),
            None => prior_return()?,
        };
        Ok((star, circ))
    }
}

fn row(
    episode: usize,
    entry: RosterEntry,
    seed: u64,
    ret: f64,
    refs: (f64, f64),
    report: &AnytimeReport,
) -> MetricsRow {
    MetricsRow {
        episode,
        policy: entry.id().to_string(),
        seed,
        return_: ret,
        regret: refs.0 - ret,
        windowed_regret: 0.0,
        pseudo_regret: refs.1 - ret,
        violated: !report.satisfied,
        worst_slack: report.worst_slack,
        max_violation_ratio: report.max_violation_ratio,
    }
}

struct SeedRefs {
    train: Vec<(f64, f64)>,
    eval: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn run_entry<B: Bench>(
    b: &B,
    cfg: &ExperimentConfig,
    spec: CompetitiveSpec,
    entry: RosterEntry,
    seed: u64,
    refs: &SeedRefs,
    checkpoints: Option<&Path>,
) -> Result<(Vec<MetricsRow>, Vec<MetricsRow>)> {
    let env = b.env();
    let train_seqs: Vec<ModelSequence> = (1..=cfg.episodes).map(|k| train_sequence(env, seed, k)).collect();
    let eval_seqs: Vec<ModelSequence> = (1..=cfg.eval_episodes).map(|i| eval_sequence(env, seed, i)).collect();
    let mut train_rows = Vec::with_capacity(train_seqs.len());
    let mut eval_rows = Vec::with_capacity(eval_seqs.len());

    // Plays a fixed policy on a list of sequences.
    let fixed = |seqs: &[ModelSequence], refs: &[(f64, f64)], rows: &mut Vec<MetricsRow>| -> Result<()> {
        for (i, seq) in seqs.iter().enumerate() {
            let (pair, report) = match entry {
                RosterEntry::Prior => play(env, seq, b.prior().clone(), b.prior(), spec, false)?,
                RosterEntry::RandomAcd => {
                    let ml = UniformPolicy {
                        seed: seq.episode_seed,
                        bounds: env.params().action_bounds.clone(),
                    };
                    play(env, seq, ml, b.prior(), spec, true)?
                }
                _ => unreachable!("learners are handled separately"),
            };
            rows.push(row(i + 1, entry, seed, pair.agent.total_reward(), refs[i], &report));
        }
        Ok(())
    };

    if entry.learns() {
        let mode = match entry {
            RosterEntry::Acrl => Mode::Acd,
            RosterEntry::Crl => Mode::Lagrangian,
            _ => Mode::Unconstrained,
        };
        let shielded = entry.acd_wrapped();
        let planner = b.planner(spec, mode)?;
        let tc = TrainConfig {
            shield: Some(shielded),
            ..cfg.train.clone()
        };
        let mut window = 0usize;
        let log = train(env, b.prior(), &planner, spec, &tc, &train_seqs, |snap| {
            window += 1;
            if let Some(dir) = checkpoints {
                if cfg.checkpoint_every > 0 && window.is_multiple_of(cfg.checkpoint_every) {
                    let ck = Checkpoint {
                        episode: snap.episode as u64,
                        model: snap.model as u32,
                        losses: snap.losses.to_vec(),
                        membership: snap.membership.to_vec(),
                        tables: snap.tables.clone(),
                    };
                    let path = dir.join(format!("{}-seed{}-ep{:06}.ckpt", entry.id(), seed, snap.episode));
                    ck.write_to(std::io::BufWriter::new(fs::File::create(path)?))?;
                }
            }
            Ok(())
        })?;
        for (i, e) in log.episodes.iter().enumerate() {
            let report = AnytimeReport {
                satisfied: !e.violated,
                worst_slack: e.worst_slack,
                first_violation: None,
                max_violation_ratio: e.max_violation_ratio,
            };
            train_rows.push(row(e.episode, entry, seed, e.return_, refs.train[i], &report));
        }
        for (i, seq) in eval_seqs.iter().enumerate() {
            let (pair, report) = play(env, seq, log.policy.clone(), b.prior(), spec, shielded)?;
            eval_rows.push(row(
                i + 1,
                entry,
                seed,
                pair.agent.total_reward(),
                refs.eval[i],
                &report,
            ));
        }
    } else {
        fixed(&train_seqs, &refs.train, &mut train_rows)?;
        fixed(&eval_seqs, &refs.eval, &mut eval_rows)?;
    }
    fill_windowed(&mut train_rows, cfg.window);
    fill_windowed(&mut eval_rows, cfg.window);
    Ok((train_rows, eval_rows))
}

/// Per-policy totals of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub acd_wrapped: bool,
    pub train_rows: usize,
    pub eval_rows: usize,
    pub violations: usize,
    /// Mean over seeds of the last-window mean training regret.
    pub final_window_regret: f64,
    pub final_window_regret_ci95: f64,
    /// Violated fraction of the evaluation rows (training rows when there are none).
    pub violation_rate: f64,
    pub mean_eval_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub config_hash: String,
    pub lambda: f64,
    pub b: f64,
    pub seeds: String,
    pub policies: Vec<PolicySummary>,
    /// Violated rows of ACD-wrapped policies; must be zero.
    pub acd_violations: usize,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.acd_violations == 0
    }

    pub fn policy(&self, id: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == id)
    }
}

/// All rows of a run, in roster order, then seed, then episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRows {
    pub train: Vec<MetricsRow>,
    pub eval: Vec<MetricsRow>,
}

/// Trains and evaluates the roster on `bench` without touching the file system
/// except for checkpoints.
pub fn run_bench<B: Bench>(bench: &B, cfg: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<RunRows> {
    let spec = cfg.competitive_spec()?;
    let refs = match cfg.reference.source {
        ReferenceSource::Prior => References { star: None, circ: None },
        ReferenceSource::Trained => {
            let (star, circ) = rayon::join(
                || reference_policy(bench, cfg, ReferenceKind::Unconstrained),
                || reference_policy(bench, cfg, ReferenceKind::AcdOptimal),
            );
            References {
                star: Some(star?.policy),
                circ: Some(circ?.policy),
            }
        }
    };
    let seeds: Vec<u64> = cfg.seeds.iter().collect();
    let env = bench.env();
    let seed_refs: Vec<SeedRefs> = seeds
        .par_iter()
        .map(|&s| -> Result<SeedRefs> {
            let train = (1..=cfg.episodes)
                .map(|k| refs.returns(bench, spec, &train_sequence(env, s, k)))
                .collect::<Result<Vec<_>>>()?;
            let eval = (1..=cfg.eval_episodes)
                .map(|i| refs.returns(bench, spec, &eval_sequence(env, s, i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SeedRefs { train, eval })
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(RosterEntry, usize)> = cfg
        .roster
        .iter()
        .flat_map(|&e| (0..seeds.len()).map(move |i| (e, i)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(e, i)| run_entry(bench, cfg, spec, e, seeds[i], &seed_refs[i], checkpoints))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = RunRows {
        train: Vec::new(),
        eval: Vec::new(),
    };
    for (t, e) in results {
        rows.train.extend(t);
        rows.eval.extend(e);
    }
    Ok(rows)
}

/// Summary statistics of `rows`.
pub fn summarize(cfg: &ExperimentConfig, hash: &str, rows: &RunRows) -> RunSummary {
    let mut policies = Vec::new();
    let mut acd_violations = 0;
    for &entry in &cfg.roster {
        let id = entry.id();
        let train: Vec<&MetricsRow> = rows.train.iter().filter(|r| r.policy == id).collect();
        let eval: Vec<&MetricsRow> = rows.eval.iter().filter(|r| r.policy == id).collect();
        let violations = train.iter().chain(&eval).filter(|r| r.violated).count();
        if entry.acd_wrapped() {
            acd_violations += violations;
        }
        let finals: Vec<f64> = cfg
            .seeds
            .iter()
            .filter_map(|s| {
                let mine: Vec<f64> = train.iter().filter(|r| r.seed == s).map(|r| r.regret).collect();
                let w = cfg.window.min(mine.len());
                (w > 0).then(|| mine[mine.len() - w..].iter().sum::<f64>() / w as f64)
            })
            .collect();
        let (final_window_regret, ci) = mean_ci95(&finals);
        let rated = if eval.is_empty() { &train } else { &eval };
        let violation_rate = if rated.is_empty() {
            0.0
        } else {
            rated.iter().filter(|r| r.violated).count() as f64 / rated.len() as f64
        };
        let mean_eval_return = if eval.is_empty() {
            f64::NAN
        } else {
            eval.iter().map(|r| r.return_).sum::<f64>() / eval.len() as f64
        };
        policies.push(PolicySummary {
            policy: id.to_string(),
            acd_wrapped: entry.acd_wrapped(),
            train_rows: train.len(),
            eval_rows: eval.len(),
            violations,
            final_window_regret,
            final_window_regret_ci95: ci,
            violation_rate,
            mean_eval_return,
        });
    }
    RunSummary {
        name: cfg.name.clone(),
        config_hash: hash.to_string(),
        lambda: cfg.spec.lambda,
        b: cfg.spec.b,
        seeds: cfg.seeds.to_string(),
        policies,
        acd_violations,
    }
}

fn pool(jobs: Option<usize>) -> Result<Option<rayon::ThreadPool>> {
    match jobs {
        None => Ok(None),
        Some(0) => Err(Error::config("--jobs must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Some)
            .map_err(|e| Error::config(format!("thread pool: {e}"))),
    }
}

/// Runs `f` on a pool of `jobs` threads, or the global pool.
pub fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(match pool(jobs)? {
        Some(p) => p.install(f),
        None => f(),
    })
}

/// Runs an experiment into `dir`: config snapshot, `metrics.csv`,
/// `eval.csv`, `learning_curve.csv`, `summary.json` and checkpoints.
pub fn execute(cfg: &ExperimentConfig, dir: &Path, jobs: Option<usize>) -> Result<RunSummary> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.canonical()?)?;
    let ck_dir = dir.join("checkpoints");
    let checkpoints = if cfg.checkpoint_every > 0 && cfg.roster.iter().any(|r| r.learns()) {
        fs::create_dir_all(&ck_dir)?;
        Some(ck_dir.as_path())
    } else {
        None
    };
    let rows = in_pool(jobs, || with_bench!(cfg, |b| run_bench(&b, cfg, checkpoints)))??;
    write_csv(&dir.join("metrics.csv"), METRICS_HEADER, &rows.train)?;
    write_csv(&dir.join("eval.csv"), METRICS_HEADER, &rows.eval)?;
    write_csv(
        &dir.join("learning_curve.csv"),
        CURVE_HEADER,
        &learning_curve(&rows.train),
    )?;
    let summary = summarize(cfg, &hash, &rows);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Provenance written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_sha256: String,
    pub config_git_blob: String,
    pub crate_version: String,
}

/// Directory of a run under `root`: `<name>-<first 12 hex digits of the config hash>`.
pub fn run_dir(cfg: &ExperimentConfig, root: &Path) -> Result<PathBuf> {
    Ok(root.join(format!("{}-{}", cfg.name, &cfg.hash()?[..12])))
}

/// [`execute`] into the run directory keyed by the config hash, stamped.
pub fn run(loaded: &LoadedConfig, root: &Path, jobs: Option<usize>) -> Result<(PathBuf, RunSummary)> {
    let cfg = &loaded.config;
    let dir = run_dir(cfg, root)?;
    fs::create_dir_all(&dir)?;
    let stamp = Stamp {
        config_sha256: cfg.hash()?,
        config_git_blob: loaded.content_hash.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    fs::write(dir.join("stamp.json"), serde_json::to_string_pretty(&stamp)?)?;
    let summary = execute(cfg, &dir, jobs)?;
    Ok((dir, summary))
}

/// Outcome of the `reference` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub kind: ReferenceKind,
    pub episodes: usize,
    pub final_model: usize,
    /// Mean return over the held-out episodes of every configured seed.
    pub mean_eval_return: f64,
    pub eval_episodes: usize,
}

/// Trains one reference, writes `reference-<kind>.ckpt` and `.json` into `dir`.
pub fn reference(
    cfg: &ExperimentConfig,
    kind: ReferenceKind,
    dir: &Path,
    jobs: Option<usize>,
) -> Result<ReferenceSummary> {
    cfg.validate()?;
    let spec = cfg.competitive_spec()?;
    let summary = in_pool(jobs, || {
        with_bench!(cfg, |b| {
            let log = reference_policy(&b, cfg, kind)?;
            let seqs: Vec<ModelSequence> = cfg
                .seeds
                .iter()
                .flat_map(|s| (1..=cfg.eval_episodes).map(move |i| (s, i)))
                .map(|(s, i)| eval_sequence(b.env(), s, i))
                .collect();
            let shielded = kind == ReferenceKind::AcdOptimal;
            let returns = seqs
                .par_iter()
                .map(|q| {
                    Ok(play(b.env(), q, log.policy.clone(), b.prior(), spec, shielded)?
                        .0
                        .agent
                        .total_reward())
                })
                .collect::<Result<Vec<f64>>>()?;
            fs::create_dir_all(dir)?;
            let name = match kind {
                ReferenceKind::Unconstrained => "unconstrained",
                ReferenceKind::AcdOptimal => "acd_optimal",
            };
            let ck = Checkpoint {
                episode: log.episodes.len() as u64,
                model: log.final_model as u32,
                losses: log.state.losses().to_vec(),
                membership: log.state.membership(cfg.train.beta.at(
                    log.episodes.len() + 1,
                    cfg.train.reward_bound,
                    b.env().params().horizon,
                )),
                tables: (*log.final_tables).clone(),
            };
            ck.write_to(std::io::BufWriter::new(fs::File::create(
                dir.join(format!("reference-{name}.ckpt")),
            )?))?;
            let s = ReferenceSummary {
                kind,
                episodes: log.episodes.len(),
                final_model: log.final_model,
                mean_eval_return: if returns.is_empty() {
                    f64::NAN
                } else {
                    returns.iter().sum::<f64>() / returns.len() as f64
                },
                eval_episodes: returns.len(),
            };
            fs::write(
                dir.join(format!("reference-{name}.json")),
                serde_json::to_string_pretty(&s)?,
            )?;
            Ok::<_, Error>(s)
        })
    })??;
    Ok(summary)
}
