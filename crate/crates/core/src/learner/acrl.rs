use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model_class::{BetaSchedule, ModelClassState};
use super::planning::ValueTables;
use crate::error::{Error, Result};
use crate::model::{
    paired_rollout, CompetitiveSpec, Direct, Environment, EpisodeRecord, ModelSequence, PairedRollout, Policy,
};
use crate::safety::{acd_paired_rollout, AnytimeReport};

/// How the learner treats the anytime constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Plan and act through the ACD projection (ACRL).
    Acd,
    /// Ignore costs entirely (the RL baseline).
    Unconstrained,
    /// Penalize cost with a dual variable (the CRL baseline).
    Lagrangian,
}

impl Mode {
    pub fn shielded(self) -> bool {
        self == Mode::Acd
    }
}

/// A model-based planner over a finite model class.
pub trait Planner: Sync {
    type Policy: Policy + Clone;

    fn n_models(&self) -> usize;

    fn mode(&self) -> Mode;

    /// Value iteration under model `model`; `dual` is the Lagrange
    /// multiplier and is ignored outside [`Mode::Lagrangian`].
    fn plan(&self, model: usize, dual: f64) -> Result<ValueTables>;

    /// `Ṽ_1(s_1)` at the episode's initial augmented state.
    fn initial_value(&self, tables: &ValueTables, seq: &ModelSequence) -> f64;

    /// Greedy policy `argmax_ã Q̃_h(s, ã)`.
    fn policy(&self, model: usize, tables: Arc<ValueTables>) -> Self::Policy;

    /// Regression pairs `(Ṽ_{h+1}(s_{h+1}), [E_g Ṽ_{h+1} for g in 𝒢])` from
    /// one episode, with `tables` the ones that episode was played with under `model`.
    fn regression(&self, model: usize, tables: &ValueTables, rec: &EpisodeRecord) -> Vec<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub beta: BetaSchedule,
    /// Per-round reward bound used by the theoretical β schedule.
    pub reward_bound: f64,
    /// Episodes per window: dual updates and checkpoints happen at window ends.
    pub update_every: usize,
    /// Dual step size `η_ν`.
    pub dual_step: f64,
    /// Slack `B` in the expected constraint `E[J_H] ≤ (1+λ)E[J†_H] + B`;
    /// `None` means `H·b`.
    pub constraint_budget: Option<f64>,
    /// Play episodes through ACD regardless of the planner's mode; `None`
    /// follows the mode. `Some(true)` with an unconstrained planner gives
    /// the RL+ACD roster entry.
    pub shield: Option<bool>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: BetaSchedule::default(),
            reward_bound: 1.0,
            update_every: 25,
            dual_step: 0.002,
            constraint_budget: None,
            shield: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.beta.validate()?;
        if self.update_every == 0 {
            return Err(Error::config("update_every must be positive"));
        }
        if !(self.dual_step >= 0.0) {
            return Err(Error::config("dual_step must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// 1-based episode index `k`.
    pub episode: usize,
    pub seed: u64,
    pub window: usize,
    /// Model `g^k` the episode was planned with.
    pub model: usize,
    /// `|𝒢_k|`.
    pub set_size: usize,
    /// `Ṽ_1(s_1)` under `g^k`.
    pub planned_value: f64,
    #[serde(rename = "return")]
    pub return_: f64,
    pub total_cost: f64,
    pub violated: bool,
    pub worst_slack: f64,
    pub max_violation_ratio: f64,
    /// Dual variable in force during the episode.
    pub nu: f64,
}

/// State handed to the checkpoint hook at the end of each window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSnapshot<'a> {
    pub episode: usize,
    pub losses: &'a [f64],
    pub membership: &'a [bool],
    pub model: usize,
    pub tables: &'a ValueTables,
}

#[derive(Debug, Clone)]
pub struct TrainLog<P> {
    pub mode: Mode,
    pub episodes: Vec<EpisodeLog>,
    pub state: ModelClassState,
    /// Least-squares fit after the last episode.
    pub final_model: usize,
    pub final_dual: f64,
    pub final_tables: Arc<ValueTables>,
    /// Greedy policy of the final fit, frozen.
    pub policy: P,
}

impl<P> TrainLog<P> {
    pub fn violations(&self) -> usize {
        self.episodes.iter().filter(|e| e.violated).count()
    }
}

/// One paired episode of a frozen policy, shielded or not.
pub fn play<E, M, P>(
    env: &E,
    seq: &ModelSequence,
    ml: M,
    prior: &P,
    spec: CompetitiveSpec,
    shielded: bool,
) -> Result<(PairedRollout, AnytimeReport)>
where
    E: Environment + ?Sized,
    M: Policy,
    P: Policy + ?Sized,
{
    let pair = if shielded {
        acd_paired_rollout(env, seq, ml, prior, spec)?
    } else {
        paired_rollout(env, seq, &mut Direct(ml), prior)?
    };
    let report = pair.check(&spec)?;
    Ok((pair, report))
}

/// The optimistic model-based loop shared by ACRL and both baselines.
///
/// Episode `k` plays `sequences[k-1]` on the true environment `env`: it picks
/// the model in `𝒢_k` with the largest `Ṽ_1(s_1)`, acts greedily on its tables
/// (through ACD in [`Mode::Acd`]), then refits and shrinks the set.
pub fn train<E, P, L>(
    env: &E,
    prior: &P,
    planner: &L,
    spec: CompetitiveSpec,
    cfg: &TrainConfig,
    sequences: &[ModelSequence],
    mut on_window: impl FnMut(&WindowSnapshot<'_>) -> Result<()>,
) -> Result<TrainLog<L::Policy>>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    L: Planner,
{
    cfg.validate()?;
    let mode = planner.mode();
    let shielded = cfg.shield.unwrap_or(mode.shielded());
    let horizon = env.params().horizon;
    let n = planner.n_models();
    if n == 0 {
        return Err(Error::config("empty model class"));
    }
    let budget = cfg.constraint_budget.unwrap_or(horizon as f64 * spec.b);
    let mut state = ModelClassState::new(n);
    let mut cache: HashMap<(usize, u64), Arc<ValueTables>> = HashMap::new();
    let mut dual = 0.0f64;
    let mut gaps = Vec::with_capacity(cfg.update_every);
    let mut episodes = Vec::with_capacity(sequences.len());
    let dual_key = |d: f64| if mode == Mode::Lagrangian { d.to_bits() } else { 0 };

    let ensure = |cache: &mut HashMap<(usize, u64), Arc<ValueTables>>, models: &[usize], dual: f64| -> Result<()> {
        let missing: Vec<usize> = models
            .iter()
            .copied()
            .filter(|g| !cache.contains_key(&(*g, dual_key(dual))))
            .collect();
        let planned: Vec<(usize, Result<ValueTables>)> =
            missing.par_iter().map(|&g| (g, planner.plan(g, dual))).collect();
        for (g, t) in planned {
            cache.insert((g, dual_key(dual)), Arc::new(t?));
        }
        Ok(())
    };

    for (i, seq) in sequences.iter().enumerate() {
        let k = i + 1;
        let beta = cfg.beta.at(k, cfg.reward_bound, horizon);
        let set = state.confidence_set(beta);
        ensure(&mut cache, &set, dual)?;
        let mut chosen = set[0];
        let mut best = f64::NEG_INFINITY;
        for &g in &set {
            let v = planner.initial_value(&cache[&(g, dual_key(dual))], seq);
            if v > best {
                best = v;
                chosen = g;
            }
        }
        let tables = cache[&(chosen, dual_key(dual))].clone();
        let policy = planner.policy(chosen, tables.clone());
        let (pair, report) = play(env, seq, policy, prior, spec, shielded)?;
        let data = planner.regression(chosen, &tables, &pair.agent);
        state.update(&data);
        gaps.push(pair.agent.total_cost() - (1.0 + spec.lambda) * pair.prior.total_cost() - budget);
        episodes.push(EpisodeLog {
            episode: k,
            seed: seq.episode_seed,
            window: seq.window,
            model: chosen,
            set_size: set.len(),
            planned_value: best,
            return_: pair.agent.total_reward(),
            total_cost: pair.agent.total_cost(),
            violated: !report.satisfied,
            worst_slack: report.worst_slack,
            max_violation_ratio: report.max_violation_ratio,
            nu: dual,
        });
        if k % cfg.update_every == 0 || k == sequences.len() {
            if mode == Mode::Lagrangian {
                let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
                dual = (dual + cfg.dual_step * mean).max(0.0);
                cache.retain(|key, _| key.1 == dual_key(dual));
            }
            gaps.clear();
            let membership = state.membership(cfg.beta.at(k + 1, cfg.reward_bound, horizon));
            on_window(&WindowSnapshot {
                episode: k,
                losses: state.losses(),
                membership: &membership,
                model: chosen,
                tables: &tables,
            })?;
        }
    }

    let final_model = state.fit();
    ensure(&mut cache, &[final_model], dual)?;
    let final_tables = cache[&(final_model, dual_key(dual))].clone();
    Ok(TrainLog {
        mode,
        episodes,
        final_model,
        final_dual: dual,
        policy: planner.policy(final_model, final_tables.clone()),
        final_tables,
        state,
    })
}

/// ACRL: [`train`] with a planner in [`Mode::Acd`].
pub fn acrl_train<E, P, L>(
    env: &E,
    prior: &P,
    planner: &L,
    spec: CompetitiveSpec,
    cfg: &TrainConfig,
    sequences: &[ModelSequence],
) -> Result<TrainLog<L::Policy>>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    L: Planner,
{
    expect_mode(planner, Mode::Acd)?;
    train(env, prior, planner, spec, cfg, sequences, |_| Ok(()))
}

/// Unconstrained model-based RL: no projection, costs ignored.
pub fn baseline_rl<E, P, L>(
    env: &E,
    prior: &P,
    planner: &L,
    spec: CompetitiveSpec,
    cfg: &TrainConfig,
    sequences: &[ModelSequence],
) -> Result<TrainLog<L::Policy>>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    L: Planner,
{
    expect_mode(planner, Mode::Unconstrained)?;
    train(env, prior, planner, spec, cfg, sequences, |_| Ok(()))
}

/// Constrained RL on the expected final-round constraint, by primal-dual updates.
pub fn baseline_crl<E, P, L>(
    env: &E,
    prior: &P,
    planner: &L,
    spec: CompetitiveSpec,
    cfg: &TrainConfig,
    sequences: &[ModelSequence],
) -> Result<TrainLog<L::Policy>>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    L: Planner,
{
    expect_mode(planner, Mode::Lagrangian)?;
    train(env, prior, planner, spec, cfg, sequences, |_| Ok(()))
}

fn expect_mode<L: Planner>(planner: &L, mode: Mode) -> Result<()> {
    if planner.mode() != mode {
        return Err(Error::config(format!(
            "planner is in {:?} mode, expected {mode:?}",
            planner.mode()
        )));
    }
    Ok(())
}
