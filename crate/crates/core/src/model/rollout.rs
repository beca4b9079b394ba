use serde::{Deserialize, Serialize};

use super::env::{zeros_like, Controller, Direct, Environment, Observation, Policy};
use super::sequence::ModelSequence;
use super::vector::{distance, Action, State};
use crate::error::Result;

/// Relaxation parameters `(λ, b)` of the anytime competitive constraint
/// `J_h ≤ (1+λ) J†_h + h·b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveSpec {
    pub lambda: f64,
    pub b: f64,
}

impl CompetitiveSpec {
    pub fn new(lambda: f64, b: f64) -> crate::Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0 && b.is_finite() && b >= 0.0) {
            return Err(crate::Error::validation(format!(
                "competitive spec needs lambda >= 0 and b >= 0, got ({lambda}, {b})"
            )));
        }
        Ok(CompetitiveSpec { lambda, b })
    }

    /// Right-hand side of the constraint at round `h`.
    pub fn bound(&self, prior_cum_cost: f64, round: usize) -> f64 {
        (1.0 + self.lambda) * prior_cum_cost + round as f64 * self.b
    }

    /// Per-round budget increment `λε + b`.
    pub fn increment(&self, min_cost: f64) -> f64 {
        self.lambda * min_cost + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub state: State,
    /// ML output `ã_h` before projection.
    pub proposed: Action,
    pub action: Action,
    /// `π†(x_h)` evaluated at this trajectory's own state.
    pub prior_action: Action,
    pub deviation: f64,
    pub cost: f64,
    pub reward: f64,
    /// `D_h`, when a safety ledger ran.
    pub allowed: Option<f64>,
    /// `R_{h-1}`, when a safety ledger ran.
    pub residual: Option<f64>,
    /// `J_h`.
    pub cum_cost: f64,
    /// `J†_h` from the paired prior rollout.
    pub prior_cum_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub sequence: ModelSequence,
    pub rounds: Vec<RoundRecord>,
    pub final_state: State,
}

impl EpisodeRecord {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rounds.iter().map(|r| r.reward).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_cost)
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.rounds.iter().map(|r| &r.state)
    }

    /// `slack_h = (1+λ)J†_h + h·b − J_h`, if this record is paired.
    pub fn slack(&self, spec: &CompetitiveSpec) -> Option<Vec<f64>> {
        self.rounds
            .iter()
            .map(|r| r.prior_cum_cost.map(|jp| spec.bound(jp, r.round) - r.cum_cost))
            .collect()
    }
}

/// Runs one episode with `controller`, evaluating `prior` at every visited state.
pub fn rollout<E, C, P>(env: &E, seq: &ModelSequence, controller: &mut C, prior: &P) -> Result<EpisodeRecord>
where
    E: Environment + ?Sized,
    C: Controller + ?Sized,
    P: Policy + ?Sized,
{
    let params = env.params();
    controller.begin_episode(params, env.action_grid());
    let mut state = env.initial_state(seq);
    let mut prev = zeros_like(params.action_dim());
    let mut history: Vec<State> = Vec::with_capacity(params.horizon);
    let mut past: Vec<Action> = Vec::with_capacity(params.horizon);
    let mut rounds = Vec::with_capacity(params.horizon);
    let mut cum_cost = 0.0;
    for round in 1..=params.horizon {
        let ctx = env.context(seq.window, round);
        let obs = Observation {
            round,
            state: &state,
            history: &history,
            past_actions: &past,
            context: &ctx,
            prev_action: Some(&prev),
            budget: None,
        };
        let prior_action = prior.act(&obs);
        let decision = controller.decide(&obs, &prior_action)?;
        let deviation = distance(&decision.action, &prior_action);
        let t = env.step(seq, round, &state, &decision.action, Some(&prev))?;
        controller.settle(round, t.cost, deviation)?;
        cum_cost += t.cost;
        rounds.push(RoundRecord {
            round,
            state: state.clone(),
            proposed: decision.proposed,
            action: decision.action.clone(),
            prior_action,
            deviation,
            cost: t.cost,
            reward: t.reward,
            allowed: decision.allowed,
            residual: decision.residual,
            cum_cost,
            prior_cum_cost: None,
        });
        history.push(std::mem::replace(&mut state, t.next_state));
        past.push(decision.action.clone());
        prev = decision.action;
    }
    Ok(EpisodeRecord {
        sequence: seq.clone(),
        rounds,
        final_state: state,
    })
}

/// Agent and virtual-prior trajectories on the same model sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRollout {
    pub agent: EpisodeRecord,
    pub prior: EpisodeRecord,
}

/// Rolls out the prior alone, with `J†_h` filled in from itself.
pub fn prior_rollout<E, P>(env: &E, seq: &ModelSequence, prior: &P) -> Result<EpisodeRecord>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    let mut rec = rollout(env, seq, &mut Direct(prior), prior)?;
    for r in &mut rec.rounds {
        r.prior_cum_cost = Some(r.cum_cost);
    }
    Ok(rec)
}

/// Runs the agent and the prior on identical per-round draws and attaches
/// `J†_h` to the agent record.
pub fn paired_rollout<E, C, P>(env: &E, seq: &ModelSequence, controller: &mut C, prior: &P) -> Result<PairedRollout>
where
    E: Environment + ?Sized,
    C: Controller + ?Sized,
    P: Policy + ?Sized,
{
    let prior_rec = prior_rollout(env, seq, prior)?;
    let mut agent = rollout(env, seq, controller, prior)?;
    for (a, p) in agent.rounds.iter_mut().zip(&prior_rec.rounds) {
        a.prior_cum_cost = Some(p.cum_cost);
    }
    Ok(PairedRollout {
        agent,
        prior: prior_rec,
    })
}
