use std::sync::Arc;

use serde::Serialize;

use super::ledger::SafetyLedger;
use super::projection::{ActionSet, SafeSet};
use super::sensitivity::SensitivityTable;
use crate::error::{Error, Result};
use crate::model::{
    paired_rollout, rollout, Action, BudgetView, CompetitiveSpec, Controller, Decision, EnvParams, Environment,
    EpisodeRecord, ModelSequence, Observation, PairedRollout, Policy,
};

/// Algorithm-1 executor: queries the ML policy, projects its action into the
/// current safe set and feeds realized costs back into a [`SafetyLedger`].
///
/// With `shielded = false` the ML action is executed verbatim (after
/// clipping to the action set); this is the unconstrained baseline and the
/// oracle's fault-injection mode.
pub struct AcdController<P> {
    ml: P,
    spec: CompetitiveSpec,
    table: Option<Arc<SensitivityTable>>,
    actions: Option<ActionSet>,
    shielded: bool,
    ledger: Option<SafetyLedger>,
}

impl<P: Policy> AcdController<P> {
    pub fn new(ml: P, spec: CompetitiveSpec) -> Self {
        AcdController {
            ml,
            spec,
            table: None,
            actions: None,
            shielded: true,
            ledger: None,
        }
    }

    /// Uses a precomputed (possibly inflated) sensitivity table instead of
    /// building one from the environment parameters.
    pub fn with_table(mut self, table: Arc<SensitivityTable>) -> Self {
        self.table = Some(table);
        self
    }

    /// Restricts actions to a set other than the environment's action box.
    pub fn with_action_set(mut self, actions: ActionSet) -> Self {
        self.actions = Some(actions);
        self
    }

    pub fn shielded(mut self, on: bool) -> Self {
        self.shielded = on;
        self
    }

    pub fn ledger(&self) -> Option<&SafetyLedger> {
        self.ledger.as_ref()
    }

    pub fn into_inner(self) -> P {
        self.ml
    }
}

impl<P: Policy> Controller for AcdController<P> {
    fn begin_episode(&mut self, params: &EnvParams, grid: Option<&[Action]>) {
        let table = match &self.table {
            Some(t) if t.horizon() == params.horizon => t.clone(),
            _ => {
                let t = Arc::new(SensitivityTable::from_params(params));
                self.table = Some(t.clone());
                t
            }
        };
        if self.actions.is_none() {
            self.actions = Some(match grid {
                Some(g) => ActionSet::Finite(g.to_vec()),
                None => ActionSet::Box(params.action_bounds.clone()),
            });
        }
        self.ledger = Some(SafetyLedger::new(self.spec, table, params.min_cost));
    }

    fn decide(&mut self, obs: &Observation<'_>, prior_action: &[f64]) -> Result<Decision> {
        let ledger = self.ledger.as_ref().ok_or_else(|| Error::SafetyFault {
            round: obs.round,
            reason: "decide called before begin_episode".into(),
        })?;
        if ledger.round() != obs.round {
            return Err(Error::SafetyFault {
                round: obs.round,
                reason: format!("ledger is at round {}", ledger.round()),
            });
        }
        let safe = SafeSet::new(Action::from_slice(prior_action), ledger.allowed(), ledger.weight());
        let view = Observation {
            budget: Some(BudgetView {
                allowed: safe.allowed,
                radius: safe.radius(),
            }),
            ..*obs
        };
        let proposed = self.ml.act(&view);
        let actions = self.actions.as_ref().expect("set in begin_episode");
        let action = if self.shielded {
            safe.project(&proposed, actions)
        } else {
            match actions {
                ActionSet::Box(b) => b.clip(&proposed),
                ActionSet::Finite(_) => proposed.clone(),
            }
        };
        Ok(Decision {
            proposed,
            action,
            allowed: Some(ledger.allowed()),
            residual: Some(ledger.residual()),
        })
    }

    fn settle(&mut self, round: usize, cost: f64, deviation: f64) -> Result<()> {
        let ledger = self.ledger.as_mut().ok_or_else(|| Error::SafetyFault {
            round,
            reason: "settle called before begin_episode".into(),
        })?;
        if self.shielded {
            ledger.close_round(cost, deviation)?;
        } else {
            // Unshielded: keep the ledger moving so the logged D_h stays
            // meaningful, but never fault on overspending.
            let clamped = deviation.min(ledger.radius());
            ledger.close_round(cost, clamped)?;
        }
        Ok(())
    }
}

/// Runs ACD for one episode and returns the agent record (without `J†`).
pub fn acd_rollout<E, M, P>(
    env: &E,
    seq: &ModelSequence,
    ml: M,
    prior: &P,
    spec: CompetitiveSpec,
) -> Result<EpisodeRecord>
where
    E: Environment + ?Sized,
    M: Policy,
    P: Policy + ?Sized,
{
    rollout(env, seq, &mut AcdController::new(ml, spec), prior)
}

/// ACD on `seq` paired with the prior's own rollout on the same draws.
pub fn acd_paired_rollout<E, M, P>(
    env: &E,
    seq: &ModelSequence,
    ml: M,
    prior: &P,
    spec: CompetitiveSpec,
) -> Result<PairedRollout>
where
    E: Environment + ?Sized,
    M: Policy,
    P: Policy + ?Sized,
{
    paired_rollout(env, seq, &mut AcdController::new(ml, spec), prior)
}

/// Outcome of checking `J_h ≤ (1+λ)J†_h + h·b` for every round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnytimeReport {
    pub satisfied: bool,
    /// `min_h slack_h`.
    pub worst_slack: f64,
    pub first_violation: Option<usize>,
    /// `max_h J_h / ((1+λ)J†_h + h·b)`; 0/0 counts as 1 only when `J_h > 0`.
    pub max_violation_ratio: f64,
}

/// Relative tolerance applied to the right-hand side, so sums that agree up
/// to floating-point reassociation are not reported as violations.
pub const ANYTIME_TOLERANCE: f64 = 1e-9;

/// Checks the anytime competitive constraint on a paired pair of records.
pub fn anytime_check(agent: &EpisodeRecord, prior: &EpisodeRecord, spec: &CompetitiveSpec) -> Result<AnytimeReport> {
    if agent.sequence != prior.sequence {
        return Err(Error::Pairing(format!(
            "agent ran on seed {} window {}, prior on seed {} window {}",
            agent.sequence.episode_seed, agent.sequence.window, prior.sequence.episode_seed, prior.sequence.window
        )));
    }
    if agent.horizon() != prior.horizon() {
        return Err(Error::Pairing(format!(
            "agent has {} rounds, prior has {}",
            agent.horizon(),
            prior.horizon()
        )));
    }
    let mut report = AnytimeReport {
        satisfied: true,
        worst_slack: f64::INFINITY,
        first_violation: None,
        max_violation_ratio: 0.0,
    };
    for (a, p) in agent.rounds.iter().zip(&prior.rounds) {
        let bound = spec.bound(p.cum_cost, a.round);
        let slack = bound - a.cum_cost;
        report.worst_slack = report.worst_slack.min(slack);
        let ratio = if bound > 0.0 {
            a.cum_cost / bound
        } else if a.cum_cost > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        report.max_violation_ratio = report.max_violation_ratio.max(ratio);
        if a.cum_cost > bound + ANYTIME_TOLERANCE * bound.abs().max(1.0) && report.first_violation.is_none() {
            report.first_violation = Some(a.round);
            report.satisfied = false;
        }
    }
    if agent.rounds.is_empty() {
        report.worst_slack = 0.0;
    }
    Ok(report)
}

impl PairedRollout {
    pub fn check(&self, spec: &CompetitiveSpec) -> Result<AnytimeReport> {
        anytime_check(&self.agent, &self.prior, spec)
    }
}
