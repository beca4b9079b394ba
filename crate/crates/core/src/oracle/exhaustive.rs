use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::independent::IndependentAcd;
use super::tiny::{TinyEnv, TinyMdp};
use crate::error::{Error, Result};
use crate::model::{prior_rollout, rollout, Action, CompetitiveSpec, Observation, Policy, Vector};
use crate::safety::{anytime_check, AcdController, ActionSet, ANYTIME_TOLERANCE};

/// Largest number of (model sequence, ML action sequence) leaves enumerated.
pub const MAX_LEAVES: usize = 1_000_000;

/// Plays a fixed action per round.
#[derive(Debug, Clone)]
pub struct OpenLoop(pub Vec<Action>);

impl Policy for OpenLoop {
    fn act(&self, obs: &Observation<'_>) -> Action {
        self.0[obs.round - 1].clone()
    }
}

/// Calls `f` on every tuple of `len` indices below `base`, in lexicographic order.
pub fn for_each_tuple(base: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; len];
    loop {
        f(&idx);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < base {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// All branch sequences of length `len` over `support`.
pub fn branch_sequences(support: &[usize], len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_tuple(support.len(), len, |t| {
        out.push(t.iter().map(|&i| support[i]).collect())
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// Branch taken at rounds `1..H-1`.
    pub branches: Vec<usize>,
    /// ML action proposed at rounds `1..H`.
    pub ml_actions: Vec<f64>,
    pub round: usize,
    pub reason: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "branches {:?}, ml actions {:?}: {} at round {}",
            self.branches, self.ml_actions, self.reason, self.round
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyCheckReport {
    pub fixture: String,
    pub lambda: f64,
    pub b: f64,
    pub shielded: bool,
    pub sequences: usize,
    pub leaves: usize,
    /// Leaves where either implementation sees `J_h > (1+λ)J†_h + hb`.
    pub violations: usize,
    /// Leaves where production and the independent rule executed different actions.
    pub disagreements: usize,
    /// `min_h slack_h` over all leaves, from the independent simulation.
    pub min_slack: f64,
    /// Up to five offending leaves.
    pub counterexamples: Vec<Counterexample>,
}

impl SafetyCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.disagreements == 0
    }
}

struct Partial {
    violations: usize,
    disagreements: usize,
    min_slack: f64,
    examples: Vec<Counterexample>,
}

fn merge(mut a: Partial, b: Partial) -> Partial {
    a.violations += b.violations;
    a.disagreements += b.disagreements;
    a.min_slack = a.min_slack.min(b.min_slack);
    a.examples.extend(b.examples);
    a.examples.truncate(5);
    a
}

/// Finite-set projection written from its rule: nearest admitted action to
/// the proposal, ties to the one nearer the prior, then to the lower index.
fn choose(tiny: &TinyMdp, admitted: &[bool], ml: usize, prior: usize) -> usize {
    let mut best: Option<usize> = None;
    for a in 0..tiny.actions.len() {
        if !admitted[a] {
            continue;
        }
        let key = |i: usize| {
            (
                (tiny.actions[i] - tiny.actions[ml]).abs(),
                (tiny.actions[i] - tiny.actions[prior]).abs(),
            )
        };
        best = match best {
            None => Some(a),
            Some(b) if key(a) < key(b) => Some(a),
            keep => keep,
        };
    }
    best.unwrap_or(prior)
}

/// Runs production ACD and the independent rule on every positive-probability
/// model sequence and every open-loop ML action sequence of the fixture, and
/// checks the anytime constraint at every round of each.
pub fn exhaustive_safety_check(tiny: &Arc<TinyMdp>, spec: CompetitiveSpec) -> Result<SafetyCheckReport> {
    let env = TinyEnv::new(tiny.clone());
    let prior = env.prior();
    let h = tiny.horizon;
    let na = tiny.actions.len();
    let seqs = branch_sequences(&tiny.support(tiny.true_model), h - 1);
    let per_seq = na.checked_pow(h as u32).unwrap_or(usize::MAX);
    let leaves = seqs.len().saturating_mul(per_seq);
    if leaves > MAX_LEAVES {
        return Err(Error::Refused(format!(
            "fixture {} needs {leaves} leaves, limit is {MAX_LEAVES}",
            tiny.name
        )));
    }
    let shielded = !tiny.unshielded;
    let oracle = IndependentAcd::new(
        &tiny.lipschitz,
        &tiny.perturbation,
        h,
        spec.lambda,
        spec.b,
        tiny.min_cost,
    );
    let grid: Vec<Action> = tiny.actions.iter().map(|&a| Vector::scalar(a)).collect();

    let total = seqs
        .par_iter()
        .map(|branches| -> Result<Partial> {
            let seq = env
                .scripted(branches)
                .expect("support branches have positive probability");
            let prior_rec = prior_rollout(&env, &seq, &prior)?;
            let mut part = Partial {
                violations: 0,
                disagreements: 0,
                min_slack: f64::INFINITY,
                examples: Vec::new(),
            };
            let mut result = Ok(());
            for_each_tuple(na, h, |ml| {
                if result.is_err() {
                    return;
                }
                let plan = OpenLoop(ml.iter().map(|&i| grid[i].clone()).collect());
                let mut ctl = AcdController::new(plan, spec)
                    .with_action_set(ActionSet::Finite(grid.clone()))
                    .shielded(shielded);
                let agent = match rollout(&env, &seq, &mut ctl, &prior).and_then(|a| {
                    let r = anytime_check(&a, &prior_rec, &spec)?;
                    Ok((a, r))
                }) {
                    Ok(v) => v,
                    Err(e) => {
                        result = Err(e);
                        return;
                    }
                };
                let (rec, report) = agent;

                // Independent simulation from the tables.
                let (mut x, mut xp) = (tiny.start, tiny.start);
                let (mut j, mut jp) = (0.0, 0.0);
                let (mut costs, mut devs) = (Vec::with_capacity(h), Vec::with_capacity(h));
                let mut flagged: Option<(usize, String)> = None;
                let mut disagree = false;
                for round in 1..=h {
                    let pa = tiny.prior[x];
                    let a = if shielded {
                        let allowed = oracle.allowed(&costs, &devs);
                        let admitted: Vec<bool> = (0..na)
                            .map(|a| oracle.admits_given(round, allowed, (tiny.actions[a] - tiny.actions[pa]).abs()))
                            .collect();
                        choose(tiny, &admitted, ml[round - 1], pa)
                    } else {
                        ml[round - 1]
                    };
                    if rec.rounds[round - 1].action[0] != tiny.actions[a] {
                        disagree = true;
                    }
                    j += tiny.cost[x][a];
                    jp += tiny.cost[xp][tiny.prior[xp]];
                    costs.push(tiny.cost[x][a]);
                    devs.push((tiny.actions[a] - tiny.actions[pa]).abs());
                    let bound = (1.0 + spec.lambda) * jp + round as f64 * spec.b;
                    part.min_slack = part.min_slack.min(bound - j);
                    if j > bound + ANYTIME_TOLERANCE * bound.abs().max(1.0) && flagged.is_none() {
                        flagged = Some((round, "independent check: anytime constraint violated".into()));
                    }
                    if round < h {
                        let k = branches[round - 1];
                        x = tiny.maps[k][x][a];
                        xp = tiny.maps[k][xp][tiny.prior[xp]];
                    }
                }
                if let (None, Some(r)) = (&flagged, report.first_violation) {
                    flagged = Some((r, "anytime constraint violated".into()));
                }
                let record = |part: &mut Partial, round: usize, reason: String| {
                    if part.examples.len() < 5 {
                        part.examples.push(Counterexample {
                            branches: branches.clone(),
                            ml_actions: ml.iter().map(|&i| tiny.actions[i]).collect(),
                            round,
                            reason,
                        });
                    }
                };
                if let Some((round, reason)) = flagged {
                    part.violations += 1;
                    record(&mut part, round, reason);
                }
                if disagree {
                    part.disagreements += 1;
                    record(
                        &mut part,
                        0,
                        "production and independent rule executed different actions".into(),
                    );
                }
            });
            result.map(|_| part)
        })
        .try_reduce(
            || Partial {
                violations: 0,
                disagreements: 0,
                min_slack: f64::INFINITY,
                examples: Vec::new(),
            },
            |a, b| Ok(merge(a, b)),
        )?;

    Ok(SafetyCheckReport {
        fixture: tiny.name.clone(),
        lambda: spec.lambda,
        b: spec.b,
        shielded,
        sequences: seqs.len(),
        leaves,
        violations: total.violations,
        disagreements: total.disagreements,
        min_slack: total.min_slack,
        counterexamples: total.examples,
    })
}
