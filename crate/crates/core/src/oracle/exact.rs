use std::collections::HashMap;

use super::independent::IndependentAcd;
use super::tiny::TinyMdp;
use crate::error::{Error, Result};
use crate::model::CompetitiveSpec;

/// Largest number of history nodes [`exact_dp`] will expand.
pub const MAX_NODES: usize = 2_000_000;

/// Exact optimum over history-dependent policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    /// `E[V_1]` from the start state.
    pub value: f64,
    /// Optimal executed action index per history `[x_1, a_1, ..., x_h]`
    /// (state and action indices interleaved). Ties go to the lowest index.
    pub policy: HashMap<Vec<usize>, usize>,
}

struct Search<'a> {
    tiny: &'a TinyMdp,
    probs: &'a [f64],
    oracle: Option<IndependentAcd>,
    policy: HashMap<Vec<usize>, usize>,
    nodes: usize,
}

impl Search<'_> {
    fn value(&mut self, key: &mut Vec<usize>, costs: &mut Vec<f64>, devs: &mut Vec<f64>) -> Result<f64> {
        self.nodes += 1;
        if self.nodes > MAX_NODES {
            return Err(Error::Refused(format!("exact search exceeds {MAX_NODES} nodes")));
        }
        let tiny = self.tiny;
        let h = costs.len() + 1;
        let x = *key.last().expect("history ends in a state");
        let pa = tiny.prior[x];
        let allowed = self.oracle.as_ref().map(|o| o.allowed(costs, devs));
        let mut best: Option<(f64, usize)> = None;
        for a in 0..tiny.actions.len() {
            let d = (tiny.actions[a] - tiny.actions[pa]).abs();
            if let (Some(o), Some(allowed)) = (&self.oracle, allowed) {
                if !o.admits_given(h, allowed, d) {
                    continue;
                }
            }
            let mut q = tiny.reward[x][a];
            if h < tiny.horizon {
                costs.push(tiny.cost[x][a]);
                devs.push(d);
                key.push(a);
                for (k, p) in self.probs.iter().enumerate() {
                    if *p == 0.0 {
                        continue;
                    }
                    key.push(tiny.maps[k][x][a]);
                    q += p * self.value(key, costs, devs)?;
                    key.pop();
                }
                key.pop();
                costs.pop();
                devs.pop();
            }
            if best.is_none_or(|(v, _)| q > v) {
                best = Some((q, a));
            }
        }
        // The prior action is always admitted, so `best` is set.
        let (v, a) = best.expect("prior action admitted");
        self.policy.insert(key.clone(), a);
        Ok(v)
    }
}

/// Exact expectimax over all model sequences of model `model`.
///
/// With `with_projection` the executed action at each history is restricted
/// to those admitted by the allowed-deviation rule (recomputed from scratch),
/// giving the optimal ACD policy; without it this is the unconstrained optimum.
pub fn exact_dp_model(
    tiny: &TinyMdp,
    model: usize,
    spec: CompetitiveSpec,
    with_projection: bool,
) -> Result<ExactSolution> {
    let oracle = with_projection.then(|| {
        IndependentAcd::new(
            &tiny.lipschitz,
            &tiny.perturbation,
            tiny.horizon,
            spec.lambda,
            spec.b,
            tiny.min_cost,
        )
    });
    let mut s = Search {
        tiny,
        probs: &tiny.models[model],
        oracle,
        policy: HashMap::new(),
        nodes: 0,
    };
    let value = s.value(&mut vec![tiny.start], &mut Vec::new(), &mut Vec::new())?;
    Ok(ExactSolution {
        value,
        policy: s.policy,
    })
}

/// [`exact_dp_model`] under the fixture's true model.
pub fn exact_dp(tiny: &TinyMdp, spec: CompetitiveSpec, with_projection: bool) -> Result<ExactSolution> {
    exact_dp_model(tiny, tiny.true_model, spec, with_projection)
}

/// Markov unconstrained optimum: `q[h-1][x][a] = Q*_h(x, a)` and the greedy
/// action per `(h, x)`, ties toward the prior action and then the lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedSolution {
    pub q: Vec<Vec<Vec<f64>>>,
    pub policy: Vec<Vec<usize>>,
}

impl UnconstrainedSolution {
    pub fn value(&self, h: usize, x: usize) -> f64 {
        self.q[h - 1][x][self.policy[h - 1][x]]
    }

    /// `L_{Q,h} = max_x max_{a≠a'} |Q*_h(x,a) − Q*_h(x,a')| / |a − a'|`.
    pub fn action_lipschitz(&self, tiny: &TinyMdp) -> Vec<f64> {
        self.q
            .iter()
            .map(|qh| {
                let mut l = 0.0f64;
                for row in qh {
                    for a in 0..row.len() {
                        for b in 0..a {
                            let da = (tiny.actions[a] - tiny.actions[b]).abs();
                            l = l.max((row[a] - row[b]).abs() / da);
                        }
                    }
                }
                l
            })
            .collect()
    }
}

pub fn unconstrained_dp(tiny: &TinyMdp, model: usize) -> UnconstrainedSolution {
    let (ns, na, h) = (tiny.states.len(), tiny.actions.len(), tiny.horizon);
    let probs = &tiny.models[model];
    let mut q = vec![vec![vec![0.0; na]; ns]; h];
    let mut policy = vec![vec![0; ns]; h];
    let mut next_v = vec![0.0; ns];
    for round in (1..=h).rev() {
        for x in 0..ns {
            for a in 0..na {
                let cont: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p * next_v[tiny.maps[k][x][a]])
                    .sum();
                q[round - 1][x][a] = tiny.reward[x][a] + if round < h { cont } else { 0.0 };
            }
            let row = &q[round - 1][x];
            let pa = tiny.actions[tiny.prior[x]];
            let mut best = 0;
            for a in 1..na {
                let better = row[a] > row[best]
                    || (row[a] == row[best] && (tiny.actions[a] - pa).abs() < (tiny.actions[best] - pa).abs());
                if better {
                    best = a;
                }
            }
            policy[round - 1][x] = best;
        }
        next_v = (0..ns).map(|x| q[round - 1][x][policy[round - 1][x]]).collect();
    }
    UnconstrainedSolution { q, policy }
}
