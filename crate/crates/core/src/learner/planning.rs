use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite-horizon MDP with finitely many states per round and a fixed
/// action grid. Rounds are 1-based.
pub trait FiniteMdp: Sync {
    fn horizon(&self) -> usize;

    fn n_states(&self, round: usize) -> usize;

    fn n_actions(&self) -> usize;

    /// Enumerates the outcomes of playing grid action `action` in `state` at
    /// `round`. Each call to `emit(prob, reward, next)` adds one outcome whose
    /// successor value is `Σ w · V_{h+1}(i)` over `next = [(i, w), ...]`.
    /// `next` is ignored at the last round.
    fn outcomes(&self, round: usize, state: usize, action: usize, emit: &mut dyn FnMut(f64, f64, &[(usize, f64)]));
}

/// `Q̃_h(s, ã)` and `Ṽ_h(s)` for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTable {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `[state][action]`.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl RoundTable {
    pub fn q(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.n_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.n_actions..(state + 1) * self.n_actions]
    }
}

/// Output of [`value_iteration`]; `rounds[h - 1]` holds round `h`.
/// Round `H + 1` is identically zero and not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    pub rounds: Vec<RoundTable>,
}

impl ValueTables {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn round(&self, h: usize) -> &RoundTable {
        &self.rounds[h - 1]
    }

    /// `Ṽ_h(s)`, zero past the horizon.
    pub fn v(&self, h: usize, state: usize) -> f64 {
        if h > self.rounds.len() {
            0.0
        } else {
            self.rounds[h - 1].v[state]
        }
    }

    /// Weighted `Σ w · Ṽ_h(i)`.
    pub fn v_mix(&self, h: usize, mix: &[(usize, f64)]) -> f64 {
        if h > self.rounds.len() {
            return 0.0;
        }
        let v = &self.rounds[h - 1].v;
        mix.iter().map(|&(i, w)| w * v[i]).sum()
    }

    /// Largest `|Ṽ|` anywhere in the tables.
    pub fn max_abs_value(&self) -> f64 {
        self.rounds
            .iter()
            .flat_map(|r| r.v.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Backward induction `Q̃_h(s, ã) = E[r + Ṽ_{h+1}(s')]`, `Ṽ_h = max_ã Q̃_h`,
/// for `h = H .. 1`. States of a round are processed in parallel; each
/// state's sum runs in emission order, so results do not depend on the
/// thread count.
pub fn value_iteration<M: FiniteMdp + ?Sized>(mdp: &M) -> Result<ValueTables> {
    let horizon = mdp.horizon();
    let n_actions = mdp.n_actions();
    if horizon == 0 || n_actions == 0 {
        return Err(Error::config(
            "value iteration needs a positive horizon and a nonempty action grid",
        ));
    }
    let mut rounds: Vec<RoundTable> = Vec::with_capacity(horizon);
    for h in (1..=horizon).rev() {
        let n_states = mdp.n_states(h);
        if n_states == 0 {
            return Err(Error::config(format!("round {h} has an empty state grid")));
        }
        let next = rounds.last();
        let last = h == horizon;
        let q: Vec<f64> = (0..n_states)
            .into_par_iter()
            .flat_map_iter(|s| {
                (0..n_actions).map(move |a| {
                    let mut acc = 0.0;
                    mdp.outcomes(h, s, a, &mut |p, r, mix| {
                        let cont = if last {
                            0.0
                        } else {
                            let v = &next.expect("later round computed first").v;
                            mix.iter().map(|&(i, w)| w * v[i]).sum::<f64>()
                        };
                        acc += p * (r + cont);
                    });
                    acc
                })
            })
            .collect();
        let v = q
            .chunks(n_actions)
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        rounds.push(RoundTable {
            n_states,
            n_actions,
            q,
            v,
        });
    }
    rounds.reverse();
    Ok(ValueTables { rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two states, two actions: action 1 earns 1 and moves to state 1
    /// with probability 1/2; state 1 doubles every reward.
    struct Toy {
        h: usize,
    }

    impl FiniteMdp for Toy {
        fn horizon(&self) -> usize {
            self.h
        }
        fn n_states(&self, _round: usize) -> usize {
            2
        }
        fn n_actions(&self) -> usize {
            2
        }
        fn outcomes(&self, _round: usize, s: usize, a: usize, emit: &mut dyn FnMut(f64, f64, &[(usize, f64)])) {
            let scale = if s == 1 { 2.0 } else { 1.0 };
            if a == 0 {
                emit(1.0, 0.0, &[(s, 1.0)]);
            } else {
                emit(0.5, scale, &[(0, 1.0)]);
                emit(0.5, scale, &[(1, 1.0)]);
            }
        }
    }

    #[test]
    fn single_round_is_the_reward() {
        let t = value_iteration(&Toy { h: 1 }).unwrap();
        assert_eq!(t.round(1).q(0, 1), 1.0);
        assert_eq!(t.v(1, 1), 2.0);
        assert_eq!(t.v(2, 0), 0.0);
    }

    #[test]
    fn two_rounds_by_hand() {
        // V_2 = (1, 2); Q_1(0, 1) = 1 + (1 + 2)/2 = 2.5, Q_1(0, 0) = V_2(0) = 1.
        let t = value_iteration(&Toy { h: 2 }).unwrap();
        assert_eq!(t.round(1).q(0, 1), 2.5);
        assert_eq!(t.round(1).q(0, 0), 1.0);
        assert_eq!(t.round(1).q(1, 1), 3.5);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }
}
