use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width `β_k` of the confidence set at episode `k` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSchedule {
    /// `β_0 · ln(k + 1)`.
    Log {
        beta0: f64,
    },
    /// `c1 (V̄ H)² (ln k + c2)`.
    Theoretical {
        c1: f64,
        c2: f64,
    },
    Fixed {
        value: f64,
    },
    /// Never shrink the set.
    Infinite,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Log { beta0: 50.0 }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BetaSchedule::Log { beta0 } => beta0.is_finite() && beta0 >= 0.0,
            BetaSchedule::Theoretical { c1, c2 } => c1.is_finite() && c1 >= 0.0 && c2.is_finite() && c2 >= 0.0,
            BetaSchedule::Fixed { value } => value >= 0.0,
            BetaSchedule::Infinite => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid beta schedule {self:?}")))
        }
    }

    /// `v_bar` is the per-round reward bound, `horizon` is `H`.
    pub fn at(&self, k: usize, v_bar: f64, horizon: usize) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            BetaSchedule::Log { beta0 } => beta0 * (k + 1.0).ln(),
            BetaSchedule::Theoretical { c1, c2 } => c1 * (v_bar * horizon as f64).powi(2) * (k.ln() + c2),
            BetaSchedule::Fixed { value } => value,
            BetaSchedule::Infinite => f64::INFINITY,
        }
    }
}

/// Running least-squares state over a finite model class.
///
/// Each logged transition contributes a target `y = Ṽ_{h+1}(s_{h+1})` and
/// one prediction `E_g[Ṽ_{h+1}]` per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClassState {
    losses: Vec<f64>,
    /// `pair[g][g'] = Σ (p_g − p_g')²`.
    pair: Vec<Vec<f64>>,
    samples: usize,
}

impl ModelClassState {
    pub fn new(n_models: usize) -> Self {
        ModelClassState {
            losses: vec![0.0; n_models],
            pair: vec![vec![0.0; n_models]; n_models],
            samples: 0,
        }
    }

    pub fn n_models(&self) -> usize {
        self.losses.len()
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn pairwise(&self, g: usize, other: usize) -> f64 {
        self.pair[g][other]
    }

    pub fn update(&mut self, data: &[(f64, Vec<f64>)]) {
        for (y, preds) in data {
            debug_assert_eq!(preds.len(), self.losses.len());
            for (g, p) in preds.iter().enumerate() {
                self.losses[g] += (p - y).powi(2);
                for (o, q) in preds.iter().enumerate() {
                    self.pair[g][o] += (p - q).powi(2);
                }
            }
            self.samples += 1;
        }
    }

    /// `ĝ = argmin_g loss(g)`, ties to the lowest index.
    pub fn fit(&self) -> usize {
        let mut best = 0;
        for (g, l) in self.losses.iter().enumerate().skip(1) {
            if *l < self.losses[best] {
                best = g;
            }
        }
        best
    }

    /// `{g : Σ (p_g − p_ĝ)² ≤ β}`; always contains `ĝ`. With no data this is the full class.
    pub fn confidence_set(&self, beta: f64) -> Vec<usize> {
        let fit = self.fit();
        (0..self.n_models())
            .filter(|&g| g == fit || self.pair[g][fit] <= beta)
            .collect()
    }

    /// Membership bitmap of [`confidence_set`](Self::confidence_set).
    pub fn membership(&self, beta: f64) -> Vec<bool> {
        let mut m = vec![false; self.n_models()];
        for g in self.confidence_set(beta) {
            m[g] = true;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_state_fits_first_and_keeps_all() {
        let s = ModelClassState::new(3);
        assert_eq!(s.fit(), 0);
        assert_eq!(s.confidence_set(0.0), vec![0, 1, 2]);
    }

    #[test]
    fn fit_and_set() {
        let mut s = ModelClassState::new(3);
        s.update(&[(1.0, vec![0.0, 1.0, 1.0]), (2.0, vec![0.0, 2.0, 2.5])]);
        assert_eq!(s.losses(), &[5.0, 0.0, 0.25]);
        assert_eq!(s.fit(), 1);
        assert_eq!(s.confidence_set(0.0), vec![1]);
        assert_eq!(s.confidence_set(0.25), vec![1, 2]);
        assert_eq!(s.confidence_set(f64::INFINITY), vec![0, 1, 2]);
        assert_eq!(s.membership(0.25), vec![false, true, true]);
    }

    #[test]
    fn identical_models_tie_to_lowest() {
        let mut s = ModelClassState::new(2);
        s.update(&[(1.0, vec![0.5, 0.5])]);
        assert_eq!(s.fit(), 0);
        assert_eq!(s.confidence_set(0.0), vec![0, 1]);
    }

    #[test]
    fn schedules() {
        assert!((BetaSchedule::Log { beta0: 2.0 }.at(1, 1.0, 4) - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(BetaSchedule::Theoretical { c1: 1.0, c2: 1.0 }.at(1, 2.0, 3), 36.0);
        assert!(BetaSchedule::Infinite.at(7, 1.0, 1).is_infinite());
        assert!(BetaSchedule::Log { beta0: -1.0 }.validate().is_err());
    }
}
