use serde::{Deserialize, Serialize};

use crate::model::{EnvParams, Lipschitz, Perturbation};

/// Deviation sensitivity weights.
///
/// `q(j, i)` bounds how much a unit action deviation at round `j` can move
/// the cost at round `i ≥ j`; `gamma(j, n) = Σ_{i=n}^{H} q(j, i)` is the
/// total weight it carries from round `n` onward. Rounds are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    horizon: usize,
    /// Row-major `H × H`, entry `(j-1, i-1)`; zero below the diagonal.
    q: Vec<f64>,
    /// Row-major `H × (H+1)`, entry `(j-1, n-1)` for `n ∈ [j, H+1]`.
    gamma: Vec<f64>,
}

impl SensitivityTable {
    pub fn new(lipschitz: &Lipschitz, perturbation: &Perturbation, horizon: usize) -> Self {
        let h = horizon;
        let propagation = lipschitz.cost * (1.0 + lipschitz.prior) * lipschitz.transition;
        let mut q = vec![0.0; h * h];
        for j in 0..h {
            q[j * h + j] = lipschitz.cost;
            for i in j + 1..h {
                q[j * h + i] = propagation * perturbation.at(i - 1 - j);
            }
        }
        let w = h + 1;
        let mut gamma = vec![0.0; h * w];
        for j in 0..h {
            let mut acc = 0.0;
            for n in (j..h).rev() {
                acc += q[j * h + n];
                gamma[j * w + n] = acc;
            }
        }
        SensitivityTable { horizon, q, gamma }
    }

    pub fn from_params(params: &EnvParams) -> Self {
        Self::new(&params.lipschitz, &params.perturbation, params.horizon)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `q_{j,i}`, zero when `i < j`.
    pub fn q(&self, j: usize, i: usize) -> f64 {
        debug_assert!(j >= 1 && i >= 1 && j <= self.horizon && i <= self.horizon);
        if i < j {
            0.0
        } else {
            self.q[(j - 1) * self.horizon + (i - 1)]
        }
    }

    /// `Γ_{j,n}` for `n ≥ j`; `n = H + 1` gives the empty sum.
    pub fn gamma(&self, j: usize, n: usize) -> f64 {
        debug_assert!(j >= 1 && j <= self.horizon && n >= j && n <= self.horizon + 1);
        if n > self.horizon {
            0.0
        } else {
            self.gamma[(j - 1) * (self.horizon + 1) + (n - 1)]
        }
    }

    /// `Γ_{h,h}`, the weight of the current round's deviation.
    pub fn diagonal(&self, h: usize) -> f64 {
        self.gamma(h, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(h: usize) -> SensitivityTable {
        SensitivityTable::new(
            &Lipschitz {
                cost: 1.0,
                transition: 1.0,
                prior: 0.0,
            },
            &Perturbation::Geometric { rho: 1.0 },
            h,
        )
    }

    #[test]
    fn unit_constants() {
        let t = unit(3);
        for j in 1..=3 {
            for i in j..=3 {
                assert_eq!(t.q(j, i), 1.0);
            }
        }
        assert_eq!(t.gamma(1, 1), 3.0);
        assert_eq!(t.gamma(2, 2), 2.0);
        assert_eq!(t.gamma(3, 3), 1.0);
        assert_eq!(t.gamma(1, 2), 2.0);
        assert_eq!(t.gamma(1, 4), 0.0);
    }

    #[test]
    fn no_propagation_without_transition_sensitivity() {
        let t = SensitivityTable::new(
            &Lipschitz {
                cost: 2.5,
                transition: 0.0,
                prior: 3.0,
            },
            &Perturbation::Geometric { rho: 1.0 },
            4,
        );
        for j in 1..=4 {
            assert_eq!(t.gamma(j, j), 2.5);
            for i in j + 1..=4 {
                assert_eq!(t.q(j, i), 0.0);
            }
        }
    }

    #[test]
    fn decaying_perturbation() {
        // Oracle: direct evaluation of q_{1,i} = L_c (1 + L_π) L_f p(i - 2).
        let lc = 2.0;
        let lf = 0.5;
        let lp = 1.0;
        let p = |k: i32| 0.5f64.powi(k);
        let expected_q = [
            lc,
            lc * (1.0 + lp) * lf * p(0),
            lc * (1.0 + lp) * lf * p(1),
            lc * (1.0 + lp) * lf * p(2),
        ];
        assert_eq!(expected_q, [2.0, 2.0, 1.0, 0.5]);
        let t = SensitivityTable::new(
            &Lipschitz {
                cost: lc,
                transition: lf,
                prior: lp,
            },
            &Perturbation::Geometric { rho: 0.5 },
            4,
        );
        for (i, q) in expected_q.iter().enumerate() {
            assert_eq!(t.q(1, i + 1), *q);
        }
        assert_eq!(t.gamma(1, 1), 5.5);
    }

    #[test]
    fn gamma_is_nonincreasing_in_n() {
        let t = SensitivityTable::new(
            &Lipschitz {
                cost: 1.3,
                transition: 0.7,
                prior: 0.4,
            },
            &Perturbation::Geometric { rho: 0.9 },
            8,
        );
        for j in 1..=8 {
            assert!(t.gamma(j, j) >= 1.3);
            assert_eq!(t.gamma(j, 8), t.q(j, 8));
            for n in j..8 {
                assert!(t.gamma(j, n) >= t.gamma(j, n + 1));
            }
        }
    }
}
