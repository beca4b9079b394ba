//! A second implementation of the allowed-deviation rule, written straight
//! from the sufficient condition and sharing nothing with [`crate::safety`].
//!
//! At round `h` it tries every earlier round `k ≤ h` as the point where the
//! condition is (re)applied, and recomputes `G_{k,h'}` for every `h' ≥ h`.

use crate::model::Lipschitz;

/// Relative slack on the budget comparison, to absorb summation-order noise
/// between this code and the production ledger.
pub const ADMIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct IndependentAcd {
    horizon: usize,
    l_c: f64,
    l_f: f64,
    l_pi: f64,
    p: Vec<f64>,
    lambda: f64,
    b: f64,
    eps: f64,
}

impl IndependentAcd {
    pub fn new(lipschitz: &Lipschitz, p: &[f64], horizon: usize, lambda: f64, b: f64, eps: f64) -> Self {
        IndependentAcd {
            horizon,
            l_c: lipschitz.cost,
            l_f: lipschitz.transition,
            l_pi: lipschitz.prior,
            p: p.to_vec(),
            lambda,
            b,
            eps,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `q_{j,i}`.
    pub fn q(&self, j: usize, i: usize) -> f64 {
        if i < j {
            0.0
        } else if i == j {
            self.l_c
        } else {
            self.l_c * (1.0 + self.l_pi) * self.l_f * self.p[i - 1 - j]
        }
    }

    /// `Γ_{j,n} = Σ_{i=n}^{H} q_{j,i}`.
    pub fn gamma(&self, j: usize, n: usize) -> f64 {
        (n..=self.horizon).map(|i| self.q(j, i)).sum()
    }

    /// `ĉ†_i` from the realized costs and deviations of rounds `1..=i`.
    pub fn prior_cost_lower_bound(&self, costs: &[f64], devs: &[f64], i: usize) -> f64 {
        let shift: f64 = (1..=i).map(|j| self.q(j, i) * devs[j - 1]).sum();
        self.eps.max(costs[i - 1] - shift)
    }

    /// `G_{k,h'}` given the closed rounds `1..k-1`.
    pub fn g(&self, costs: &[f64], devs: &[f64], k: usize, h_prime: usize) -> f64 {
        let history: f64 = (1..k)
            .map(|i| {
                (1.0 + self.lambda) * self.prior_cost_lower_bound(costs, devs, i)
                    - costs[i - 1]
                    - self.gamma(i, k) * devs[i - 1]
            })
            .sum();
        history + (h_prime + 1 - k) as f64 * (self.lambda * self.eps + self.b)
    }

    /// Largest `Γ_{h,h} d_h` admitted at round `h = costs.len() + 1`:
    /// `max_k min_{h' ≥ h} (G_{k,h'} − Σ_{j=k}^{h-1} Γ_{j,j} d_j)`.
    pub fn allowed(&self, costs: &[f64], devs: &[f64]) -> f64 {
        let h = costs.len() + 1;
        (1..=h)
            .map(|k| {
                let spent: f64 = (k..h).map(|j| self.gamma(j, j) * devs[j - 1]).sum();
                (h..=self.horizon)
                    .map(|hp| self.g(costs, devs, k, hp) - spent)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether deviation `d` is admitted at round `costs.len() + 1`.
    pub fn admits(&self, costs: &[f64], devs: &[f64], d: f64) -> bool {
        self.admits_given(costs.len() + 1, self.allowed(costs, devs), d)
    }

    /// Same test with `allowed` already computed for round `h`.
    pub fn admits_given(&self, h: usize, allowed: f64, d: f64) -> bool {
        self.gamma(h, h) * d <= allowed + ADMIT_TOLERANCE * allowed.abs().max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_round_is_the_increment() {
        let l = Lipschitz {
            cost: 1.0,
            transition: 1.0,
            prior: 1.0,
        };
        let o = IndependentAcd::new(&l, &[1.0, 1.0, 1.0], 3, 2.0, 1.0, 0.5);
        assert_eq!(o.allowed(&[], &[]), 2.0);
        // Γ_{1,1} = 1 + 2 + 2.
        assert_eq!(o.gamma(1, 1), 5.0);
        assert!(o.admits(&[], &[], 0.4));
        assert!(!o.admits(&[], &[], 0.41));
    }
}
