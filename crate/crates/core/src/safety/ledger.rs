use std::sync::Arc;

use serde::Serialize;

use super::sensitivity::SensitivityTable;
use crate::error::{Error, Result};
use crate::model::CompetitiveSpec;

/// One closed round of the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub round: usize,
    pub cost: f64,
    pub deviation: f64,
    /// `ĉ†_i = max{ε, c_i − Σ_{j≤i} q_{j,i} d_j}`, frozen when the round closes.
    pub prior_cost_lower_bound: f64,
}

/// Per-episode allowed-deviation bookkeeping.
///
/// Holds `D_h` for the current round and the history needed to recompute
/// `R_{h-1}`. Single writer; one ledger per episode.
#[derive(Debug, Clone)]
pub struct SafetyLedger {
    spec: CompetitiveSpec,
    table: Arc<SensitivityTable>,
    min_cost: f64,
    history: Vec<LedgerRow>,
    round: usize,
    allowed: f64,
    residual: f64,
}

impl SafetyLedger {
    /// Opens round 1 with `D_1 = λε + b`.
    pub fn new(spec: CompetitiveSpec, table: Arc<SensitivityTable>, min_cost: f64) -> Self {
        let allowed = spec.increment(min_cost);
        SafetyLedger {
            spec,
            history: Vec::with_capacity(table.horizon()),
            table,
            min_cost,
            round: 1,
            allowed,
            residual: 0.0,
        }
    }

    pub fn spec(&self) -> &CompetitiveSpec {
        &self.spec
    }

    pub fn table(&self) -> &SensitivityTable {
        &self.table
    }

    pub fn min_cost(&self) -> f64 {
        self.min_cost
    }

    /// Current round `h` (1-based).
    pub fn round(&self) -> usize {
        self.round
    }

    /// `D_h`.
    pub fn allowed(&self) -> f64 {
        self.allowed
    }

    /// `R_{h-1}` as computed when the previous round closed (0 at round 1).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn history(&self) -> &[LedgerRow] {
        &self.history
    }

    /// `Γ_{h,h}` for the current round.
    pub fn weight(&self) -> f64 {
        self.table.diagonal(self.round)
    }

    /// Radius of the current safe ball, `D_h / Γ_{h,h}`.
    pub fn radius(&self) -> f64 {
        let w = self.weight();
        if w > 0.0 {
            self.allowed / w
        } else {
            f64::INFINITY
        }
    }

    /// `R_{h-1} = Σ_{i<h} ((1+λ)ĉ†_i − c_i − Γ_{i,h} d_i)` from stored history.
    ///
    /// `Γ_{i,h}` depends on the round it is evaluated at, so this is a fresh
    /// `O(h)` sum every time.
    pub fn residual_at(&self, h: usize) -> f64 {
        debug_assert!(h >= 1 && h - 1 <= self.history.len());
        self.history[..h - 1]
            .iter()
            .map(|row| {
                (1.0 + self.spec.lambda) * row.prior_cost_lower_bound
                    - row.cost
                    - self.table.gamma(row.round, h) * row.deviation
            })
            .sum()
    }

    fn prior_cost_lower_bound(&self, cost: f64, deviation: f64) -> f64 {
        let i = self.round;
        let propagated: f64 = self
            .history
            .iter()
            .map(|row| self.table.q(row.round, i) * row.deviation)
            .sum::<f64>()
            + self.table.q(i, i) * deviation;
        self.min_cost.max(cost - propagated)
    }

    /// Closes round `h` with its realized cost and deviation and opens `h+1`:
    /// `D_{h+1} = max{D_h + λε + b − Γ_{h,h} d_h, R_h + λε + b}`.
    ///
    /// Fails with [`Error::SafetyFault`] if `Γ_{h,h} d_h > D_h`; the projection
    /// must never let that happen.
    pub fn close_round(&mut self, cost: f64, deviation: f64) -> Result<f64> {
        let h = self.round;
        if h > self.table.horizon() {
            return Err(Error::SafetyFault {
                round: h,
                reason: "ledger already closed its final round".into(),
            });
        }
        let spent = self.weight() * deviation;
        if !(deviation >= 0.0) || spent > self.allowed {
            return Err(Error::SafetyFault {
                round: h,
                reason: format!(
                    "deviation {deviation} costs {spent} of budget, only {} allowed",
                    self.allowed
                ),
            });
        }
        let lower = self.prior_cost_lower_bound(cost, deviation);
        self.history.push(LedgerRow {
            round: h,
            cost,
            deviation,
            prior_cost_lower_bound: lower,
        });
        self.round = h + 1;
        let inc = self.spec.increment(self.min_cost);
        self.residual = self.residual_at(self.round);
        self.allowed = (self.allowed + inc - spent).max(self.residual + inc);
        Ok(self.allowed)
    }

    /// JSON post-mortem dump: `{round, allowed_deviation, residual, history: [...]}`.
    pub fn debug_dump(&self) -> serde_json::Value {
        serde_json::json!({
            "round": self.round,
            "allowed_deviation": self.allowed,
            "residual": self.residual,
            "lambda": self.spec.lambda,
            "b": self.spec.b,
            "min_cost": self.min_cost,
            "history": self.history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Lipschitz, Perturbation};

    fn unit_table(h: usize) -> Arc<SensitivityTable> {
        Arc::new(SensitivityTable::new(
            &Lipschitz {
                cost: 1.0,
                transition: 1.0,
                prior: 0.0,
            },
            &Perturbation::Geometric { rho: 1.0 },
            h,
        ))
    }

    fn spec(lambda: f64, b: f64) -> CompetitiveSpec {
        CompetitiveSpec::new(lambda, b).unwrap()
    }

    #[test]
    fn initial_budget() {
        assert_eq!(SafetyLedger::new(spec(2.0, 2.0), unit_table(3), 1.0).allowed(), 4.0);
        assert_eq!(SafetyLedger::new(spec(0.0, 0.0), unit_table(3), 7.0).allowed(), 0.0);
        assert_eq!(SafetyLedger::new(spec(5.0, 6.0), unit_table(3), 0.0).allowed(), 6.0);
        assert_eq!(
            SafetyLedger::new(spec(0.0, 1.0), unit_table(3), 0.0).residual_at(1),
            0.0
        );
    }

    #[test]
    fn radius_composes_table_and_budget() {
        let l = SafetyLedger::new(spec(2.0, 2.0), unit_table(3), 1.0);
        assert!((l.radius() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn residual_and_update_by_hand() {
        // H = 2, unit constants, λ = 0, ε = 0, b = 1.
        // Γ_{1,1} = 2, Γ_{1,2} = 1; c_1 = 3, d_1 = 0.5.
        // ĉ†_1 = max{0, 3 − 0.5} = 2.5; R_1 = 2.5 − 3 − 0.5 = −1.
        // D_2 = max{1 + 1 − 2·0.5, −1 + 1} = 1.
        let mut l = SafetyLedger::new(spec(0.0, 1.0), unit_table(2), 0.0);
        assert_eq!(l.weight(), 2.0);
        let d2 = l.close_round(3.0, 0.5).unwrap();
        assert_eq!(l.history()[0].prior_cost_lower_bound, 2.5);
        assert_eq!(l.residual(), -1.0);
        assert_eq!(l.residual_at(2), -1.0);
        assert_eq!(d2, 1.0);
    }

    #[test]
    fn no_deviation_grows_budget_linearly() {
        let mut l = SafetyLedger::new(spec(0.5, 1.0), unit_table(5), 1.0);
        let mut prev = l.allowed();
        for _ in 0..4 {
            let d = l.close_round(2.0, 0.0).unwrap();
            assert!(d >= prev + 1.5 - 1e-12);
            prev = d;
        }
        // ĉ† equals the realized cost, and R = λ Σ c.
        assert!(l.history().iter().all(|r| r.prior_cost_lower_bound == 2.0));
        assert!((l.residual() - 0.5 * 2.0 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn spent_budget_floors_at_b() {
        let mut l = SafetyLedger::new(spec(0.0, 0.7), unit_table(4), 0.0);
        let d = l.allowed() / l.weight();
        let next = l.close_round(5.0, d).unwrap();
        assert!(next >= 0.7 - 1e-12);
    }

    #[test]
    fn overspending_is_a_fault() {
        let mut l = SafetyLedger::new(spec(0.0, 1.0), unit_table(3), 0.0);
        let too_far = l.radius() * 1.01;
        assert!(matches!(l.close_round(1.0, too_far), Err(Error::SafetyFault { .. })));
    }

    #[test]
    fn dump_has_documented_keys() {
        let mut l = SafetyLedger::new(spec(1.0, 1.0), unit_table(3), 1.0);
        l.close_round(2.0, 0.1).unwrap();
        let v = l.debug_dump();
        for key in ["round", "allowed_deviation", "residual", "history"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["history"].as_array().unwrap().len(), 1);
    }
}
