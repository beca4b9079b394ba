use serde::{Deserialize, Serialize};

use super::vector::Vector;
use crate::error::{Error, Result};

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoxBounds {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::Dimension {
                expected: lo.dim(),
                got: hi.dim(),
            });
        }
        for (l, h) in lo.iter().zip(hi.iter()) {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(Error::validation(format!("invalid box [{l}, {h}]")));
            }
        }
        Ok(BoxBounds { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Vector::scalar(lo), Vector::scalar(hi))
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.first_violation(v).is_none()
    }

    /// First dimension where `v` leaves the box, if any.
    pub fn first_violation(&self, v: &[f64]) -> Option<usize> {
        if v.len() != self.dim() {
            return Some(0);
        }
        v.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .position(|(x, (l, h))| !(x >= l && x <= h))
    }

    pub fn clip(&self, v: &[f64]) -> Vector {
        v.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect()
    }

    pub fn clip_in_place(&self, v: &mut [f64]) {
        for (x, (l, h)) in v.iter_mut().zip(self.lo.iter().zip(self.hi.iter())) {
            *x = x.clamp(*l, *h);
        }
    }

    /// Length of the box diagonal, the largest distance between two members.
    pub fn diameter(&self) -> f64 {
        super::vector::distance(&self.lo, &self.hi)
    }
}

/// Lipschitz certificates, all with respect to `‖Δx‖ + ‖Δa‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub cost: f64,
    pub transition: f64,
    pub prior: f64,
}

/// Telescoping perturbation function `p` with `p(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `p(k) = rho^k`.
    Geometric { rho: f64 },
    /// Explicit values `p(0), p(1), ...`; must cover `0..H`.
    Table { values: Vec<f64> },
}

impl Perturbation {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Perturbation::Geometric { rho } => rho.powi(k as i32),
            Perturbation::Table { values } => values[k],
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            Perturbation::Geometric { rho } => {
                if !(rho.is_finite() && *rho >= 0.0) {
                    return Err(Error::validation(format!("perturbation rho {rho} must be >= 0")));
                }
            }
            Perturbation::Table { values } => {
                if values.len() < horizon {
                    return Err(Error::validation(format!(
                        "perturbation table has {} entries, horizon needs {horizon}",
                        values.len()
                    )));
                }
                if values[0] != 1.0 {
                    return Err(Error::validation("perturbation table must have p(0) = 1"));
                }
                if values.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::validation("perturbation values must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Static description of an episodic environment plus the constants the
/// safety layer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub horizon: usize,
    pub state_bounds: BoxBounds,
    pub action_bounds: BoxBounds,
    pub lipschitz: Lipschitz,
    /// Lower bound on every emitted cost.
    pub min_cost: f64,
    pub perturbation: Perturbation,
}

impl EnvParams {
    pub fn state_dim(&self) -> usize {
        self.state_bounds.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_bounds.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::validation("horizon must be positive"));
        }
        let l = &self.lipschitz;
        for (name, v) in [("cost", l.cost), ("transition", l.transition), ("prior", l.prior)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "lipschitz {name} = {v} must be finite and >= 0"
                )));
            }
        }
        if !(self.min_cost.is_finite() && self.min_cost >= 0.0) {
            return Err(Error::validation("min_cost must be finite and >= 0"));
        }
        self.perturbation.validate(self.horizon)
    }
}
