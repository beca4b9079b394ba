//! Allowed-deviation bookkeeping, safe action sets and the ACD executor.
//!
//! A [`SensitivityTable`] turns the Lipschitz and perturbation constants
//! into per-round deviation weights. A [`SafetyLedger`] tracks the allowed
//! deviation `D_h` over one episode, and [`AcdController`] projects every
//! ML action into the ball of radius `D_h / Γ_{h,h}` around the prior's
//! action.
//!
//! ```
//! use std::sync::Arc;
//! use acmdp::model::{CompetitiveSpec, Lipschitz, Perturbation};
//! use acmdp::safety::{SafetyLedger, SensitivityTable};
//!
//! let lip = Lipschitz { cost: 1.0, transition: 1.0, prior: 0.0 };
//! let table = Arc::new(SensitivityTable::new(&lip, &Perturbation::Geometric { rho: 1.0 }, 3));
//! let ledger = SafetyLedger::new(CompetitiveSpec::new(2.0, 2.0)?, table, 1.0);
//! assert_eq!(ledger.allowed(), 4.0);
//! assert!((ledger.radius() - 4.0 / 3.0).abs() < 1e-15);
//! # Ok::<(), acmdp::Error>(())
//! ```

mod acd;
mod ledger;
mod projection;
mod sensitivity;

pub use acd::{acd_paired_rollout, acd_rollout, anytime_check, AcdController, AnytimeReport, ANYTIME_TOLERANCE};
pub use ledger::{LedgerRow, SafetyLedger};
pub use projection::{ActionSet, SafeSet};
pub use sensitivity::SensitivityTable;

pub use crate::model::CompetitiveSpec;
