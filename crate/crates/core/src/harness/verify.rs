use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::envs::ModelClass;
use crate::error::Result;
use crate::learner::{Mode, Planner, TreePlanner};
use crate::model::CompetitiveSpec;
use crate::oracle::{
    exact_dp_model, exhaustive_safety_check, load_fixtures, theorem_check, SafetyCheckReport, TheoremReport, TinyEnv,
};

/// Tolerance for value-iteration against exhaustive DP.
pub const DP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpAgreement {
    pub model: usize,
    pub value_iteration: f64,
    pub exact: f64,
}

impl DpAgreement {
    pub fn agrees(&self) -> bool {
        (self.value_iteration - self.exact).abs() <= DP_TOLERANCE
    }
}

/// Every check for one fixture and spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecVerification {
    pub safety: SafetyCheckReport,
    pub dp: Vec<DpAgreement>,
    pub theorem: TheoremReport,
}

impl SpecVerification {
    pub fn passed(&self) -> bool {
        self.safety.passed() && self.dp.iter().all(DpAgreement::agrees) && self.theorem.holds(DP_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub fixtures: usize,
    pub checks: Vec<SpecVerification>,
}

impl VerifyReport {
    /// True also when the directory held no fixtures; see [`VerifyReport::is_empty`].
    pub fn passed(&self) -> bool {
        self.checks.iter().all(SpecVerification::passed)
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &SpecVerification> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Exhaustive safety, DP agreement and the regret bound for every fixture
/// in `dir` and every spec the fixture lists.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let fixtures: Vec<_> = load_fixtures(dir)?.into_iter().map(Arc::new).collect();
    let jobs: Vec<_> = fixtures
        .iter()
        .flat_map(|t| t.specs.iter().map(move |s| (t.clone(), s[0], s[1])))
        .collect();
    let checks = jobs
        .par_iter()
        .map(|(t, lambda, b)| -> Result<SpecVerification> {
            let spec = CompetitiveSpec::new(*lambda, *b)?;
            let safety = exhaustive_safety_check(t, spec)?;
            let env = TinyEnv::new(t.clone());
            let planner = TreePlanner::new(&env.candidates()?, &env.prior(), spec, Mode::Acd)?;
            let dp = (0..t.models.len())
                .map(|g| {
                    Ok(DpAgreement {
                        model: g,
                        value_iteration: planner.plan(g, 0.0)?.v(1, 0),
                        exact: exact_dp_model(t, g, spec, true)?.value,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let theorem = theorem_check(t, spec)?;
            Ok(SpecVerification { safety, dp, theorem })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        fixtures: fixtures.len(),
        checks,
    })
}
