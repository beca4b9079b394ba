use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParam};
use super::metrics::{write_csv, SweepRow, SWEEP_HEADER};
use super::run::{execute, RunSummary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunSummary>,
    pub acd_violations: usize,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.acd_violations == 0
    }
}

/// `<root>/<name>-sweep-<param>-<hash>`.
pub fn sweep_dir(cfg: &ExperimentConfig, param: SweepParam, root: &Path) -> Result<PathBuf> {
    Ok(root.join(format!("{}-sweep-{}-{}", cfg.name, param.name(), &cfg.hash()?[..12])))
}

/// Runs the experiment once per value of `param`, each into its own
/// subdirectory of `dir`, and writes `sweep.csv`.
pub fn sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    dir: &Path,
    jobs: Option<usize>,
) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::config("sweep has no values"));
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &v in values {
        let c = cfg.with_param(param, v)?;
        let s = execute(&c, &dir.join(format!("{}={v}", param.name())), jobs)?;
        for p in &s.policies {
            rows.push(SweepRow {
                param: v,
                policy: p.policy.clone(),
                mean_regret: p.final_window_regret,
                ci95: p.final_window_regret_ci95,
                violation_rate: p.violation_rate,
            });
        }
        runs.push(s);
    }
    write_csv(&dir.join("sweep.csv"), SWEEP_HEADER, &rows)?;
    let acd_violations = runs.iter().map(|r| r.acd_violations).sum();
    Ok(SweepSummary {
        param,
        rows,
        runs,
        acd_violations,
    })
}
