//! Experiment configs, runs, sweeps and verification.
//!
//! A run trains every roster policy on each seed, evaluates the frozen
//! result on held-out sequences and writes:
//!
//! - `config.toml`: the canonical config the run directory is keyed on
//! - `stamp.json`: config hashes and crate version
//! - `metrics.csv`, `eval.csv`: one row per episode, policy and seed
//! - `learning_curve.csv`: per-episode means over seeds
//! - `summary.json`, and `checkpoints/` for learners
//!
//! Nothing written depends on wall-clock time or thread count.

mod config;
mod metrics;
mod run;
mod sweep;
#[cfg(test)]
mod tests;
mod trace_info;
mod verify;

pub use config::{
    git_blob_hash, EnvChoice, ExperimentConfig, LoadedConfig, ReferenceConfig, ReferenceSource, RosterEntry, SeedRange,
    SpecConfig, SweepConfig, SweepParam, MAX_EPISODES,
};
pub use metrics::{
    fill_windowed, learning_curve, mean_ci95, read_csv, write_csv, CurveRow, MetricsRow, SweepRow, CURVE_HEADER,
    METRICS_HEADER, SWEEP_HEADER,
};
pub use run::{
    eval_sequence, execute, in_pool, reference, reference_policy, reference_sequence, run, run_bench, run_dir,
    summarize, train_sequence, Bench, GridBench, PolicySummary, ReferenceKind, ReferenceSummary, RunRows, RunSummary,
    Stamp, TinyBench,
};
pub use sweep::{sweep, sweep_dir, SweepSummary};
pub use trace_info::{open_trace, trace_info, TraceInfo};
pub use verify::{verify, DpAgreement, SpecVerification, VerifyReport, DP_TOLERANCE};
