use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const METRICS_HEADER: &str = "# acmdp-metrics v1";
pub const CURVE_HEADER: &str = "# acmdp-learning-curve v1";
pub const SWEEP_HEADER: &str = "# acmdp-sweep v1";

/// One episode of one roster policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub policy: String,
    pub seed: u64,
    #[serde(rename = "return")]
    pub return_: f64,
    /// Return of the frozen unconstrained reference on the same sequence, minus ours.
    pub regret: f64,
    /// Mean `regret` over the trailing window ending at this episode.
    pub windowed_regret: f64,
    /// Return of the frozen ACD reference on the same sequence, minus ours.
    pub pseudo_regret: f64,
    pub violated: bool,
    pub worst_slack: f64,
    /// `max_h J_h / ((1+λ)J†_h + hb)`.
    pub max_violation_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub policy: String,
    /// Mean over seeds.
    #[serde(rename = "return")]
    pub return_: f64,
    /// Mean over seeds.
    pub pseudo_regret: f64,
    /// Any seed violated.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub policy: String,
    pub mean_regret: f64,
    pub ci95: f64,
    pub violation_rate: f64,
}

/// Writes `header` as a comment line followed by the CSV of `rows`.
pub fn write_csv<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`], skipping the comment line.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

/// Fills `windowed_regret` as a trailing mean of width `window` over `rows`
/// (one policy and seed, in episode order).
pub fn fill_windowed(rows: &mut [MetricsRow], window: usize) {
    let mut sum = 0.0;
    for i in 0..rows.len() {
        sum += rows[i].regret;
        if i >= window {
            sum -= rows[i - window].regret;
        }
        let n = (i + 1).min(window);
        rows[i].windowed_regret = sum / n as f64;
    }
}

/// Per-episode means over seeds, in the order policies first appear.
pub fn learning_curve(rows: &[MetricsRow]) -> Vec<CurveRow> {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let mut out = Vec::new();
    for p in policies {
        let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.policy == p).collect();
        let last = mine.iter().map(|r| r.episode).max().unwrap_or(0);
        let mut acc = vec![(0.0, 0.0, false, 0usize); last + 1];
        for r in &mine {
            let a = &mut acc[r.episode];
            a.0 += r.return_;
            a.1 += r.pseudo_regret;
            a.2 |= r.violated;
            a.3 += 1;
        }
        for (episode, (ret, preg, violated, n)) in acc.into_iter().enumerate() {
            if n > 0 {
                out.push(CurveRow {
                    episode,
                    policy: p.to_string(),
                    return_: ret / n as f64,
                    pseudo_regret: preg / n as f64,
                    violated,
                });
            }
        }
    }
    out
}

/// Mean and 95% normal half-width of `xs`; the half-width is 0 below two samples.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(episode: usize, policy: &str, regret: f64) -> MetricsRow {
        MetricsRow {
            episode,
            policy: policy.into(),
            seed: 0,
            return_: -regret,
            regret,
            windowed_regret: 0.0,
            pseudo_regret: regret / 2.0,
            violated: false,
            worst_slack: 1.0,
            max_violation_ratio: 0.5,
        }
    }

    #[test]
    fn trailing_window() {
        let mut rows: Vec<_> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, r)| row(i + 1, "a", *r))
            .collect();
        fill_windowed(&mut rows, 2);
        let w: Vec<f64> = rows.iter().map(|r| r.windowed_regret).collect();
        assert_eq!(w, vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn csv_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![row(1, "acrl", 0.25), row(2, "rl+acd", 1.0)];
        write_csv(&path, METRICS_HEADER, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(
            lines.next(),
            Some("episode,policy,seed,return,regret,windowed_regret,pseudo_regret,violated,worst_slack,max_violation_ratio")
        );
        let back: Vec<MetricsRow> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn curve_averages_over_seeds() {
        let mut a = row(1, "p", 1.0);
        let mut b = row(1, "p", 3.0);
        a.seed = 0;
        b.seed = 1;
        b.violated = true;
        let c = learning_curve(&[a, b]);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].return_, -2.0);
        assert!(c[0].violated);
    }

    #[test]
    fn confidence_interval() {
        let (m, h) = mean_ci95(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_ci95(&[5.0]), (5.0, 0.0));
    }
}
