use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    File,
    Synthetic,
}

/// An hourly series of nonnegative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub name: String,
    pub values: Vec<f64>,
    pub source: TraceSource,
    pub scale: f64,
}

#[derive(Debug, Deserialize)]
struct Row {
    #[allow(dead_code)]
    timestamp: String,
    value: f64,
}

/// Reads a `timestamp,value` CSV and multiplies every value by `scale`.
pub fn load_trace(path: impl AsRef<Path>, scale: f64) -> Result<Trace> {
    let path = path.as_ref();
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::validation(format!(
            "trace scale {scale} must be finite and >= 0"
        )));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!(
                "expected header `timestamp,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut values = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        if !row.value.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                reason: format!("value {} is not finite", row.value),
            });
        }
        if row.value < 0.0 {
            return Err(Error::validation(format!(
                "{}:{line}: negative value {}",
                path.display(),
                row.value
            )));
        }
        values.push(row.value * scale);
    }
    if values.is_empty() {
        return Err(Error::validation(format!("{} holds no rows", path.display())));
    }
    let name = path
        .file_stem()
        .map_or_else(|| "trace".to_owned(), |s| s.to_string_lossy().into_owned());
    Ok(Trace {
        name,
        values,
        source: TraceSource::File,
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Constant,
    /// `level · (1 + sin(2π t / 24 + phase))`.
    Sinusoidal,
    /// Constant base with random bursts up to `2·level`.
    Spiky,
}

/// Deterministic synthetic trace of `len` hourly values in `[0, 2·level]`.
pub fn synth_trace(kind: SynthKind, len: usize, seed: u64, level: f64) -> Trace {
    synth_trace_with_phase(kind, len, seed, level, 0.0)
}

/// As [`synth_trace`], shifting the sinusoid by `phase` radians.
pub fn synth_trace_with_phase(kind: SynthKind, len: usize, seed: u64, level: f64, phase: f64) -> Trace {
    let level = level.max(0.0);
    let values = match kind {
        SynthKind::Constant => vec![level; len],
        SynthKind::Sinusoidal => (0..len)
            .map(|t| {
                let angle = 2.0 * std::f64::consts::PI * t as f64 / 24.0 + phase;
                (level * (1.0 + angle.sin())).clamp(0.0, 2.0 * level)
            })
            .collect(),
        SynthKind::Spiky => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..len)
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        rng.gen_range(level..=2.0 * level)
                    } else {
                        rng.gen_range(0.5 * level..=level)
                    }
                })
                .collect()
        }
    };
    Trace {
        name: format!("{kind:?}").to_lowercase(),
        values,
        source: TraceSource::Synthetic,
        scale: 1.0,
    }
}

impl Trace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of `horizon`-long windows at the given stride: `⌊(N − H)/stride⌋ + 1`.
    pub fn window_count(&self, horizon: usize, stride: usize) -> Result<usize> {
        if horizon == 0 || stride == 0 {
            return Err(Error::config("horizon and stride must be positive"));
        }
        if self.len() < horizon {
            return Err(Error::validation(format!(
                "trace `{}` has {} values, shorter than the horizon {horizon}",
                self.name,
                self.len()
            )));
        }
        Ok((self.len() - horizon) / stride + 1)
    }

    /// All windows of length `horizon` at `stride`.
    pub fn windows(&self, horizon: usize, stride: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.window_count(horizon, stride)?;
        Ok((0..n)
            .map(|w| self.values[w * stride..w * stride + horizon].to_vec())
            .collect())
    }
}

/// Expands windows into `copies` jittered replicas each: every value is
/// multiplied by an independent factor drawn uniformly from `[1 − jitter, 1 + jitter]`.
/// Replica 0 of each window is the unjittered original.
pub fn augment(windows: &[Vec<f64>], copies: usize, jitter: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = jitter.clamp(0.0, 1.0);
    let mut out = Vec::with_capacity(windows.len() * copies.max(1));
    for w in windows {
        out.push(w.clone());
        for _ in 1..copies {
            out.push(
                w.iter()
                    .map(|v| {
                        let f = if jitter > 0.0 {
                            rng.gen_range(1.0 - jitter..=1.0 + jitter)
                        } else {
                            1.0
                        };
                        v * f
                    })
                    .collect(),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn scaled_load() {
        let f = write("timestamp,value\n0,1\n1,2\n2,3\n");
        let t = load_trace(f.path(), 2.0).unwrap();
        assert_eq!(t.values, vec![2.0, 4.0, 6.0]);
        assert_eq!(t.source, TraceSource::File);
    }

    #[test]
    fn empty_file_is_rejected() {
        let f = write("timestamp,value\n");
        assert!(matches!(load_trace(f.path(), 1.0), Err(Error::Validation(_))));
        let g = write("");
        assert!(load_trace(g.path(), 1.0).is_err());
    }

    #[test]
    fn malformed_row_names_its_line() {
        let f = write("timestamp,value\n0,1\n1,oops\n");
        match load_trace(f.path(), 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_value_is_a_validation_error() {
        let f = write("timestamp,value\n0,1\n1,-2\n");
        assert!(matches!(load_trace(f.path(), 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn year_of_hours_gives_daily_windows() {
        let t = synth_trace(SynthKind::Constant, 8760, 0, 1.0);
        assert_eq!(t.window_count(24, 24).unwrap(), 365);
        assert_eq!(t.windows(24, 24).unwrap().len(), 365);
        let short = synth_trace(SynthKind::Constant, 10, 0, 1.0);
        assert!(short.window_count(24, 24).is_err());
    }

    #[test]
    fn synthetic_kinds() {
        assert!(synth_trace(SynthKind::Constant, 48, 0, 5.0)
            .values
            .iter()
            .all(|&v| v == 5.0));
        let s = synth_trace(SynthKind::Sinusoidal, 24, 0, 5.0);
        let mean = s.values.iter().sum::<f64>() / 24.0;
        assert!((mean - 5.0).abs() < 1e-9);
        let a = synth_trace(SynthKind::Spiky, 200, 7, 3.0);
        assert_eq!(a, synth_trace(SynthKind::Spiky, 200, 7, 3.0));
        for t in [&s, &a] {
            assert!(t
                .values
                .iter()
                .all(|&v| (0.0..=2.0 * t.values.iter().cloned().fold(0.0, f64::max)).contains(&v)));
        }
        assert!(a.values.iter().all(|&v| (0.0..=6.0).contains(&v)));
    }

    #[test]
    fn augmentation_is_seeded() {
        let w = vec![vec![1.0; 24], vec![2.0; 24]];
        let a = augment(&w, 5, 0.1, 3);
        assert_eq!(a.len(), 10);
        assert_eq!(a[0], w[0]);
        assert_eq!(a, augment(&w, 5, 0.1, 3));
        assert!(a.iter().flatten().all(|v| (0.9 - 1e-12..=2.2 + 1e-12).contains(v)));
    }
}
