use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::trace::{augment, load_trace, synth_trace_with_phase, SynthKind, Trace};
use crate::error::{Error, Result};
use crate::model::RoundContext;

/// Where one exogenous series comes from: a CSV trace or a synthetic profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    /// `timestamp,value` CSV; when absent the synthetic profile is used.
    pub path: Option<PathBuf>,
    pub scale: f64,
    pub synth: SynthKind,
    pub level: f64,
    /// Phase shift of the sinusoid, radians.
    pub phase: f64,
    /// Length of the synthetic series in hours.
    pub length: usize,
    pub seed: u64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            path: None,
            scale: 1.0,
            synth: SynthKind::Sinusoidal,
            level: 1.0,
            phase: 0.0,
            length: 24 * 7,
            seed: 0,
        }
    }
}

impl SeriesConfig {
    pub fn synthetic(synth: SynthKind, level: f64, phase: f64) -> Self {
        SeriesConfig {
            synth,
            level,
            phase,
            ..Default::default()
        }
    }

    pub fn load(&self) -> Result<Trace> {
        match &self.path {
            Some(p) => load_trace(p, self.scale),
            None => {
                let mut t = synth_trace_with_phase(self.synth, self.length, self.seed, self.level, self.phase);
                for v in &mut t.values {
                    *v *= self.scale;
                }
                t.scale = self.scale;
                Ok(t)
            }
        }
    }
}

/// Two aligned series sliced into per-episode windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub primary: SeriesConfig,
    pub secondary: SeriesConfig,
    pub stride: usize,
    /// Jittered replicas per window (1 = no augmentation).
    pub copies: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            primary: SeriesConfig::default(),
            secondary: SeriesConfig::default(),
            stride: 24,
            copies: 1,
            jitter: 0.0,
            seed: 0,
        }
    }
}

/// Per-window, per-round exogenous inputs `(primary, secondary)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    horizon: usize,
    windows: Arc<Vec<Vec<[f64; 2]>>>,
}

impl Exogenous {
    pub fn from_config(cfg: &DataConfig, horizon: usize) -> Result<Self> {
        if cfg.copies == 0 {
            return Err(Error::config("data.copies must be at least 1"));
        }
        if !(0.0..=1.0).contains(&cfg.jitter) {
            return Err(Error::config("data.jitter must lie in [0, 1]"));
        }
        let a = cfg.primary.load()?;
        let b = cfg.secondary.load()?;
        let wa = augment(&a.windows(horizon, cfg.stride)?, cfg.copies, cfg.jitter, cfg.seed);
        let wb = augment(
            &b.windows(horizon, cfg.stride)?,
            cfg.copies,
            cfg.jitter,
            cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        );
        let n = wa.len().min(wb.len());
        let windows = (0..n)
            .map(|w| (0..horizon).map(|h| [wa[w][h], wb[w][h]]).collect())
            .collect();
        Ok(Exogenous {
            horizon,
            windows: Arc::new(windows),
        })
    }

    /// A single window with explicit values.
    pub fn from_rows(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let horizon = rows.first().map_or(0, Vec::len);
        if horizon == 0 || rows.iter().any(|r| r.len() != horizon) {
            return Err(Error::validation("exogenous windows must be nonempty and equally long"));
        }
        if rows.iter().flatten().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("exogenous values must be finite and >= 0"));
        }
        Ok(Exogenous {
            horizon,
            windows: Arc::new(rows),
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    /// Context for 1-based `round` of window `window` (wrapping).
    pub fn context(&self, window: usize, round: usize) -> RoundContext {
        let w = &self.windows[window % self.windows.len()];
        RoundContext::new(&w[round - 1])
    }

    /// Per-round mean over all windows; the planner's nominal profile.
    pub fn nominal(&self) -> Vec<RoundContext> {
        let n = self.windows.len() as f64;
        (0..self.horizon)
            .map(|h| {
                let mut s = [0.0; 2];
                for w in self.windows.iter() {
                    s[0] += w[h][0];
                    s[1] += w[h][1];
                }
                RoundContext::new(&[s[0] / n, s[1] / n])
            })
            .collect()
    }

    pub fn max_values(&self) -> [f64; 2] {
        let mut m = [0.0f64; 2];
        for v in self.windows.iter().flatten() {
            m[0] = m[0].max(v[0]);
            m[1] = m[1].max(v[1]);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_and_nominal() {
        let cfg = DataConfig {
            primary: SeriesConfig::synthetic(SynthKind::Constant, 2.0, 0.0),
            secondary: SeriesConfig::synthetic(SynthKind::Sinusoidal, 1.0, 0.0),
            copies: 3,
            jitter: 0.1,
            ..Default::default()
        };
        let ex = Exogenous::from_config(&cfg, 24).unwrap();
        assert_eq!(ex.n_windows(), 7 * 3);
        assert_eq!(ex.context(0, 1).get(0), 2.0);
        let nom = ex.nominal();
        assert_eq!(nom.len(), 24);
        assert!(nom.iter().all(|c| (c.get(0) - 2.0).abs() < 0.2));
    }
}
