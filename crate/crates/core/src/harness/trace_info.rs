use std::path::Path;

use serde::Serialize;

use crate::envs::{load_trace, synth_trace, SynthKind, Trace, TraceSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceInfo {
    pub name: String,
    pub source: TraceSource,
    pub len: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub horizon: usize,
    pub stride: usize,
    pub windows: usize,
}

/// Loads a trace from a CSV path, or synthesizes one from
/// `synth:<constant|sinusoidal|spiky>[:len[:level[:seed]]]`.
pub fn open_trace(spec: &str) -> Result<Trace> {
    let Some(rest) = spec.strip_prefix("synth:") else {
        return load_trace(Path::new(spec), 1.0);
    };
    let parts: Vec<&str> = rest.split(':').collect();
    let kind = match parts[0] {
        "constant" => SynthKind::Constant,
        "sinusoidal" => SynthKind::Sinusoidal,
        "spiky" => SynthKind::Spiky,
        k => return Err(Error::config(format!("unknown synthetic trace kind {k:?}"))),
    };
    let num = |i: usize, default: f64| -> Result<f64> {
        parts.get(i).map_or(Ok(default), |s| {
            s.parse()
                .map_err(|_| Error::config(format!("bad number {s:?} in {spec:?}")))
        })
    };
    if parts.len() > 4 {
        return Err(Error::config(format!("too many fields in {spec:?}")));
    }
    Ok(synth_trace(
        kind,
        num(1, 720.0)? as usize,
        num(3, 0.0)? as u64,
        num(2, 1.0)?,
    ))
}

/// Length, range, mean and window count of `trace`.
pub fn trace_info(trace: &Trace, horizon: usize, stride: usize) -> Result<TraceInfo> {
    let windows = trace.window_count(horizon, stride)?;
    let v = &trace.values;
    Ok(TraceInfo {
        name: trace.name.clone(),
        source: trace.source,
        len: v.len(),
        min: v.iter().cloned().fold(f64::INFINITY, f64::min),
        max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        horizon,
        stride,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_spec_strings() {
        let t = open_trace("synth:constant:48:2.5").unwrap();
        let i = trace_info(&t, 24, 1).unwrap();
        assert_eq!((i.len, i.windows), (48, 25));
        assert_eq!((i.min, i.max, i.mean), (2.5, 2.5, 2.5));
        assert!(open_trace("synth:wavy").is_err());
        assert!(trace_info(&t, 49, 1).is_err());
    }
}
