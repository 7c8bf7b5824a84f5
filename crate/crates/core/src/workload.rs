//! Workload generators: synthetic periodic patterns and replayed CSV traces.
//!
//! Every generator is a pure function of (spec, interval), so runs are
//! reproducible for a given seed and traces can be sampled at random offsets.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatternKind {
    /// Smooth sinusoid between the user bounds with the given period.
    PredictableBursting {
        #[serde(default = "default_period")]
        period: u64,
    },
    /// The sinusoid plus seeded uniform jitter and occasional short bursts.
    Variations {
        #[serde(default = "default_period")]
        period: u64,
        #[serde(default = "default_jitter")]
        jitter: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Square wave: `dwell` intervals at the top, `dwell` at the bottom.
    OnOff {
        #[serde(default = "default_dwell")]
        dwell: u64,
    },
    /// Replay of a recorded trace file.
    Trace {
        path: PathBuf,
        #[serde(default = "default_trace_scale")]
        scale: TraceScale,
    },
}

fn default_period() -> u64 {
    1000
}

fn default_jitter() -> f64 {
    5.0
}

fn default_dwell() -> u64 {
    500
}

fn default_trace_scale() -> TraceScale {
    TraceScale::Linear
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceScale {
    /// Affine map from the observed [min, max] onto [u_min, u_max].
    Linear,
    /// Replay raw values, clamped into [u_min, u_max].
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternSpec {
    #[serde(flatten)]
    pub kind: PatternKind,
    /// Lower workload bound in users/sec.
    pub u_min: f64,
    /// Upper workload bound in users/sec.
    pub u_max: f64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self {
            kind: PatternKind::PredictableBursting { period: 1000 },
            u_min: 10.0,
            u_max: 100.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("workload bounds must satisfy 0 <= u_min < u_max, got [{u_min}, {u_max}]")]
    BadBounds { u_min: f64, u_max: f64 },
    #[error("pattern period must be at least 2 intervals, got {0}")]
    BadPeriod(u64),
    #[error("jitter amplitude must be non-negative, got {0}")]
    BadJitter(f64),
    #[error("cannot read trace {path}: {source}")]
    TraceIo {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace {path} row {row}: expected 't,count', got '{line}'")]
    TraceRow {
        path: PathBuf,
        row: usize,
        line: String,
    },
    #[error("trace {path} has {rows} data row(s); at least 2 are required")]
    TraceTooShort { path: PathBuf, rows: usize },
    #[error("trace {path} is constant ({value}); a degenerate range cannot be scaled")]
    TraceDegenerate { path: PathBuf, value: f64 },
}

impl PatternSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.u_min >= 0.0 && self.u_min < self.u_max) {
            return Err(WorkloadError::BadBounds {
                u_min: self.u_min,
                u_max: self.u_max,
            });
        }
        match &self.kind {
            PatternKind::PredictableBursting { period } => {
                if *period < 2 {
                    return Err(WorkloadError::BadPeriod(*period));
                }
            }
            PatternKind::Variations { period, jitter, .. } => {
                if *period < 2 {
                    return Err(WorkloadError::BadPeriod(*period));
                }
                if *jitter < 0.0 || jitter.is_nan() {
                    return Err(WorkloadError::BadJitter(*jitter));
                }
            }
            PatternKind::OnOff { dwell } => {
                if *dwell < 2 {
                    return Err(WorkloadError::BadPeriod(*dwell));
                }
            }
            PatternKind::Trace { .. } => {}
        }
        Ok(())
    }

    fn mid(&self) -> f64 {
        (self.u_min + self.u_max) / 2.0
    }

    fn amplitude(&self) -> f64 {
        (self.u_max - self.u_min) / 2.0
    }
}

/// Loads a `t,count` trace. The header row is optional; any other row that
/// fails to parse is reported with its line number.
pub fn load_trace(
    path: &Path,
    scale: TraceScale,
    u_min: f64,
    u_max: f64,
) -> Result<Vec<f64>, WorkloadError> {
    let raw = fs::read_to_string(path).map_err(|source| WorkloadError::TraceIo {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let row = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_trace_row(trimmed) {
            Some(count) => values.push(count),
            None if row == 1 && values.is_empty() => {
                // a non-numeric first row is the optional header
                continue;
            }
            None => {
                return Err(WorkloadError::TraceRow {
                    path: path.to_path_buf(),
                    row,
                    line: trimmed.to_string(),
                });
            }
        }
    }
    if values.len() < 2 {
        return Err(WorkloadError::TraceTooShort {
            path: path.to_path_buf(),
            rows: values.len(),
        });
    }
    match scale {
        TraceScale::Linear => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                return Err(WorkloadError::TraceDegenerate {
                    path: path.to_path_buf(),
                    value: lo,
                });
            }
            Ok(values
                .into_iter()
                .map(|v| (u_min + (v - lo) * (u_max - u_min) / (hi - lo)).clamp(u_min, u_max))
                .collect())
        }
        TraceScale::None => Ok(values.into_iter().map(|v| v.clamp(u_min, u_max)).collect()),
    }
}

fn parse_trace_row(line: &str) -> Option<f64> {
    let mut fields = line.split(',');
    let t = fields.next()?.trim();
    let count = fields.next()?.trim();
    if fields.next().is_some() {
        return None;
    }
    t.parse::<f64>().ok()?;
    let count = count.parse::<f64>().ok()?;
    count.is_finite().then_some(count)
}

/// A ready-to-sample workload source.
#[derive(Debug, Clone)]
pub struct WorkloadGenerator {
    spec: PatternSpec,
    trace: Option<Vec<f64>>,
}

impl WorkloadGenerator {
    pub fn new(spec: PatternSpec) -> Result<Self, WorkloadError> {
        spec.validate()?;
        let trace = match &spec.kind {
            PatternKind::Trace { path, scale } => {
                Some(load_trace(path, *scale, spec.u_min, spec.u_max)?)
            }
            _ => None,
        };
        Ok(Self { spec, trace })
    }

    pub fn spec(&self) -> &PatternSpec {
        &self.spec
    }

    /// Users/sec at interval `t`, or `None` once a trace is exhausted.
    /// Synthetic patterns never end.
    pub fn users_at(&self, t: u64) -> Option<f64> {
        let spec = &self.spec;
        match &spec.kind {
            PatternKind::PredictableBursting { period } => Some(sinusoid(spec, t, *period)),
            PatternKind::Variations {
                period,
                jitter,
                seed,
            } => {
                let base = sinusoid(spec, t, *period);
                let noise = jitter * (2.0 * unit_hash(*seed, t, 0) - 1.0);
                let burst = if burst_active(*seed, t) {
                    0.4 * spec.amplitude()
                } else {
                    0.0
                };
                Some((base + noise + burst).clamp(spec.u_min, spec.u_max))
            }
            PatternKind::OnOff { dwell } => Some(if (t / dwell).is_multiple_of(2) {
                spec.u_max
            } else {
                spec.u_min
            }),
            PatternKind::Trace { .. } => {
                let trace = self.trace.as_ref().expect("trace loaded at construction");
                trace.get(t as usize).copied()
            }
        }
    }
}

/// Sinusoid through the bounds; the phase uses `t mod period` so the pattern
/// repeats bit-exactly.
fn sinusoid(spec: &PatternSpec, t: u64, period: u64) -> f64 {
    let phase = (t % period) as f64 / period as f64;
    spec.mid() + spec.amplitude() * (TAU * phase).sin()
}

/// Bursts last three intervals and start independently at each interval with
/// probability 0.02.
fn burst_active(seed: u64, t: u64) -> bool {
    (0..3u64)
        .filter(|&back| back <= t)
        .any(|back| unit_hash(seed, t - back, 1) < 0.02)
}

/// Deterministic hash of (seed, interval, channel) into [0, 1). A counter-based
/// mix keeps generation random-access and identical across platforms.
fn unit_hash(seed: u64, t: u64, channel: u64) -> f64 {
    let mut z =
        seed ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ channel.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}
