use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EnergyError, Result};

pub const ELECTRICAL_HEADER: &str = "timestamp_s,voltage_v,current_a";
pub const POWER_HEADER: &str = "timestamp_s,power_w";
pub const NOMINAL_RATE_HZ: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp_s: f64,
    /// Present for voltage/current traces.
    pub voltage_v: Option<f64>,
    pub current_a: Option<f64>,
    pub power_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub nominal_rate_hz: f64,
    pub samples: Vec<Sample>,
}

impl PowerTrace {
    /// Builds a power-only trace; timestamps must increase strictly.
    pub fn from_power(points: &[(f64, f64)]) -> Result<Self> {
        let mut samples = Vec::with_capacity(points.len());
        for (i, &(t, p)) in points.iter().enumerate() {
            check_order(samples.last(), t, i + 1)?;
            samples.push(Sample {
                timestamp_s: t,
                voltage_v: None,
                current_a: None,
                power_w: p,
            });
        }
        Ok(Self {
            nominal_rate_hz: NOMINAL_RATE_HZ,
            samples,
        })
    }

    pub fn is_electrical(&self) -> bool {
        self.samples.first().is_some_and(|s| s.voltage_v.is_some())
    }

    /// `(first, last)` timestamp.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((
            self.samples.first()?.timestamp_s,
            self.samples.last()?.timestamp_s,
        ))
    }

    pub fn duration_s(&self) -> f64 {
        self.span().map_or(0.0, |(a, b)| b - a)
    }
}

fn check_order(prev: Option<&Sample>, t: f64, line: usize) -> Result<()> {
    if let Some(p) = prev {
        if !(t > p.timestamp_s) {
            return Err(EnergyError::NonMonotoneTimestamp {
                line,
                previous: p.timestamp_s,
                found: t,
            });
        }
    }
    Ok(())
}

/// Parses a CSV trace with header `timestamp_s,voltage_v,current_a` (power
/// is `V * I`) or `timestamp_s,power_w`. Line numbers in errors are 1-based
/// and count the header.
pub fn parse_trace(text: &str) -> Result<PowerTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| EnergyError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let electrical = match header.join(",").as_str() {
        ELECTRICAL_HEADER => true,
        POWER_HEADER => false,
        other => return Err(EnergyError::UnknownHeader(other.to_owned())),
    };
    let width = if electrical { 3 } else { 2 };
    let mut samples: Vec<Sample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EnergyError::MalformedRow {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(EnergyError::MalformedRow {
                line,
                reason: format!("expected {width} fields, got {}", record.len()),
            });
        }
        let mut values = [0.0f64; 3];
        for (i, field) in record.iter().enumerate() {
            values[i] = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| EnergyError::MalformedRow {
                    line,
                    reason: format!("field {} ({field:?}) is not a finite number", i + 1),
                })?;
        }
        check_order(samples.last(), values[0], line)?;
        samples.push(if electrical {
            Sample {
                timestamp_s: values[0],
                voltage_v: Some(values[1]),
                current_a: Some(values[2]),
                power_w: values[1] * values[2],
            }
        } else {
            Sample {
                timestamp_s: values[0],
                voltage_v: None,
                current_a: None,
                power_w: values[1],
            }
        });
    }
    Ok(PowerTrace {
        nominal_rate_hz: NOMINAL_RATE_HZ,
        samples,
    })
}

/// Writes the trace back in its own CSV dialect. Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_trace(trace: &PowerTrace) -> String {
    let mut out = String::new();
    let electrical = trace.is_electrical();
    out.push_str(if electrical {
        ELECTRICAL_HEADER
    } else {
        POWER_HEADER
    });
    out.push('\n');
    for s in &trace.samples {
        match (electrical, s.voltage_v, s.current_a) {
            (true, Some(v), Some(i)) => writeln!(out, "{:?},{:?},{:?}", s.timestamp_s, v, i),
            _ => writeln!(out, "{:?},{:?}", s.timestamp_s, s.power_w),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// Parameters of a synthetic constant-load trace with ripple and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    pub mean_power_w: f64,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Supply voltage; when positive the trace is written as voltage/current.
    pub voltage_v: f64,
    /// Amplitude of a sinusoidal ripple in watts.
    pub ripple_w: f64,
    pub ripple_hz: f64,
    /// Standard deviation of white noise in watts.
    pub noise_w: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            mean_power_w: 4.0,
            duration_s: 1.0,
            rate_hz: NOMINAL_RATE_HZ,
            voltage_v: 0.0,
            ripple_w: 0.0,
            ripple_hz: 50.0,
            noise_w: 0.0,
        }
    }
}

pub fn synthetic_trace(spec: &TraceSpec, seed: u64) -> Result<PowerTrace> {
    if !(spec.rate_hz > 0.0 && spec.duration_s > 0.0) {
        return Err(EnergyError::InvalidArgument(
            "rate_hz and duration_s must be positive".into(),
        ));
    }
    let noise = Normal::new(0.0, spec.noise_w.max(0.0))
        .map_err(|e| EnergyError::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (spec.duration_s * spec.rate_hz).round() as usize + 1;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / spec.rate_hz;
            let mut p = spec.mean_power_w + spec.ripple_w * (TAU * spec.ripple_hz * t).sin();
            if spec.noise_w > 0.0 {
                p += noise.sample(&mut rng);
            }
            if spec.voltage_v > 0.0 {
                let current = p / spec.voltage_v;
                Sample {
                    timestamp_s: t,
                    voltage_v: Some(spec.voltage_v),
                    current_a: Some(current),
                    power_w: spec.voltage_v * current,
                }
            } else {
                Sample {
                    timestamp_s: t,
                    voltage_v: None,
                    current_a: None,
                    power_w: p,
                }
            }
        })
        .collect();
    Ok(PowerTrace {
        nominal_rate_hz: spec.rate_hz,
        samples,
    })
}
