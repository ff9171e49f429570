use serde::{Deserialize, Serialize};

use super::trace::PowerTrace;
use super::{EnergyError, Result};

/// Power at `t` by linear interpolation between the neighbouring samples.
fn interpolate(a: (f64, f64), b: (f64, f64), t: f64) -> f64 {
    if t <= a.0 {
        return a.1;
    }
    if t >= b.0 {
        return b.1;
    }
    a.1 + (b.1 - a.1) * ((t - a.0) / (b.0 - a.0))
}

/// Time-weighted mean power over `[start, end]` by trapezoidal integration
/// of the piecewise-linear signal through the samples. `None` means the
/// whole trace.
pub fn average_power(trace: &PowerTrace, window: Option<(f64, f64)>) -> Result<f64> {
    let (first, last) = trace.span().ok_or(EnergyError::EmptyTrace)?;
    let (start, end) = window.unwrap_or((first, last));
    if !(end > start) {
        return Err(EnergyError::EmptyWindow { start, end });
    }
    if start < first || end > last {
        return Err(EnergyError::WindowOutOfRange {
            start,
            end,
            first,
            last,
        });
    }
    Ok(integrate(trace, start, end) / (end - start))
}

/// Integral of power in joules over `[start, end]`, which must lie within
/// the trace.
fn integrate(trace: &PowerTrace, start: f64, end: f64) -> f64 {
    let mut total = 0.0;
    for w in trace.samples.windows(2) {
        let a = (w[0].timestamp_s, w[0].power_w);
        let b = (w[1].timestamp_s, w[1].power_w);
        let lo = a.0.max(start);
        let hi = b.0.min(end);
        if hi <= lo {
            continue;
        }
        total += 0.5 * (interpolate(a, b, lo) + interpolate(a, b, hi)) * (hi - lo);
    }
    total
}

/// Energy and performance figures of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub avg_power_w: f64,
    pub idle_power_w: f64,
    /// `avg_power_w - idle_power_w`.
    pub dynamic_power_w: f64,
    /// Mean latency of one inference.
    pub latency_ms: f64,
    pub throughput_ips: Option<f64>,
    /// Where `throughput_ips` came from: `"measured"` when supplied,
    /// `"trace"` for inferences over the load trace duration.
    pub throughput_source: Option<String>,
    /// `avg_power_w * latency_ms / 1000`.
    pub energy_per_inference_j: f64,
    /// Same value as `energy_per_inference_j`, named to pair with
    /// `energy_integrated_j`.
    pub energy_formula_j: f64,
    /// Integrated load-trace energy divided by the inference count, when a
    /// count is given.
    pub energy_integrated_j: Option<f64>,
    pub inferences: Option<u64>,
    pub warnings: Vec<String>,
}

/// Combines a load trace, an idle trace and the measured latency. With
/// `inferences` (the number of forward calls covered by the load trace) the
/// integrated energy is reported too, and throughput falls back to
/// inferences over trace duration when no measured throughput is given.
pub fn energy_report(
    load: &PowerTrace,
    idle: &PowerTrace,
    latency_ms: f64,
    inferences: Option<u64>,
    measured_throughput_ips: Option<f64>,
) -> Result<EnergyReport> {
    if !(latency_ms > 0.0 && latency_ms.is_finite()) {
        return Err(EnergyError::InvalidArgument(format!(
            "latency_ms must be positive, got {latency_ms}"
        )));
    }
    let avg = average_power(load, None)?;
    let idle_w = average_power(idle, None)?;
    let mut warnings = Vec::new();
    if idle_w > avg {
        warnings.push(format!(
            "idle power {idle_w} W exceeds load power {avg} W; check the measurement"
        ));
    }
    let (first, last) = load.span().ok_or(EnergyError::EmptyTrace)?;
    let duration = last - first;
    let energy_integrated_j = inferences
        .filter(|&n| n > 0)
        .map(|n| integrate(load, first, last) / n as f64);
    let (throughput_ips, throughput_source) = match (measured_throughput_ips, inferences) {
        (Some(t), _) => (Some(t), Some("measured".to_owned())),
        (None, Some(n)) if n > 0 => (Some(n as f64 / duration), Some("trace".to_owned())),
        _ => (None, None),
    };
    Ok(EnergyReport {
        avg_power_w: avg,
        idle_power_w: idle_w,
        dynamic_power_w: avg - idle_w,
        latency_ms,
        throughput_ips,
        throughput_source,
        energy_per_inference_j: avg * latency_ms / 1000.0,
        energy_formula_j: avg * latency_ms / 1000.0,
        energy_integrated_j,
        inferences,
        warnings,
    })
}

/// `1 - candidate.dynamic / baseline.dynamic`.
pub fn dynamic_power_reduction(baseline: &EnergyReport, candidate: &EnergyReport) -> Result<f64> {
    if !(baseline.dynamic_power_w > 0.0) {
        return Err(EnergyError::InvalidArgument(format!(
            "baseline dynamic power {} W is not positive",
            baseline.dynamic_power_w
        )));
    }
    Ok(1.0 - candidate.dynamic_power_w / baseline.dynamic_power_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_ramp() {
        let c = PowerTrace::from_power(&[(0.0, 4.0), (0.5, 4.0), (1.0, 4.0)]).unwrap();
        assert_eq!(average_power(&c, None).unwrap(), 4.0);
        let r = PowerTrace::from_power(&[(0.0, 0.0), (2.0, 10.0)]).unwrap();
        assert_eq!(average_power(&r, None).unwrap(), 5.0);
        // Sub-window of the ramp: [0.5, 1.5] covers 2.5 W .. 7.5 W.
        assert_eq!(average_power(&r, Some((0.5, 1.5))).unwrap(), 5.0);
    }

    #[test]
    fn window_errors() {
        let r = PowerTrace::from_power(&[(0.0, 0.0), (2.0, 10.0)]).unwrap();
        assert!(matches!(
            average_power(&r, Some((1.0, 1.0))),
            Err(EnergyError::EmptyWindow { .. })
        ));
        assert!(matches!(
            average_power(&r, Some((-1.0, 1.0))),
            Err(EnergyError::WindowOutOfRange { .. })
        ));
        let single = PowerTrace::from_power(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(
            average_power(&single, None),
            Err(EnergyError::EmptyWindow { .. })
        ));
        let empty = PowerTrace::from_power(&[]).unwrap();
        assert_eq!(average_power(&empty, None), Err(EnergyError::EmptyTrace));
    }
}
