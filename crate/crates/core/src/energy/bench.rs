use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{EnergyError, Result};

/// Only one benchmark measures at a time.
static LANE: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub warmup: usize,
    /// Timed latencies after warmup, in call order.
    pub latencies_ms: Vec<f64>,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Nearest-rank 95th percentile.
    pub p95_ms: f64,
    /// Inferences per second of timed forward-call time.
    pub throughput_ips: f64,
    /// Another benchmark held the measurement lane when this one started.
    pub contaminated: bool,
}

/// Nearest-rank percentile of sorted data, `q` in `(0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Calls `infer` `warmup + repetitions` times, timing each call alone, and
/// discards the first `warmup` timings.
pub fn bench_inference<E: std::fmt::Display>(
    mut infer: impl FnMut() -> std::result::Result<(), E>,
    repetitions: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(EnergyError::InvalidArgument(
            "repetitions must be at least 1".into(),
        ));
    }
    let (_guard, contaminated) = match LANE.try_lock() {
        Ok(g) => (g, false),
        Err(std::sync::TryLockError::WouldBlock) => {
            (LANE.lock().unwrap_or_else(|e| e.into_inner()), true)
        }
        Err(std::sync::TryLockError::Poisoned(e)) => (e.into_inner(), false),
    };
    let mut latencies = Vec::with_capacity(repetitions);
    for i in 0..warmup + repetitions {
        let start = Instant::now();
        infer().map_err(|e| EnergyError::Inference(e.to_string()))?;
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        if i >= warmup {
            latencies.push(ms);
        }
    }
    let total_ms: f64 = latencies.iter().sum();
    let mut sorted = latencies.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BenchReport {
        repetitions,
        warmup,
        mean_ms: total_ms / repetitions as f64,
        median_ms: median(&sorted),
        p95_ms: percentile(&sorted, 0.95),
        throughput_ips: repetitions as f64 * 1000.0 / total_ms,
        latencies_ms: latencies,
        contaminated,
    })
}
