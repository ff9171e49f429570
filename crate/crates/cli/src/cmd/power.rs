use std::path::Path;

use fsle::energy::{dynamic_power_reduction, energy_report, parse_trace, EnergyReport, PowerTrace};
use serde::Serialize;

use super::{emit, required};
use crate::error::{CliError, Result};
use crate::settings::{FileConfig, PowerSettings};
use crate::PowerArgs;

#[derive(Serialize)]
struct Outcome {
    reports: Vec<EnergyReport>,
    /// `1 - dynamic_i / dynamic_0` for every load after the first.
    dynamic_power_reduction: Vec<f64>,
}

fn read_trace(path: &Path) -> Result<PowerTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_trace(&text).map_err(|e| CliError::from(e).context(path.display()))
}

fn per_load<T: Copy>(values: &[T], n: usize, flag: &str) -> Result<Vec<Option<T>>> {
    match values.len() {
        0 => Ok(vec![None; n]),
        m if m == n => Ok(values.iter().copied().map(Some).collect()),
        m => Err(CliError::config(format!(
            "{m} values of {flag} for {n} load traces"
        ))),
    }
}

pub fn run(args: PowerArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut s: PowerSettings = file.power.clone();
    if !args.load.is_empty() {
        s.load = args.load;
    }
    s.idle = args.idle.or(s.idle);
    if !args.latency_ms.is_empty() {
        s.latency_ms = args.latency_ms;
    }
    if !args.inferences.is_empty() {
        s.inferences = args.inferences;
    }
    if !args.throughput_ips.is_empty() {
        s.throughput_ips = args.throughput_ips;
    }
    if s.load.is_empty() {
        return Err(CliError::usage("power needs at least one --load trace"));
    }
    let n = s.load.len();
    if s.latency_ms.len() != n {
        return Err(CliError::config(format!(
            "{} values of --latency-ms for {n} load traces",
            s.latency_ms.len()
        )));
    }
    let inferences = per_load(&s.inferences, n, "--inferences")?;
    let throughput = per_load(&s.throughput_ips, n, "--throughput-ips")?;
    let idle = read_trace(required(s.idle.as_deref(), "--idle", "power")?)?;

    let mut reports = Vec::with_capacity(n);
    for (i, path) in s.load.iter().enumerate() {
        let load = read_trace(path)?;
        reports.push(energy_report(
            &load,
            &idle,
            s.latency_ms[i],
            inferences[i],
            throughput[i],
        )?);
    }
    for r in &reports {
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    let dynamic_power_reduction = if n > 1 {
        reports[1..]
            .iter()
            .map(|r| dynamic_power_reduction(&reports[0], r))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    emit(
        out,
        "power",
        seed,
        &s,
        Outcome {
            reports,
            dynamic_power_reduction,
        },
    )
}
