//! Power traces, idle/dynamic power decomposition, energy per inference and
//! latency benchmarking.

mod bench;
mod report;
mod trace;

pub use bench::{bench_inference, median, percentile, BenchReport};
pub use report::{average_power, dynamic_power_reduction, energy_report, EnergyReport};
pub use trace::{
    parse_trace, synthetic_trace, write_trace, PowerTrace, Sample, TraceSpec, ELECTRICAL_HEADER,
    NOMINAL_RATE_HZ, POWER_HEADER,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("unknown trace header {0:?}")]
    UnknownHeader(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: timestamp {found} does not follow {previous}")]
    NonMonotoneTimestamp {
        line: usize,
        previous: f64,
        found: f64,
    },
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("empty window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },
    #[error("window [{start}, {end}] outside trace span [{first}, {last}]")]
    WindowOutOfRange {
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("inference failed: {0}")]
    Inference(String),
}

pub type Result<T, E = EnergyError> = std::result::Result<T, E>;
