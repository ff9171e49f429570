//! Command-line front end: argument parsing, config resolution and the
//! subcommand implementations behind the `fsle` binary.

mod cmd;
mod error;
mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::exit;

/// Few-shot edge inference engine.
#[derive(Debug, Parser)]
#[command(name = "fsle", version, about)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Root seed for all randomness [env: FSLE_SEED, default 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Episodic few-shot evaluation of an embedding set.
    Eval(EvalArgs),
    /// Train a student to match teacher embeddings.
    Distill(DistillArgs),
    /// Parameter and FLOPs counts of a model.
    Inspect(InspectArgs),
    /// Time forward passes of a model.
    Bench(BenchArgs),
    /// Energy per inference from power traces.
    Power(PowerArgs),
    /// Write synthetic datasets, bundles and traces.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Embedding set (.fsle) to sample episodes from.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Weight bundle mapping each stored vector to an embedding first.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Base-class embedding set whose mean is used for centering.
    #[arg(long, value_name = "FILE")]
    base: Option<PathBuf>,
    /// Classes per episode [default: 5].
    #[arg(long)]
    way: Option<usize>,
    /// Support items per class [default: 1].
    #[arg(long)]
    shot: Option<usize>,
    /// Query items per class [default: 15].
    #[arg(long)]
    queries: Option<usize>,
    /// Episodes per seed [default: 10000].
    #[arg(long)]
    episodes: Option<usize>,
    /// Independent seeds [default: 5].
    #[arg(long)]
    seeds: Option<usize>,
    /// Skip centering and L2 normalization.
    #[arg(long)]
    no_preprocess: bool,
    /// Refine prototypes with soft k-means over the queries.
    #[arg(long)]
    transductive: bool,
    /// Soft k-means iterations [default: 10].
    #[arg(long)]
    iterations: Option<usize>,
    /// Soft k-means temperature [default: 1.0].
    #[arg(long)]
    temperature: Option<f64>,
    /// Worker threads for episodes; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    /// Student inputs (.fsle).
    #[arg(long, value_name = "FILE")]
    inputs: Option<PathBuf>,
    /// Teacher embeddings (.fsle), item-aligned with the inputs.
    #[arg(long, value_name = "FILE")]
    targets: Option<PathBuf>,
    /// Student weight bundle to write.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Comma-separated input shape, e.g. 3,8,8 [default: input width].
    #[arg(long, value_delimiter = ',')]
    input_shape: Option<Vec<usize>>,
    /// [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 100]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 1]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Student layers as JSON, e.g. '[{"type":"linear","out_features":16}]'.
    #[arg(long, value_name = "JSON")]
    student: Option<String>,
    /// Fail instead of appending a linear head on width mismatch.
    #[arg(long)]
    no_projection: bool,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Weight bundle; MobileViT-XXS when absent.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Square input side [default: bundle resolution, or 84].
    #[arg(long)]
    resolution: Option<usize>,
    /// FLOPs figure to compare against, e.g. 0.512e9.
    #[arg(long)]
    reference_flops: Option<f64>,
    /// Include the per-layer breakdown.
    #[arg(long)]
    per_layer: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Weight bundle; random MobileViT-XXS weights when absent.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Square input side [default: bundle resolution, or 84].
    #[arg(long)]
    resolution: Option<usize>,
    /// Timed forward calls [default: 100].
    #[arg(long)]
    repetitions: Option<usize>,
    /// Untimed calls before timing [default: 10].
    #[arg(long)]
    warmup: Option<usize>,
    /// Distinct random inputs cycled through [default: 8].
    #[arg(long)]
    images: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Load trace (CSV); repeat to compare configurations.
    #[arg(long, value_name = "FILE")]
    load: Vec<PathBuf>,
    /// Idle trace (CSV).
    #[arg(long, value_name = "FILE")]
    idle: Option<PathBuf>,
    /// Mean latency per inference, one per load trace.
    #[arg(long)]
    latency_ms: Vec<f64>,
    /// Forward calls covered by each load trace.
    #[arg(long)]
    inferences: Vec<u64>,
    /// Separately measured throughput for each load trace.
    #[arg(long)]
    throughput_ips: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Gaussian class clusters.
    Embeddings {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        classes: Option<u32>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        /// Standard deviation of class means.
        #[arg(long)]
        separation: Option<f32>,
        /// Standard deviation around each mean.
        #[arg(long)]
        noise: Option<f32>,
    },
    /// Student inputs with linear teacher targets.
    Teacher {
        #[arg(long, value_name = "FILE")]
        inputs: PathBuf,
        #[arg(long, value_name = "FILE")]
        targets: PathBuf,
        /// Item draw of the same task; use another value for held-out items.
        #[arg(long, default_value_t = 0)]
        split: u64,
        #[arg(long)]
        classes: Option<u32>,
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// MobileViT-XXS bundle with seeded random weights.
    Bundle {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, default_value_t = 84)]
        resolution: usize,
    },
    /// Constant-load power trace with optional ripple and noise.
    Trace {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        mean_power_w: Option<f64>,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        rate_hz: Option<f64>,
        /// Write voltage/current columns at this supply voltage.
        #[arg(long)]
        voltage_v: Option<f64>,
        #[arg(long)]
        ripple_w: Option<f64>,
        #[arg(long)]
        noise_w: Option<f64>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match cmd::run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
