//! Resolved run settings. Each value comes from the first of: command-line
//! flag, config file, `FSLE_SEED` (seed only), built-in default.

use std::path::{Path, PathBuf};

use fsle::distill::DistillConfig;
use fsle::energy::TraceSpec;
use fsle::fewshot::{ClassifierConfig, Protocol};
use fsle::synth::{GaussianSpec, TeacherTaskSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "FSLE_SEED";

/// Contents of a TOML config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub eval: EvalSettings,
    pub distill: DistillSettings,
    pub inspect: InspectSettings,
    pub bench: BenchSettings,
    pub power: PowerSettings,
    pub gen: GenSettings,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// Root seed: flag, then config file, then `FSLE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub embeddings: Option<PathBuf>,
    /// Weight bundle applied to every vector before evaluation.
    pub model: Option<PathBuf>,
    /// Base-class embeddings whose mean is used for centering.
    pub base: Option<PathBuf>,
    pub protocol: Protocol,
    pub classifier: ClassifierConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillSettings {
    pub inputs: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    /// Shape each input vector is reshaped to; defaults to `[dim]`.
    pub input_shape: Option<Vec<usize>>,
    pub output: Option<PathBuf>,
    pub training: DistillConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectSettings {
    pub model: Option<PathBuf>,
    /// Square input side; defaults to the bundle's resolution, or 84.
    pub resolution: Option<usize>,
    pub reference_flops: Option<f64>,
    pub per_layer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    /// Weight bundle; random MobileViT-XXS weights when absent.
    pub model: Option<PathBuf>,
    pub resolution: Option<usize>,
    pub repetitions: usize,
    pub warmup: usize,
    /// Distinct random inputs cycled through.
    pub images: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            model: None,
            resolution: None,
            repetitions: 100,
            warmup: 10,
            images: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSettings {
    pub load: Vec<PathBuf>,
    pub idle: Option<PathBuf>,
    pub latency_ms: Vec<f64>,
    pub inferences: Vec<u64>,
    pub throughput_ips: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSettings {
    pub embeddings: GaussianSpec,
    pub teacher: TeacherTaskSpec,
    pub trace: TraceSpec,
}
