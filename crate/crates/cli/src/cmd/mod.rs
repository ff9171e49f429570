mod bench;
mod distill;
mod eval;
mod gen;
mod inspect;
mod power;

use std::io::Write;
use std::path::Path;

use fsle::backbone::{ArchConfig, ModelGraph};
use fsle::distill::{embed_vectors, is_student_bundle, student_from_bundle, Student, StudentArch};
use fsle::io::{load_bundle, EmbeddingDataset, WeightBundle};
use fsle::Tensor;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::settings::{resolve_seed, FileConfig};
use crate::{Cli, Command};

/// Every report is `{command, seed, config, result}`.
#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    seed: u64,
    config: C,
    result: R,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, file.seed)?;
    let out = cli.report.as_deref();
    match cli.command {
        Command::Eval(args) => eval::run(args, &file, seed, out),
        Command::Distill(args) => distill::run(args, &file, seed, out),
        Command::Inspect(args) => inspect::run(args, &file, seed, out),
        Command::Bench(args) => bench::run(args, &file, seed, out),
        Command::Power(args) => power::run(args, &file, seed, out),
        Command::Gen(args) => gen::run(args, &file, seed, out),
    }
}

fn emit<C: Serialize, R: Serialize>(
    out: Option<&Path>,
    command: &str,
    seed: u64,
    config: C,
    result: R,
) -> Result<()> {
    let report = Report {
        command,
        seed,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::new(crate::error::exit::NUMERICAL, format!("report: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

/// A loaded weight bundle: either the image backbone or a distilled student.
enum Model {
    Backbone(ModelGraph),
    Student(Student<f32>, StudentArch),
}

impl Model {
    fn load(path: &Path) -> Result<Self> {
        let bundle = load_bundle(path)?;
        Self::from_bundle(&bundle).map_err(|e| e.context(path.display()))
    }

    fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        if is_student_bundle(bundle) {
            let (s, arch) = student_from_bundle(bundle)?;
            Ok(Self::Student(s, arch))
        } else {
            Ok(Self::Backbone(ModelGraph::from_bundle(bundle)?))
        }
    }

    fn input_shape(&self) -> Vec<usize> {
        match self {
            Self::Backbone(g) => backbone_input_shape(g.config()),
            Self::Student(s, _) => s.input_shape.clone(),
        }
    }

    fn param_count(&self) -> u64 {
        match self {
            Self::Backbone(g) => fsle::backbone::complexity_of_config(g.config())
                .map(|r| r.param_count)
                .unwrap_or(0),
            Self::Student(s, _) => s.param_count() as u64,
        }
    }

    fn forward(&self, x: &Tensor<f32>) -> Result<Vec<f32>> {
        Ok(match self {
            Self::Backbone(g) => g.forward(x)?.into_data(),
            Self::Student(s, _) => s.forward(x)?.into_data(),
        })
    }

    /// Replaces every vector of `ds` by the model output.
    fn embed(&self, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
        let shape = self.input_shape();
        let width: usize = shape.iter().product();
        if ds.dim() != width {
            return Err(CliError::config(format!(
                "stored vectors have {} values, model input {shape:?} needs {width}",
                ds.dim()
            )));
        }
        let outputs = match self {
            Self::Student(s, _) => {
                let views: Vec<&[f32]> = ds.iter().map(|(_, v)| v).collect();
                embed_vectors(s, &views)?
            }
            Self::Backbone(_) => ds
                .iter()
                .map(|(_, v)| {
                    let x = Tensor::from_vec(shape.clone(), v.to_vec())
                        .map_err(fsle::backbone::BackboneError::from)?;
                    self.forward(&x)
                })
                .collect::<Result<_>>()?,
        };
        let dim = outputs.first().map_or(0, Vec::len);
        let mut out = EmbeddingDataset::from_parts(dim, ds.labels().to_vec(), outputs.concat())?;
        out.attrs = ds.attrs.clone();
        Ok(out)
    }
}

fn backbone_input_shape(config: &ArchConfig) -> Vec<usize> {
    let (h, w) = config.input_resolution;
    vec![config.in_channels, h, w]
}

fn required<T>(value: Option<T>, flag: &str, command: &str) -> Result<T> {
    value.ok_or_else(|| CliError::usage(format!("{command} needs {flag} (flag or config file)")))
}
