use std::path::Path;

use fsle::distill::{
    student_to_bundle, train, DistillError, LayerSpec, Student, StudentArch, TeacherEmbeddingSet,
    TrainReport,
};
use fsle::io::{load_embeddings, save_bundle};
use fsle::seed::{self, purpose};
use serde::Serialize;

use super::{emit, required};
use crate::error::{CliError, Result};
use crate::settings::{DistillSettings, FileConfig};
use crate::DistillArgs;

#[derive(Serialize)]
struct Outcome {
    #[serde(flatten)]
    training: TrainReport,
    param_count: usize,
    teacher_dim: usize,
    items: usize,
}

fn resolve(args: DistillArgs, file: &FileConfig) -> Result<DistillSettings> {
    let mut s = file.distill.clone();
    s.inputs = args.inputs.or(s.inputs);
    s.targets = args.targets.or(s.targets);
    s.output = args.out.or(s.output);
    s.input_shape = args.input_shape.or(s.input_shape);
    let t = &mut s.training;
    t.learning_rate = args.lr.unwrap_or(t.learning_rate);
    t.epochs = args.epochs.unwrap_or(t.epochs);
    t.batch_size = args.batch_size.unwrap_or(t.batch_size);
    if let Some(json) = args.student {
        t.student = serde_json::from_str::<Vec<LayerSpec>>(&json)
            .map_err(|e| CliError::config(format!("--student: {e}")))?;
    }
    if args.no_projection {
        t.projection = false;
    }
    Ok(s)
}

pub fn run(args: DistillArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut s = resolve(args, file)?;
    let inputs = load_embeddings(required(s.inputs.as_deref(), "--inputs", "distill")?)?;
    let targets = load_embeddings(required(s.targets.as_deref(), "--targets", "distill")?)?;
    let output = required(s.output.clone(), "--out", "distill")?;
    let shape = s
        .input_shape
        .get_or_insert_with(|| vec![inputs.dim()])
        .clone();
    if shape.iter().product::<usize>() != inputs.dim() {
        return Err(CliError::config(format!(
            "input shape {shape:?} does not hold {} values",
            inputs.dim()
        )));
    }
    s.training.validate()?;
    let data = TeacherEmbeddingSet::<f64>::from_datasets(&inputs, &targets, &shape)?;
    if data.is_empty() {
        return Err(DistillError::EmptyDataset.into());
    }
    let cfg = &s.training;
    let mut student = Student::<f64>::init(
        &cfg.student,
        &shape,
        data.dim(),
        cfg.projection,
        seed::split(seed, purpose::DISTILL_INIT),
    )?;
    let report = train(
        &mut student,
        &data,
        cfg,
        seed::split(seed, purpose::DISTILL_SHUFFLE),
    )?;
    let arch = StudentArch::new(&cfg.student, &shape, data.dim(), cfg.projection);
    save_bundle(&output, &student_to_bundle(&student, &arch)?)?;
    let outcome = Outcome {
        training: report,
        param_count: student.param_count(),
        teacher_dim: data.dim(),
        items: data.len(),
    };
    emit(out, "distill", seed, &s, outcome)
}
