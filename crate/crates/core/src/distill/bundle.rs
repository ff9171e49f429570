use serde::{Deserialize, Serialize};

use super::layers::{LayerSpec, Student};
use super::{DistillError, Result};
use crate::io::WeightBundle;
use crate::tensor::{Element, Tensor};

/// Value of `arch.kind` that marks a student bundle.
pub const STUDENT_KIND: &str = "student";

/// Architecture block stored in a student weight bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentArch {
    pub kind: String,
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub teacher_dim: usize,
    pub projection: bool,
}

impl StudentArch {
    pub fn new(
        layers: &[LayerSpec],
        input_shape: &[usize],
        teacher_dim: usize,
        projection: bool,
    ) -> Self {
        Self {
            kind: STUDENT_KIND.into(),
            layers: layers.to_vec(),
            input_shape: input_shape.to_vec(),
            teacher_dim,
            projection,
        }
    }
}

pub fn is_student_bundle(bundle: &WeightBundle) -> bool {
    bundle.arch.get("kind").and_then(|k| k.as_str()) == Some(STUDENT_KIND)
}

/// Packs `student`, built from `arch`, into an f32 weight bundle.
pub fn student_to_bundle<T: Element>(
    student: &Student<T>,
    arch: &StudentArch,
) -> Result<WeightBundle> {
    let value = serde_json::to_value(arch).map_err(|e| DistillError::Config(e.to_string()))?;
    let tensors = student
        .named_params()
        .into_iter()
        .map(|(name, t)| (name, t.cast::<f32>()))
        .collect();
    Ok(WeightBundle::new(value, tensors))
}

/// Rebuilds a student from a bundle written by [`student_to_bundle`].
pub fn student_from_bundle<T: Element>(bundle: &WeightBundle) -> Result<(Student<T>, StudentArch)> {
    let arch: StudentArch = serde_json::from_value(bundle.arch.clone())
        .map_err(|e| DistillError::Config(format!("not a student bundle: {e}")))?;
    if arch.kind != STUDENT_KIND {
        return Err(DistillError::Config(format!(
            "bundle kind {:?} is not a student",
            arch.kind
        )));
    }
    let mut student = Student::<T>::init(
        &arch.layers,
        &arch.input_shape,
        arch.teacher_dim,
        arch.projection,
        0,
    )?;
    let names: Vec<(String, Vec<usize>)> = student
        .named_params()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if names.len() != bundle.tensors.len() {
        return Err(DistillError::Config(format!(
            "bundle has {} tensors, student expects {}",
            bundle.tensors.len(),
            names.len()
        )));
    }
    for ((name, shape), param) in names.iter().zip(student.params_mut()) {
        let stored = bundle
            .get(name)
            .ok_or_else(|| DistillError::Config(format!("missing tensor `{name}`")))?;
        if stored.shape() != shape.as_slice() {
            return Err(DistillError::Config(format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                stored.shape()
            )));
        }
        *param = stored.cast::<T>();
    }
    Ok((student, arch))
}

/// Student output for every vector of `inputs`, each reshaped to the
/// student's input shape.
pub fn embed_vectors<T: Element>(student: &Student<T>, inputs: &[&[f32]]) -> Result<Vec<Vec<f32>>> {
    inputs
        .iter()
        .map(|v| {
            let x = Tensor::from_vec(
                student.input_shape.clone(),
                v.iter().map(|&x| crate::tensor::cst(x as f64)).collect(),
            )?;
            Ok(student.forward(&x)?.cast::<f32>().into_data())
        })
        .collect()
}
