//! Seeded synthetic datasets for tests, demos and the `gen` command.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::io::EmbeddingDataset;

/// Isotropic Gaussian classes: class means drawn from `N(0, separation^2 I)`,
/// items from `N(mean, noise^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianSpec {
    pub classes: u32,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f32,
    pub noise: f32,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self {
            classes: 20,
            per_class: 100,
            dim: 64,
            separation: 1.0,
            noise: 1.0,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f32 {
    StandardNormal.sample(rng)
}

/// Returns the dataset and the class means it was drawn around.
pub fn gaussian_classes(spec: &GaussianSpec, seed: u64) -> (EmbeddingDataset, Vec<Vec<f32>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f32>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| spec.separation * normal(&mut rng))
                .collect()
        })
        .collect();
    let mut ds = EmbeddingDataset::new(spec.dim);
    for (c, m) in means.iter().enumerate() {
        for _ in 0..spec.per_class {
            let v: Vec<f32> = m
                .iter()
                .map(|&mu| mu + spec.noise * normal(&mut rng))
                .collect();
            ds.push(c as u32, &v).expect("dim matches");
        }
    }
    ds.attrs
        .insert("generator".into(), "gaussian_classes".into());
    ds.attrs.insert("seed".into(), seed.to_string());
    (ds, means)
}

/// Teacher embeddings that are an exact linear function of the inputs.
///
/// Each input has `signal_dims` class-dependent coordinates followed by
/// `nuisance_dims` of pure noise. The teacher maps `x` to `A x` where `A`
/// ignores the nuisance coordinates, so the teacher space separates the
/// classes better than the raw inputs and a linear student can fit it
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherTaskSpec {
    pub classes: u32,
    pub per_class: usize,
    pub signal_dims: usize,
    pub nuisance_dims: usize,
    pub teacher_dim: usize,
    /// Standard deviation of class means along the signal coordinates.
    pub class_spread: f32,
    pub signal_noise: f32,
    pub nuisance_noise: f32,
}

impl Default for TeacherTaskSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            per_class: 100,
            signal_dims: 4,
            nuisance_dims: 20,
            teacher_dim: 8,
            class_spread: 2.0,
            signal_noise: 0.5,
            nuisance_noise: 3.0,
        }
    }
}

impl TeacherTaskSpec {
    pub fn input_dim(&self) -> usize {
        self.signal_dims + self.nuisance_dims
    }
}

/// Returns `(inputs, teacher targets)` with matching labels. The class means
/// and teacher matrix depend only on `task_seed`; the items on `item_seed`,
/// so a second call with another `item_seed` gives held-out items of the
/// same task.
pub fn teacher_task(
    spec: &TeacherTaskSpec,
    task_seed: u64,
    item_seed: u64,
) -> (EmbeddingDataset, EmbeddingDataset) {
    let mut task_rng = ChaCha8Rng::seed_from_u64(task_seed);
    let means: Vec<Vec<f32>> = (0..spec.classes)
        .map(|_| {
            (0..spec.signal_dims)
                .map(|_| spec.class_spread * normal(&mut task_rng))
                .collect()
        })
        .collect();
    let scale = Normal::new(0.0f32, 1.0 / (spec.signal_dims as f32).sqrt()).expect("positive sd");
    let a: Vec<Vec<f32>> = (0..spec.teacher_dim)
        .map(|_| {
            (0..spec.signal_dims)
                .map(|_| scale.sample(&mut task_rng))
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    let mut inputs = EmbeddingDataset::new(spec.input_dim());
    let mut targets = EmbeddingDataset::new(spec.teacher_dim);
    for (c, m) in means.iter().enumerate() {
        for _ in 0..spec.per_class {
            let mut x: Vec<f32> = m
                .iter()
                .map(|&mu| mu + spec.signal_noise * normal(&mut rng))
                .collect();
            let t: Vec<f32> = a
                .iter()
                .map(|row| row.iter().zip(&x).map(|(w, v)| w * v).sum())
                .collect();
            x.extend((0..spec.nuisance_dims).map(|_| spec.nuisance_noise * normal(&mut rng)));
            inputs.push(c as u32, &x).expect("dim matches");
            targets.push(c as u32, &t).expect("dim matches");
        }
    }
    for ds in [&mut inputs, &mut targets] {
        ds.attrs.insert("generator".into(), "teacher_task".into());
        ds.attrs.insert("task_seed".into(), task_seed.to_string());
        ds.attrs.insert("item_seed".into(), item_seed.to_string());
    }
    targets
        .attrs
        .insert("teacher".into(), "synthetic_linear".into());
    (inputs, targets)
}
