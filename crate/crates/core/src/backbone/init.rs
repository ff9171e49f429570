use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelGraph, ParamKind};
use crate::tensor::Tensor;

/// Seeded weights for tests, fixtures and benchmarks.
///
/// Weights are uniform with variance `1/fan_in`, biases small, batchnorm
/// statistics near the identity. Values depend only on `seed` and the
/// parameter order of the graph.
pub fn random_weights(model: &ModelGraph, seed: u64) -> Vec<(String, Tensor<f32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model
        .param_specs()
        .iter()
        .map(|spec| {
            let name = spec.name.as_str();
            let mut uniform = |lo: f32, hi: f32| {
                Tensor::from_fn(&spec.shape, |_| rng.random_range(lo..hi)).expect("valid shape")
            };
            let t = if spec.kind == ParamKind::Buffer {
                if name.ends_with("running_var") {
                    uniform(0.5, 1.5)
                } else {
                    uniform(-0.1, 0.1)
                }
            } else if spec.shape.len() >= 2 {
                let fan_in: usize = spec.shape[1..].iter().product();
                let bound = (3.0 / fan_in as f32).sqrt();
                uniform(-bound, bound)
            } else if name.ends_with(".weight") {
                // batchnorm / layernorm scale
                uniform(0.5, 1.5)
            } else {
                uniform(-0.1, 0.1)
            };
            (spec.name.clone(), t)
        })
        .collect()
}

/// All-zero weights with zero variance buffers.
pub fn zero_weights(model: &ModelGraph) -> Vec<(String, Tensor<f32>)> {
    model
        .param_specs()
        .iter()
        .map(|s| {
            (
                s.name.clone(),
                Tensor::zeros(&s.shape).expect("valid shape"),
            )
        })
        .collect()
}
