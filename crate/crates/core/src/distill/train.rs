use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{LayerSpec, Student};
use super::{DistillError, Result};
use crate::io::EmbeddingDataset;
use crate::tensor::{cst, Element, Tensor};

/// `(mean((s - t)^2), 2 (s - t) / D)`.
pub fn mse_feature_loss<T: Element>(student: &[T], teacher: &[T]) -> Result<(T, Vec<T>)> {
    if student.len() != teacher.len() || student.is_empty() {
        return Err(DistillError::LossDimension {
            student: student.len(),
            teacher: teacher.len(),
        });
    }
    let inv_d = cst::<T>(1.0 / student.len() as f64);
    let two = cst::<T>(2.0);
    let mut loss = T::zero();
    let grad = student
        .iter()
        .zip(teacher)
        .map(|(&s, &t)| {
            let d = s - t;
            loss = loss + d * d;
            two * d * inv_d
        })
        .collect();
    Ok((loss * inv_d, grad))
}

/// Student inputs paired with teacher target embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherEmbeddingSet<T: Element> {
    pub inputs: Vec<Tensor<T>>,
    pub targets: Vec<Vec<T>>,
}

impl<T: Element> TeacherEmbeddingSet<T> {
    pub fn new(inputs: Vec<Tensor<T>>, targets: Vec<Vec<T>>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(DistillError::Config(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(first) = targets.first() {
            if targets.iter().any(|t| t.len() != first.len()) {
                return Err(DistillError::Config("targets differ in width".into()));
            }
        }
        Ok(Self { inputs, targets })
    }

    /// Pairs item `i` of `inputs` (reshaped to `input_shape`) with item `i`
    /// of `targets`. Labels must agree item by item.
    pub fn from_datasets(
        inputs: &EmbeddingDataset,
        targets: &EmbeddingDataset,
        input_shape: &[usize],
    ) -> Result<Self> {
        if inputs.labels() != targets.labels() {
            return Err(DistillError::Config(
                "input and target datasets differ in item count or labels".into(),
            ));
        }
        let xs = inputs
            .iter()
            .map(|(_, v)| {
                Tensor::from_vec(
                    input_shape.to_vec(),
                    v.iter().map(|&x| cst(x as f64)).collect(),
                )
                .map_err(DistillError::from)
            })
            .collect::<Result<_>>()?;
        let ts = targets
            .iter()
            .map(|(_, v)| v.iter().map(|&x| cst(x as f64)).collect())
            .collect();
        Self::new(xs, ts)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub student: Vec<LayerSpec>,
    /// Append a linear head when the student width differs from the teacher's.
    pub projection: bool,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 1,
            student: vec![LayerSpec::Linear {
                out_features: 64,
                bias: true,
            }],
            projection: true,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(DistillError::Config(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DistillError::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss over the dataset before the first update.
    pub initial_loss: f64,
    /// Mean loss over each epoch's items, each measured before that item's
    /// batch update.
    pub epoch_losses: Vec<f64>,
    /// Mean loss over the dataset after the last update.
    pub final_loss: f64,
}

fn dataset_loss<T: Element>(student: &Student<T>, data: &TeacherEmbeddingSet<T>) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in data.inputs.iter().zip(&data.targets) {
        let y = student.forward(x)?;
        total += mse_feature_loss(y.data(), t)?
            .0
            .to_f64()
            .unwrap_or(f64::NAN);
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch SGD on the MSE feature loss. Items are reshuffled each epoch
/// from `seed`; each update subtracts `learning_rate` times the batch-mean
/// gradient. Per-item losses are summed in item order, so the epoch loss
/// does not depend on the shuffle.
pub fn train<T: Element>(
    student: &mut Student<T>,
    data: &TeacherEmbeddingSet<T>,
    config: &DistillConfig,
    seed: u64,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(DistillError::EmptyDataset);
    }
    let initial_loss = dataset_loss(student, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = vec![0.0f64; data.len()];
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let lr = cst::<T>(config.learning_rate);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut acc: Option<Vec<Tensor<T>>> = None;
            for &i in batch {
                let acts = student.forward_cached(&data.inputs[i])?;
                let y = acts.last().expect("input is cached");
                let (loss, g) = mse_feature_loss(y.data(), &data.targets[i])?;
                losses[i] = loss.to_f64().unwrap_or(f64::NAN);
                let g = Tensor::from_vec(y.shape().to_vec(), g)?;
                let (grads, _) = student.backward(&acts, &g)?;
                acc = Some(match acc {
                    None => grads,
                    Some(mut a) => {
                        for (s, g) in a.iter_mut().zip(&grads) {
                            for (p, &q) in s.data_mut().iter_mut().zip(g.data()) {
                                *p = *p + q;
                            }
                        }
                        a
                    }
                });
            }
            let scale = lr / cst::<T>(batch.len() as f64);
            let grads = acc.expect("non-empty batch");
            for (p, g) in student.params_mut().into_iter().zip(&grads) {
                for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                    *w = *w - scale * d;
                }
            }
        }
        let mean = losses.iter().sum::<f64>() / data.len() as f64;
        if !mean.is_finite() {
            return Err(DistillError::Diverged { epoch, loss: mean });
        }
        epoch_losses.push(mean);
    }
    let final_loss = dataset_loss(student, data)?;
    if !final_loss.is_finite() {
        return Err(DistillError::Diverged {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok(TrainReport {
        initial_loss,
        epoch_losses,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let (l, g) = mse_feature_loss(&[1.0f64, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
        let (l, g) = mse_feature_loss(&[0.3f64, -2.0], &[0.3, -2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        assert!(mse_feature_loss(&[1.0f32], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DistillConfig::default().validate().is_ok());
        let bad = DistillConfig {
            learning_rate: f64::NAN,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DistillConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
