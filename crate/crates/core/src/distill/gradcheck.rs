//! Central finite-difference checks of the analytic gradients, run in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, Student};
use super::train::mse_feature_loss;
use super::Result;
use crate::Tensor;

pub const STEP: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;
/// Magnitude below which gradients are compared absolutely.
pub const FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest error, e.g. `param 0 [13]` or `input [2]`.
    pub worst: String,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }

    fn record(&mut self, what: String, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.checked += 1;
        if e > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = e.max(self.max_rel_error);
            self.worst = what;
        }
    }
}

fn central(f: impl Fn(f64) -> Result<f64>, x0: f64) -> Result<f64> {
    Ok((f(x0 + STEP)? - f(x0 - STEP)?) / (2.0 * STEP))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Up to `coords` coordinates sampled without replacement from `0..n`.
fn pick(rng: &mut ChaCha8Rng, n: usize, coords: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, coords.min(n)).into_vec()
}

/// Checks `layer`'s parameter and input gradients of `L = sum(r * y)` for a
/// random `r`, at `coords` random coordinates of each.
pub fn check_layer(
    layer: &Layer<f64>,
    x: &Tensor<f64>,
    coords: usize,
    seed: u64,
) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = layer.forward(x)?;
    let r = Tensor::from_fn(y.shape(), |_| rng.random_range(-1.0..1.0))?;
    let (gx, gp) = layer.backward(x, &r)?;
    let objective = |l: &Layer<f64>, x: &Tensor<f64>| -> Result<f64> {
        Ok(dot(l.forward(x)?.data(), r.data()))
    };

    let mut out = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    for (k, g) in gp.iter().enumerate() {
        for idx in pick(&mut rng, g.len(), coords) {
            let x0 = layer.params()[k].1.data()[idx];
            let numeric = central(
                |v| {
                    let mut l = layer.clone();
                    l.params_mut()[k].data_mut()[idx] = v;
                    objective(&l, x)
                },
                x0,
            )?;
            out.record(format!("param {k} [{idx}]"), g.data()[idx], numeric);
        }
    }
    for idx in pick(&mut rng, x.len(), coords) {
        let numeric = central(
            |v| {
                let mut xp = x.clone();
                xp.data_mut()[idx] = v;
                objective(layer, &xp)
            },
            x.data()[idx],
        )?;
        out.record(format!("input [{idx}]"), gx.data()[idx], numeric);
    }
    Ok(out)
}

/// Checks the MSE loss gradient with respect to the student embedding.
pub fn check_loss(student_emb: &[f64], teacher_emb: &[f64]) -> Result<GradCheck> {
    let (_, grad) = mse_feature_loss(student_emb, teacher_emb)?;
    let mut out = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    for i in 0..student_emb.len() {
        let numeric = central(
            |v| {
                let mut s = student_emb.to_vec();
                s[i] = v;
                Ok(mse_feature_loss(&s, teacher_emb)?.0)
            },
            student_emb[i],
        )?;
        out.record(format!("embedding [{i}]"), grad[i], numeric);
    }
    Ok(out)
}

/// Checks end-to-end gradients of the MSE loss through the whole student.
pub fn check_student(
    student: &Student<f64>,
    x: &Tensor<f64>,
    target: &[f64],
    coords: usize,
    seed: u64,
) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acts = student.forward_cached(x)?;
    let y = acts.last().expect("input cached");
    let (_, g) = mse_feature_loss(y.data(), target)?;
    let (grads, _) = student.backward(&acts, &Tensor::from_vec(y.shape().to_vec(), g)?)?;
    let loss =
        |s: &Student<f64>| -> Result<f64> { Ok(mse_feature_loss(s.forward(x)?.data(), target)?.0) };
    let mut out = GradCheck {
        checked: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    let params = student.named_params();
    for (k, g) in grads.iter().enumerate() {
        for idx in pick(&mut rng, g.len(), coords) {
            let x0 = params[k].1.data()[idx];
            let numeric = central(
                |v| {
                    let mut s = student.clone();
                    s.params_mut()[k].data_mut()[idx] = v;
                    loss(&s)
                },
                x0,
            )?;
            out.record(format!("{} [{idx}]", params[k].0), g.data()[idx], numeric);
        }
    }
    Ok(out)
}
