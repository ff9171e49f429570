use super::{cst, mismatch, Element, Result, Tensor, TensorError};

pub const DEFAULT_NORM_EPS: f64 = 1e-5;

/// Frozen per-channel statistics and affine parameters, each `[C]`.
#[derive(Debug, Clone, Copy)]
pub struct BatchNormParams<'a, T: Element> {
    pub mean: &'a Tensor<T>,
    pub var: &'a Tensor<T>,
    pub gamma: &'a Tensor<T>,
    pub beta: &'a Tensor<T>,
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta`, per channel of `[C,H,W]`.
pub fn batchnorm_inference<T: Element>(
    input: &Tensor<T>,
    params: BatchNormParams<'_, T>,
    eps: T,
) -> Result<Tensor<T>> {
    let (c, h, w) = input.dims3("batchnorm")?;
    for (name, t) in [
        ("mean", params.mean),
        ("var", params.var),
        ("gamma", params.gamma),
        ("beta", params.beta),
    ] {
        if t.shape() != [c] {
            return Err(mismatch(
                "batchnorm",
                format!("{name} must be [{c}], got {:?}", t.shape()),
            ));
        }
    }
    if eps.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(TensorError::InvalidHyperparameter {
            op: "batchnorm",
            detail: "eps must be > 0".into(),
        });
    }
    if let Some((channel, &v)) = params
        .var
        .data()
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= T::zero()))
    {
        return Err(TensorError::NegativeVariance {
            channel,
            value: v.to_f64().unwrap_or(f64::NAN),
        });
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(input.len());
    for (ch, plane) in input.data().chunks_exact(hw).enumerate() {
        let scale = params.gamma.data()[ch] / (params.var.data()[ch] + eps).sqrt();
        let mean = params.mean.data()[ch];
        let beta = params.beta.data()[ch];
        out.extend(plane.iter().map(|&x| (x - mean) * scale + beta));
    }
    Tensor::from_vec(vec![c, h, w], out)
}

/// Normalizes over the last axis, then applies `gamma`/`beta` of that width.
pub fn layernorm<T: Element>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    let d = *input
        .shape()
        .last()
        .ok_or_else(|| mismatch("layernorm", "rank-0 input"))?;
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(mismatch(
            "layernorm",
            format!(
                "gamma/beta must be [{d}], got {:?}/{:?}",
                gamma.shape(),
                beta.shape()
            ),
        ));
    }
    if eps.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(TensorError::InvalidHyperparameter {
            op: "layernorm",
            detail: "eps must be > 0".into(),
        });
    }
    let inv_d = cst::<T>(1.0 / d as f64);
    let mut out = Vec::with_capacity(input.len());
    for row in input.data().chunks_exact(d) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() * inv_d;
        let rstd = T::one() / (var + eps).sqrt();
        out.extend(
            row.iter()
                .zip(gamma.data().iter().zip(beta.data()))
                .map(|(&x, (&g, &b))| (x - mean) * rstd * g + b),
        );
    }
    Tensor::from_vec(input.shape().to_vec(), out)
}
