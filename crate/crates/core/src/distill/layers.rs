use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DistillError, Result};
use crate::tensor::{
    self, batchnorm_inference, conv_output_dim, cst, BatchNormParams, Conv2dParams, Element, Tensor,
};

/// Serializable description of one student layer; shapes are inferred from
/// the input shape when the student is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    Depthwise {
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    Linear {
        out_features: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    Silu,
    LayerNorm,
    GlobalAvgPool,
    Flatten,
    /// Inference-only; training a student that contains it fails.
    BatchNorm,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T: Element> {
    Conv2d {
        weight: Tensor<T>,
        bias: Option<Tensor<T>>,
        params: Conv2dParams,
    },
    Depthwise {
        weight: Tensor<T>,
        bias: Option<Tensor<T>>,
        params: Conv2dParams,
    },
    Linear {
        weight: Tensor<T>,
        bias: Option<Tensor<T>>,
    },
    Silu,
    LayerNorm {
        gamma: Tensor<T>,
        beta: Tensor<T>,
        eps: T,
    },
    GlobalAvgPool,
    Flatten,
    BatchNorm {
        mean: Tensor<T>,
        var: Tensor<T>,
        gamma: Tensor<T>,
        beta: Tensor<T>,
        eps: T,
    },
}

fn uniform<T: Element>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_| cst(rng.random_range(-bound..=bound))).expect("positive dims")
}

impl<T: Element> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Conv2d { .. } => "conv2d",
            Self::Depthwise { .. } => "depthwise",
            Self::Linear { .. } => "linear",
            Self::Silu => "silu",
            Self::LayerNorm { .. } => "layer_norm",
            Self::GlobalAvgPool => "global_avg_pool",
            Self::Flatten => "flatten",
            Self::BatchNorm { .. } => "batch_norm",
        }
    }

    /// Builds the layer for an input of `shape` with weights drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`. Returns the layer and its output
    /// shape.
    pub fn init(
        spec: &LayerSpec,
        shape: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<(Self, Vec<usize>)> {
        let bad = |reason: String| DistillError::Config(reason);
        let chw = || match shape {
            &[c, h, w] => Ok((c, h, w)),
            _ => Err(bad(format!(
                "{spec:?} needs a [C,H,W] input, got {shape:?}"
            ))),
        };
        let conv_out = |h: usize, w: usize, k: usize, p: Conv2dParams| {
            conv_output_dim(h, k, p)
                .zip(conv_output_dim(w, k, p))
                .ok_or_else(|| bad(format!("kernel {k} does not fit {h}x{w}")))
        };
        Ok(match *spec {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                bias,
            } => {
                let (c, h, w) = chw()?;
                let params = Conv2dParams::new(stride, padding);
                let (oh, ow) = conv_out(h, w, kernel, params)?;
                let bound = 1.0 / ((c * kernel * kernel) as f64).sqrt();
                let layer = Self::Conv2d {
                    weight: uniform(rng, &[out_channels, c, kernel, kernel], bound),
                    bias: bias.then(|| uniform(rng, &[out_channels], bound)),
                    params,
                };
                (layer, vec![out_channels, oh, ow])
            }
            LayerSpec::Depthwise {
                kernel,
                stride,
                padding,
                bias,
            } => {
                let (c, h, w) = chw()?;
                let params = Conv2dParams::new(stride, padding);
                let (oh, ow) = conv_out(h, w, kernel, params)?;
                let bound = 1.0 / kernel as f64;
                let layer = Self::Depthwise {
                    weight: uniform(rng, &[c, kernel, kernel], bound),
                    bias: bias.then(|| uniform(rng, &[c], bound)),
                    params,
                };
                (layer, vec![c, oh, ow])
            }
            LayerSpec::Linear { out_features, bias } => {
                let Some((&n_in, lead)) = shape.split_last() else {
                    return Err(bad("linear needs a non-scalar input".into()));
                };
                let bound = 1.0 / (n_in as f64).sqrt();
                let layer = Self::Linear {
                    weight: uniform(rng, &[out_features, n_in], bound),
                    bias: bias.then(|| uniform(rng, &[out_features], bound)),
                };
                let mut out = lead.to_vec();
                out.push(out_features);
                (layer, out)
            }
            LayerSpec::Silu => (Self::Silu, shape.to_vec()),
            LayerSpec::LayerNorm => {
                let d = *shape
                    .last()
                    .ok_or_else(|| bad("layer_norm needs a non-scalar input".into()))?;
                let layer = Self::LayerNorm {
                    gamma: Tensor::full(&[d], T::one())?,
                    beta: Tensor::zeros(&[d])?,
                    eps: cst(tensor::DEFAULT_NORM_EPS),
                };
                (layer, shape.to_vec())
            }
            LayerSpec::GlobalAvgPool => {
                let (c, _, _) = chw()?;
                (Self::GlobalAvgPool, vec![c])
            }
            LayerSpec::Flatten => (Self::Flatten, vec![shape.iter().product()]),
            LayerSpec::BatchNorm => {
                let (c, _, _) = chw()?;
                let layer = Self::BatchNorm {
                    mean: Tensor::zeros(&[c])?,
                    var: Tensor::full(&[c], T::one())?,
                    gamma: Tensor::full(&[c], T::one())?,
                    beta: Tensor::zeros(&[c])?,
                    eps: cst(tensor::DEFAULT_NORM_EPS),
                };
                (layer, shape.to_vec())
            }
        })
    }

    /// Trainable tensors with their local names, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = Vec::new();
        match self {
            Self::Conv2d { weight, bias, .. }
            | Self::Depthwise { weight, bias, .. }
            | Self::Linear { weight, bias } => {
                out.push(("weight", weight));
                if let Some(b) = bias {
                    out.push(("bias", b));
                }
            }
            Self::LayerNorm { gamma, beta, .. } => {
                out.push(("weight", gamma));
                out.push(("bias", beta));
            }
            Self::BatchNorm {
                mean,
                var,
                gamma,
                beta,
                ..
            } => {
                out.push(("weight", gamma));
                out.push(("bias", beta));
                out.push(("running_mean", mean));
                out.push(("running_var", var));
            }
            Self::Silu | Self::GlobalAvgPool | Self::Flatten => {}
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        match self {
            Self::Conv2d { weight, bias, .. }
            | Self::Depthwise { weight, bias, .. }
            | Self::Linear { weight, bias } => {
                out.push(weight);
                if let Some(b) = bias {
                    out.push(b);
                }
            }
            Self::LayerNorm { gamma, beta, .. } => {
                out.push(gamma);
                out.push(beta);
            }
            Self::BatchNorm {
                mean,
                var,
                gamma,
                beta,
                ..
            } => {
                out.push(gamma);
                out.push(beta);
                out.push(mean);
                out.push(var);
            }
            Self::Silu | Self::GlobalAvgPool | Self::Flatten => {}
        }
        out
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(match self {
            Self::Conv2d {
                weight,
                bias,
                params,
            } => tensor::conv2d(x, weight, bias.as_ref(), *params)?,
            Self::Depthwise {
                weight,
                bias,
                params,
            } => tensor::depthwise_conv2d(x, weight, bias.as_ref(), *params)?,
            Self::Linear { weight, bias } => tensor::linear(x, weight, bias.as_ref())?,
            Self::Silu => tensor::silu(x),
            Self::LayerNorm { gamma, beta, eps } => tensor::layernorm(x, gamma, beta, *eps)?,
            Self::GlobalAvgPool => tensor::global_avg_pool(x)?,
            Self::Flatten => x.clone().reshape(&[x.len()])?,
            Self::BatchNorm {
                mean,
                var,
                gamma,
                beta,
                eps,
            } => batchnorm_inference(
                x,
                BatchNormParams {
                    mean,
                    var,
                    gamma,
                    beta,
                },
                *eps,
            )?,
        })
    }

    /// Gradients of `sum(grad_out * forward(x))` with respect to `x` and to
    /// each tensor of [`params`](Self::params), in that order.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        match self {
            Self::Conv2d {
                weight,
                bias,
                params,
            } => conv_backward(x, weight, bias.is_some(), *params, grad_out, false),
            Self::Depthwise {
                weight,
                bias,
                params,
            } => conv_backward(x, weight, bias.is_some(), *params, grad_out, true),
            Self::Linear { weight, bias } => linear_backward(x, weight, bias.is_some(), grad_out),
            Self::Silu => {
                let g = x
                    .data()
                    .iter()
                    .zip(grad_out.data())
                    .map(|(&v, &g)| {
                        let s = sigmoid(v);
                        g * s * (T::one() + v * (T::one() - s))
                    })
                    .collect();
                Ok((Tensor::from_vec(x.shape().to_vec(), g)?, vec![]))
            }
            Self::LayerNorm { gamma, eps, .. } => layernorm_backward(x, gamma, *eps, grad_out),
            Self::GlobalAvgPool => {
                let (c, h, w) = x.dims3("global_avg_pool backward")?;
                let inv = cst::<T>(1.0 / (h * w) as f64);
                let g = grad_out.data();
                let gx = Tensor::from_fn(&[c, h, w], |i| g[i / (h * w)] * inv)?;
                Ok((gx, vec![]))
            }
            Self::Flatten => Ok((grad_out.clone().reshape(x.shape())?, vec![])),
            Self::BatchNorm { .. } => Err(DistillError::NonDifferentiable("batch_norm")),
        }
    }
}

fn sigmoid<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn linear_backward<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    has_bias: bool,
    g: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    let (n_out, n_in) = (weight.shape()[0], weight.shape()[1]);
    let rows = x.len() / n_in;
    let (xd, wd, gd) = (x.data(), weight.data(), g.data());
    let mut gw = vec![T::zero(); n_out * n_in];
    let mut gb = vec![T::zero(); n_out];
    let mut gx = vec![T::zero(); x.len()];
    for r in 0..rows {
        let xr = &xd[r * n_in..(r + 1) * n_in];
        let gr = &gd[r * n_out..(r + 1) * n_out];
        for o in 0..n_out {
            let go = gr[o];
            gb[o] = gb[o] + go;
            for i in 0..n_in {
                gw[o * n_in + i] = gw[o * n_in + i] + go * xr[i];
                gx[r * n_in + i] = gx[r * n_in + i] + go * wd[o * n_in + i];
            }
        }
    }
    let mut grads = vec![Tensor::from_vec(vec![n_out, n_in], gw)?];
    if has_bias {
        grads.push(Tensor::from_vec(vec![n_out], gb)?);
    }
    Ok((Tensor::from_vec(x.shape().to_vec(), gx)?, grads))
}

fn conv_backward<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    has_bias: bool,
    params: Conv2dParams,
    g: &Tensor<T>,
    depthwise: bool,
) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    let (c_in, h, w) = x.dims3("conv backward")?;
    let (c_out, oh, ow) = g.dims3("conv backward")?;
    let ws = weight.shape();
    let (kh, kw) = (ws[ws.len() - 2], ws[ws.len() - 1]);
    // Channels of the input window seen by output channel `o`.
    let in_channels = |o: usize| if depthwise { o..o + 1 } else { 0..c_in };
    let w_index = |o: usize, c: usize, i: usize, j: usize| {
        if depthwise {
            (o * kh + i) * kw + j
        } else {
            ((o * c_in + c) * kh + i) * kw + j
        }
    };
    let (xd, wd, gd) = (x.data(), weight.data(), g.data());
    let mut gw = vec![T::zero(); weight.len()];
    let mut gb = vec![T::zero(); c_out];
    let mut gx = vec![T::zero(); x.len()];
    let (s, p) = (params.stride as isize, params.padding as isize);
    for o in 0..c_out {
        for y in 0..oh {
            for xo in 0..ow {
                let go = gd[(o * oh + y) * ow + xo];
                gb[o] = gb[o] + go;
                for c in in_channels(o) {
                    for i in 0..kh {
                        let iy = y as isize * s + i as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for j in 0..kw {
                            let ix = xo as isize * s + j as isize - p;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let xi = (c * h + iy as usize) * w + ix as usize;
                            let wi = w_index(o, c, i, j);
                            gw[wi] = gw[wi] + go * xd[xi];
                            gx[xi] = gx[xi] + go * wd[wi];
                        }
                    }
                }
            }
        }
    }
    let mut grads = vec![Tensor::from_vec(ws.to_vec(), gw)?];
    if has_bias {
        grads.push(Tensor::from_vec(vec![c_out], gb)?);
    }
    Ok((Tensor::from_vec(x.shape().to_vec(), gx)?, grads))
}

fn layernorm_backward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    eps: T,
    g: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    let d = gamma.len();
    let inv_d = cst::<T>(1.0 / d as f64);
    let gm = gamma.data();
    let mut gx = Vec::with_capacity(x.len());
    let mut gg = vec![T::zero(); d];
    let mut gbeta = vec![T::zero(); d];
    for (row, grow) in x.data().chunks_exact(d).zip(g.data().chunks_exact(d)) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let rstd = T::one() / (var + eps).sqrt();
        let xhat: Vec<T> = row.iter().map(|&v| (v - mean) * rstd).collect();
        let dxhat: Vec<T> = grow.iter().zip(gm).map(|(&a, &b)| a * b).collect();
        let mean_dxhat = dxhat.iter().copied().sum::<T>() * inv_d;
        let mean_dxhat_xhat = dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<T>() * inv_d;
        for k in 0..d {
            gg[k] = gg[k] + grow[k] * xhat[k];
            gbeta[k] = gbeta[k] + grow[k];
            gx.push(rstd * (dxhat[k] - mean_dxhat - xhat[k] * mean_dxhat_xhat));
        }
    }
    Ok((
        Tensor::from_vec(x.shape().to_vec(), gx)?,
        vec![
            Tensor::from_vec(vec![d], gg)?,
            Tensor::from_vec(vec![d], gbeta)?,
        ],
    ))
}

/// Sequential student network, optionally ending in a linear projection to
/// the teacher's embedding width.
#[derive(Debug, Clone, PartialEq)]
pub struct Student<T: Element> {
    pub layers: Vec<Layer<T>>,
    pub input_shape: Vec<usize>,
    /// Whether the last layer is the projection head.
    pub projection: bool,
}

/// Upper bound on student depth, projection excluded.
pub const MAX_LAYERS: usize = 5;

impl<T: Element> Student<T> {
    /// Builds a student for inputs of `input_shape` whose output width must
    /// equal `teacher_dim`. With `projection`, a linear head is appended when
    /// the stack's width differs.
    pub fn init(
        spec: &[LayerSpec],
        input_shape: &[usize],
        teacher_dim: usize,
        projection: bool,
        seed: u64,
    ) -> Result<Self> {
        if spec.is_empty() || spec.len() > MAX_LAYERS {
            return Err(DistillError::Config(format!(
                "student needs 1 to {MAX_LAYERS} layers, got {}",
                spec.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(spec.len() + 1);
        for s in spec {
            let (layer, out) = Layer::init(s, &shape, &mut rng)?;
            layers.push(layer);
            shape = out;
        }
        if shape.len() != 1 {
            return Err(DistillError::Config(format!(
                "student output must be a vector, got shape {shape:?}"
            )));
        }
        let mut with_projection = false;
        if shape[0] != teacher_dim {
            if !projection {
                return Err(DistillError::DimensionMismatch {
                    student: shape[0],
                    teacher: teacher_dim,
                });
            }
            let spec = LayerSpec::Linear {
                out_features: teacher_dim,
                bias: true,
            };
            layers.push(Layer::init(&spec, &shape, &mut rng)?.0);
            with_projection = true;
        }
        Ok(Self {
            layers,
            input_shape: input_shape.to_vec(),
            projection: with_projection,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    /// Input followed by every layer's output.
    pub fn forward_cached(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for l in &self.layers {
            let next = l.forward(acts.last().expect("non-empty"))?;
            acts.push(next);
        }
        Ok(acts)
    }

    /// Parameter gradients (flattened in [`named_params`](Self::named_params)
    /// order) and the input gradient, for upstream gradient `grad_out`.
    pub fn backward(
        &self,
        acts: &[Tensor<T>],
        grad_out: &Tensor<T>,
    ) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (l, x) in self.layers.iter().zip(acts).rev() {
            let (gx, gp) = l.backward(x, &g)?;
            per_layer.push(gp);
            g = gx;
        }
        per_layer.reverse();
        Ok((per_layer.into_iter().flatten().collect(), g))
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let n = self.layers.len();
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                let prefix = if self.projection && i + 1 == n {
                    "projection".to_string()
                } else {
                    format!("layers.{i}")
                };
                l.params()
                    .into_iter()
                    .map(move |(name, t)| (format!("{prefix}.{name}"), t))
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }
}
