//! Dense row-major tensors and the numerical kernels the rest of the engine
//! is assembled from.
//!
//! Images use the channels-first `[C, H, W]` convention. Every kernel is a
//! pure function of its inputs: no kernel keeps state, so they can be called
//! from any number of threads at once. Kernels are generic over [`Element`]
//! so that the same code runs in `f32` (inference, training) and `f64`
//! (gradient verification).

mod activation;
mod attention;
mod conv;
mod linalg;
mod norm;
mod patch;
mod resize;

pub use activation::{sigmoid, silu, softmax};
pub use attention::{multi_head_attention, multi_head_attention_batched, AttentionParams};
pub use conv::{conv2d, conv2d_grouped, conv_output_dim, depthwise_conv2d, Conv2dParams};
pub use linalg::{add, concat_channels, global_avg_pool, linear, matmul};
pub use norm::{batchnorm_inference, layernorm, BatchNormParams, DEFAULT_NORM_EPS};
pub use patch::{fold, unfold};
pub use resize::resize_bilinear;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;

/// Scalar types the kernels operate on.
pub trait Element: Float + Default + Debug + Send + Sync + Sum + 'static {}

impl Element for f32 {}
impl Element for f64 {}

/// Converts an `f64` constant into the element type.
#[inline]
pub(crate) fn cst<T: Element>(v: f64) -> T {
    T::from(v).expect("constant representable in element type")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: invalid hyperparameter: {detail}")]
    InvalidHyperparameter { op: &'static str, detail: String },
    #[error("batchnorm: negative variance {value} at channel {channel}")]
    NegativeVariance { channel: usize, value: f64 },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("{op}: spatial dims {h}x{w} not divisible by patch {ph}x{pw}")]
    NotDivisible {
        op: &'static str,
        h: usize,
        w: usize,
        ph: usize,
        pw: usize,
    },
    #[error("invalid shape {shape:?}: {detail}")]
    InvalidShape { shape: Vec<usize>, detail: String },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}

/// Dense n-dimensional array with an explicit shape.
///
/// `data.len()` always equals the product of `shape`; every dimension is
/// positive. A rank-0 tensor (empty shape) holds one element.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if let Some(i) = shape.iter().position(|&d| d == 0) {
        return Err(TensorError::InvalidShape {
            shape: shape.to_vec(),
            detail: format!("dimension {i} is zero"),
        });
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| TensorError::InvalidShape {
            shape: shape.to_vec(),
            detail: "element count overflows usize".into(),
        })
}

impl<T: Element> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n = check_shape(&shape)?;
        if n != data.len() {
            return Err(TensorError::InvalidShape {
                shape,
                detail: format!("expected {n} elements, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    /// Builds a tensor by evaluating `f` at every flat index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        })
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<T>) -> Result<Self> {
        Self::from_vec(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Reinterprets the element sequence under a new shape.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {:?} changes element count", self.shape, shape),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    /// Returns `(C, H, W)` for a rank-3 tensor.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(mismatch(
                op,
                format!("expected [C,H,W], got {:?}", self.shape),
            )),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&x| U::from(x).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    /// Largest absolute elementwise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return Err(mismatch(
                "max_abs_diff",
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }
}
