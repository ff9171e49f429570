//! Analytic parameter and multiply-accumulate counts.
//!
//! Counting rules:
//! - conv: `C_out * (C_in / groups) * kH * kW * H' * W'` MACs
//! - linear: `rows * in * out` MACs
//! - attention: the fused QKV and output projections plus the two `N x N`
//!   products (`Q K^T` and `A V`), i.e. `2 * P * N^2 * D` for `P` patch
//!   positions of `N` tokens each
//! - normalization, activations, resizing, adds and pooling: zero MACs
//!
//! Parameters are trainable tensors only; batchnorm running statistics are
//! reported separately as buffers.

use serde::{Deserialize, Serialize};

use super::{ArchConfig, ModelGraph, Node, Op, ParamKind, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerComplexity {
    pub name: String,
    pub kind: String,
    pub params: u64,
    pub macs: u64,
    pub output_shape: Vec<usize>,
}

/// Which count is closest to an externally quoted FLOPs figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub reference_flops: f64,
    /// `"macs"` or `"flops_2x"`.
    pub closest_convention: String,
    pub value: u64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub resolution: (usize, usize),
    pub param_count: u64,
    pub buffer_count: u64,
    pub macs: u64,
    pub flops_2x: u64,
    pub per_layer: Vec<LayerComplexity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceComparison>,
}

impl ComplexityReport {
    /// Picks whichever of MACs or `2*MACs` is closer to `flops`.
    pub fn compare_to(&self, flops: f64) -> ReferenceComparison {
        let err = |v: u64| (v as f64 - flops).abs() / flops;
        let (name, value) = if err(self.macs) <= err(self.flops_2x) {
            ("macs", self.macs)
        } else {
            ("flops_2x", self.flops_2x)
        };
        ReferenceComparison {
            reference_flops: flops,
            closest_convention: name.into(),
            value,
            relative_error: err(value),
        }
    }
}

/// `(params, MACs)` of one convolution with a `[c_out, c_in/groups, k_h,
/// k_w]` kernel producing an `out_h x out_w` map.
#[allow(clippy::too_many_arguments)]
pub fn conv_cost(
    c_in: usize,
    c_out: usize,
    groups: usize,
    k_h: usize,
    k_w: usize,
    out_h: usize,
    out_w: usize,
    bias: bool,
) -> (u64, u64) {
    let weights = (c_out * (c_in / groups) * k_h * k_w) as u64;
    let params = weights + if bias { c_out as u64 } else { 0 };
    (params, weights * (out_h * out_w) as u64)
}

/// `(trainable params, MACs)` of a single node.
pub fn node_complexity(model: &ModelGraph, node: &Node) -> (u64, u64) {
    let specs = model.param_specs();
    let params = node
        .op
        .params()
        .into_iter()
        .filter(|&p| specs[p].kind == ParamKind::Trainable)
        .map(|p| specs[p].shape.iter().product::<usize>() as u64)
        .sum();
    let numel = |s: &[usize]| s.iter().product::<usize>() as u64;
    let macs = match &node.op {
        Op::Conv { weight, groups, .. } => {
            let w = &specs[*weight].shape;
            let (_, macs) = conv_cost(
                node.input_shapes[0][0],
                w[0],
                *groups,
                w[2],
                w[3],
                node.out_shape[1],
                node.out_shape[2],
                false,
            );
            macs
        }
        Op::Linear { weight, .. } => {
            let w = &specs[*weight].shape;
            let rows = numel(&node.out_shape) / w[0] as u64;
            rows * numel(w)
        }
        Op::Attention {
            qkv_weight,
            out_weight,
            ..
        } => {
            let (p, n, d) = match node.out_shape[..] {
                [p, n, d] => (p as u64, n as u64, d as u64),
                _ => unreachable!("attention output is [P,N,D]"),
            };
            let tokens = p * n;
            tokens * numel(&specs[*qkv_weight].shape)
                + tokens * numel(&specs[*out_weight].shape)
                + 2 * p * n * n * d
        }
        _ => 0,
    };
    (params, macs)
}

/// Complexity of `model`'s architecture evaluated at `resolution`.
pub fn complexity(model: &ModelGraph, resolution: (usize, usize)) -> Result<ComplexityReport> {
    let rebuilt;
    let graph = if model.config().input_resolution == resolution {
        model
    } else {
        rebuilt = ModelGraph::build(&model.config().with_resolution(resolution))?;
        &rebuilt
    };
    Ok(report_for(graph))
}

fn report_for(graph: &ModelGraph) -> ComplexityReport {
    let per_layer: Vec<LayerComplexity> = graph
        .nodes()
        .iter()
        .filter_map(|node| {
            let (params, macs) = node_complexity(graph, node);
            (params > 0 || macs > 0).then(|| LayerComplexity {
                name: node.name.clone(),
                kind: node.op.kind().into(),
                params,
                macs,
                output_shape: node.out_shape.clone(),
            })
        })
        .collect();
    let buffer_count = graph
        .param_specs()
        .iter()
        .filter(|s| s.kind == ParamKind::Buffer)
        .map(|s| s.shape.iter().product::<usize>() as u64)
        .sum();
    let param_count = per_layer.iter().map(|l| l.params).sum();
    let macs = per_layer.iter().map(|l| l.macs).sum();
    ComplexityReport {
        resolution: graph.config().input_resolution,
        param_count,
        buffer_count,
        macs,
        flops_2x: 2 * macs,
        per_layer,
        reference: None,
    }
}

/// Convenience for configs that have not been built yet.
pub fn complexity_of_config(config: &ArchConfig) -> Result<ComplexityReport> {
    Ok(report_for(&ModelGraph::build(config)?))
}
