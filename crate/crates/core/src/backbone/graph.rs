use std::collections::{BTreeMap, HashSet};

use super::{ArchConfig, BackboneError, Result};
use crate::io::WeightBundle;
use crate::tensor::{self, AttentionParams, BatchNormParams, Conv2dParams, Tensor};

pub type NodeId = usize;
pub type ParamId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Frozen statistic, e.g. batchnorm running mean/variance.
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input,
    Conv {
        weight: ParamId,
        bias: Option<ParamId>,
        stride: usize,
        padding: usize,
        groups: usize,
    },
    BatchNorm {
        gamma: ParamId,
        beta: ParamId,
        mean: ParamId,
        var: ParamId,
    },
    Silu,
    Add,
    ConcatChannels,
    Resize {
        h: usize,
        w: usize,
    },
    Unfold {
        ph: usize,
        pw: usize,
    },
    Fold {
        h: usize,
        w: usize,
        ph: usize,
        pw: usize,
    },
    LayerNorm {
        gamma: ParamId,
        beta: ParamId,
    },
    /// Self-attention over `[P, N, D]`, independently per patch position.
    /// `qkv_weight` is the fused `[3D, D]` projection.
    Attention {
        qkv_weight: ParamId,
        qkv_bias: ParamId,
        out_weight: ParamId,
        out_bias: ParamId,
        heads: usize,
    },
    Linear {
        weight: ParamId,
        bias: ParamId,
    },
    GlobalAvgPool,
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Conv { groups, .. } if *groups > 1 => "depthwise_conv",
            Op::Conv { .. } => "conv",
            Op::BatchNorm { .. } => "batchnorm",
            Op::Silu => "silu",
            Op::Add => "add",
            Op::ConcatChannels => "concat",
            Op::Resize { .. } => "resize",
            Op::Unfold { .. } => "unfold",
            Op::Fold { .. } => "fold",
            Op::LayerNorm { .. } => "layernorm",
            Op::Attention { .. } => "attention",
            Op::Linear { .. } => "linear",
            Op::GlobalAvgPool => "global_avg_pool",
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match *self {
            Op::Conv { weight, bias, .. } => std::iter::once(weight).chain(bias).collect(),
            Op::BatchNorm {
                gamma,
                beta,
                mean,
                var,
            } => vec![gamma, beta, mean, var],
            Op::LayerNorm { gamma, beta } => vec![gamma, beta],
            Op::Attention {
                qkv_weight,
                qkv_bias,
                out_weight,
                out_bias,
                ..
            } => vec![qkv_weight, qkv_bias, out_weight, out_bias],
            Op::Linear { weight, bias } => vec![weight, bias],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<NodeId>,
    pub input_shapes: Vec<Vec<usize>>,
    pub out_shape: Vec<usize>,
}

/// Shape-specialized DAG of tensor kernels, stored in topological order.
///
/// The graph is immutable once built; weights are attached with
/// [`ModelGraph::load_weights`] and forward passes borrow it immutably, so a
/// loaded model can serve concurrent callers.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    config: ArchConfig,
    nodes: Vec<Node>,
    params: Vec<ParamSpec>,
    weights: Option<Vec<Tensor<f32>>>,
    last_use: Vec<NodeId>,
}

struct Builder {
    nodes: Vec<Node>,
    params: Vec<ParamSpec>,
    names: HashSet<String>,
}

type Shape = Vec<usize>;

fn cfg_err(stage: &str, reason: impl Into<String>) -> BackboneError {
    BackboneError::Config {
        stage: stage.to_string(),
        reason: reason.into(),
    }
}

impl Builder {
    fn param(&mut self, name: String, shape: Vec<usize>, kind: ParamKind) -> ParamId {
        let fresh = self.names.insert(name.clone());
        debug_assert!(fresh, "duplicate param {name}");
        self.params.push(ParamSpec { name, shape, kind });
        self.params.len() - 1
    }

    fn shape(&self, id: NodeId) -> &Shape {
        &self.nodes[id].out_shape
    }

    fn push(&mut self, name: String, op: Op, inputs: Vec<NodeId>, out_shape: Shape) -> NodeId {
        let input_shapes = inputs
            .iter()
            .map(|&i| self.nodes[i].out_shape.clone())
            .collect();
        self.nodes.push(Node {
            name,
            op,
            inputs,
            input_shapes,
            out_shape,
        });
        self.nodes.len() - 1
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        stage: &str,
        name: &str,
        x: NodeId,
        out_c: usize,
        k: usize,
        stride: usize,
        groups: usize,
        bias: bool,
    ) -> Result<NodeId> {
        let (c, h, w) = match self.shape(x)[..] {
            [c, h, w] => (c, h, w),
            _ => return Err(cfg_err(stage, format!("{name}: expected [C,H,W] input"))),
        };
        if out_c == 0 {
            return Err(cfg_err(stage, format!("{name}: zero output channels")));
        }
        if stride == 0 {
            return Err(cfg_err(stage, format!("{name}: stride must be >= 1")));
        }
        let params = Conv2dParams::new(stride, k / 2);
        let (oh, ow) = match (
            tensor::conv_output_dim(h, k, params),
            tensor::conv_output_dim(w, k, params),
        ) {
            (Some(oh), Some(ow)) => (oh, ow),
            _ => {
                return Err(cfg_err(
                    stage,
                    format!("{name}: {k}x{k} kernel does not fit a {h}x{w} feature map"),
                ))
            }
        };
        let weight = self.param(
            format!("{name}.weight"),
            vec![out_c, c / groups, k, k],
            ParamKind::Trainable,
        );
        let bias =
            bias.then(|| self.param(format!("{name}.bias"), vec![out_c], ParamKind::Trainable));
        Ok(self.push(
            name.to_string(),
            Op::Conv {
                weight,
                bias,
                stride,
                padding: k / 2,
                groups,
            },
            vec![x],
            vec![out_c, oh, ow],
        ))
    }

    fn bn(&mut self, name: &str, x: NodeId) -> NodeId {
        let c = self.shape(x)[0];
        let gamma = self.param(format!("{name}.weight"), vec![c], ParamKind::Trainable);
        let beta = self.param(format!("{name}.bias"), vec![c], ParamKind::Trainable);
        let mean = self.param(format!("{name}.running_mean"), vec![c], ParamKind::Buffer);
        let var = self.param(format!("{name}.running_var"), vec![c], ParamKind::Buffer);
        let shape = self.shape(x).clone();
        self.push(
            name.to_string(),
            Op::BatchNorm {
                gamma,
                beta,
                mean,
                var,
            },
            vec![x],
            shape,
        )
    }

    fn silu(&mut self, name: &str, x: NodeId) -> NodeId {
        let shape = self.shape(x).clone();
        self.push(format!("{name}.act"), Op::Silu, vec![x], shape)
    }

    /// conv -> batchnorm -> optional SiLU, the unit used throughout MobileViT.
    #[allow(clippy::too_many_arguments)]
    fn conv_bn(
        &mut self,
        stage: &str,
        prefix: &str,
        x: NodeId,
        out_c: usize,
        k: usize,
        stride: usize,
        groups: usize,
        act: bool,
    ) -> Result<NodeId> {
        let y = self.conv(
            stage,
            &format!("{prefix}.conv"),
            x,
            out_c,
            k,
            stride,
            groups,
            false,
        )?;
        let y = self.bn(&format!("{prefix}.bn"), y);
        Ok(if act { self.silu(prefix, y) } else { y })
    }

    fn add(&mut self, name: String, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.shape(a).clone();
        debug_assert_eq!(&shape, self.shape(b));
        self.push(name, Op::Add, vec![a, b], shape)
    }

    fn mv2(
        &mut self,
        stage: &str,
        prefix: &str,
        x: NodeId,
        out_c: usize,
        stride: usize,
        expansion: usize,
    ) -> Result<NodeId> {
        if expansion == 0 {
            return Err(cfg_err(stage, "expansion must be >= 1"));
        }
        let in_c = self.shape(x)[0];
        let hidden = in_c * expansion;
        let mut y = x;
        if expansion != 1 {
            y = self.conv_bn(stage, &format!("{prefix}.expand"), y, hidden, 1, 1, 1, true)?;
        }
        y = self.conv_bn(
            stage,
            &format!("{prefix}.dw"),
            y,
            hidden,
            3,
            stride,
            hidden,
            true,
        )?;
        y = self.conv_bn(
            stage,
            &format!("{prefix}.project"),
            y,
            out_c,
            1,
            1,
            1,
            false,
        )?;
        if stride == 1 && in_c == out_c {
            y = self.add(format!("{prefix}.residual"), x, y);
        }
        Ok(y)
    }

    fn layernorm(&mut self, name: &str, x: NodeId) -> NodeId {
        let d = *self.shape(x).last().expect("rank >= 1");
        let gamma = self.param(format!("{name}.weight"), vec![d], ParamKind::Trainable);
        let beta = self.param(format!("{name}.bias"), vec![d], ParamKind::Trainable);
        let shape = self.shape(x).clone();
        self.push(
            name.to_string(),
            Op::LayerNorm { gamma, beta },
            vec![x],
            shape,
        )
    }

    fn linear(&mut self, name: &str, x: NodeId, out: usize) -> NodeId {
        let mut shape = self.shape(x).clone();
        let n_in = *shape.last().expect("rank >= 1");
        let weight = self.param(
            format!("{name}.weight"),
            vec![out, n_in],
            ParamKind::Trainable,
        );
        let bias = self.param(format!("{name}.bias"), vec![out], ParamKind::Trainable);
        *shape.last_mut().expect("rank >= 1") = out;
        self.push(
            name.to_string(),
            Op::Linear { weight, bias },
            vec![x],
            shape,
        )
    }

    fn mobilevit_block(
        &mut self,
        stage: &str,
        prefix: &str,
        x: NodeId,
        spec: &super::TransformerSpec,
        resize_allowed: bool,
    ) -> Result<NodeId> {
        let (c, h, w) = match self.shape(x)[..] {
            [c, h, w] => (c, h, w),
            _ => unreachable!("conv outputs are rank 3"),
        };
        let (ph, pw) = spec.patch;
        let d = spec.dim;
        if ph == 0 || pw == 0 {
            return Err(cfg_err(stage, "patch dims must be >= 1"));
        }
        if d == 0 || spec.ffn_dim == 0 {
            return Err(cfg_err(stage, "transformer dims must be >= 1"));
        }
        if spec.heads == 0 || !d.is_multiple_of(spec.heads) {
            return Err(cfg_err(
                stage,
                format!("transformer dim {d} not divisible by {} heads", spec.heads),
            ));
        }
        let y = self.conv_bn(
            stage,
            &format!("{prefix}.local.conv3x3"),
            x,
            c,
            3,
            1,
            1,
            true,
        )?;
        let mut y = self.conv(
            stage,
            &format!("{prefix}.local.conv1x1"),
            y,
            d,
            1,
            1,
            1,
            false,
        )?;

        let (th, tw) = (h.div_ceil(ph) * ph, w.div_ceil(pw) * pw);
        let resized = (th, tw) != (h, w);
        if resized {
            if !resize_allowed {
                return Err(cfg_err(
                    stage,
                    format!("{h}x{w} feature map not divisible by {ph}x{pw} patches and resizing is disabled"),
                ));
            }
            y = self.push(
                format!("{prefix}.resize_in"),
                Op::Resize { h: th, w: tw },
                vec![y],
                vec![d, th, tw],
            );
        }
        let (p, n) = (ph * pw, (th / ph) * (tw / pw));
        let mut t = self.push(
            format!("{prefix}.unfold"),
            Op::Unfold { ph, pw },
            vec![y],
            vec![p, n, d],
        );
        for l in 0..spec.depth {
            let lp = format!("{prefix}.transformer.{l}");
            let a = self.layernorm(&format!("{lp}.norm1"), t);
            let qkv_weight = self.param(
                format!("{lp}.attn.qkv.weight"),
                vec![3 * d, d],
                ParamKind::Trainable,
            );
            let qkv_bias = self.param(
                format!("{lp}.attn.qkv.bias"),
                vec![3 * d],
                ParamKind::Trainable,
            );
            let out_weight = self.param(
                format!("{lp}.attn.out.weight"),
                vec![d, d],
                ParamKind::Trainable,
            );
            let out_bias = self.param(format!("{lp}.attn.out.bias"), vec![d], ParamKind::Trainable);
            let a = self.push(
                format!("{lp}.attn"),
                Op::Attention {
                    qkv_weight,
                    qkv_bias,
                    out_weight,
                    out_bias,
                    heads: spec.heads,
                },
                vec![a],
                vec![p, n, d],
            );
            t = self.add(format!("{lp}.residual1"), t, a);
            let f = self.layernorm(&format!("{lp}.norm2"), t);
            let f = self.linear(&format!("{lp}.ffn.fc1"), f, spec.ffn_dim);
            let f = self.silu(&format!("{lp}.ffn"), f);
            let f = self.linear(&format!("{lp}.ffn.fc2"), f, d);
            t = self.add(format!("{lp}.residual2"), t, f);
        }
        t = self.layernorm(&format!("{prefix}.transformer.norm"), t);
        let mut y = self.push(
            format!("{prefix}.fold"),
            Op::Fold {
                h: th,
                w: tw,
                ph,
                pw,
            },
            vec![t],
            vec![d, th, tw],
        );
        if resized {
            y = self.push(
                format!("{prefix}.resize_out"),
                Op::Resize { h, w },
                vec![y],
                vec![d, h, w],
            );
        }
        let y = self.conv_bn(stage, &format!("{prefix}.proj"), y, c, 1, 1, 1, true)?;
        let cat = self.push(
            format!("{prefix}.concat"),
            Op::ConcatChannels,
            vec![x, y],
            vec![2 * c, h, w],
        );
        self.conv_bn(stage, &format!("{prefix}.fusion"), cat, c, 3, 1, 1, true)
    }
}

impl ModelGraph {
    /// Builds the feature extractor for `config`, validating that every
    /// stage's shapes chain at the configured input resolution.
    pub fn build(config: &ArchConfig) -> Result<Self> {
        let (h, w) = config.input_resolution;
        if h == 0 || w == 0 || config.in_channels == 0 {
            return Err(cfg_err(
                "input",
                "resolution and channel count must be >= 1",
            ));
        }
        if !(config.bn_eps > 0.0) || !(config.ln_eps > 0.0) {
            return Err(cfg_err("input", "normalization eps must be > 0"));
        }
        let mut b = Builder {
            nodes: Vec::new(),
            params: Vec::new(),
            names: HashSet::new(),
        };
        let mut stage_names = HashSet::new();
        for stage in &config.stages {
            if !stage_names.insert(stage.name.as_str())
                || ["stem", "head", "input", "pool"].contains(&stage.name.as_str())
            {
                return Err(cfg_err(
                    &stage.name,
                    "stage names must be unique and not reserved",
                ));
            }
        }
        let input = b.push(
            "input".into(),
            Op::Input,
            vec![],
            vec![config.in_channels, h, w],
        );
        let mut x = b.conv_bn("stem", "stem", input, config.stem_channels, 3, 2, 1, true)?;
        for stage in &config.stages {
            let s = stage.name.as_str();
            if stage.mv2_blocks == 0 && stage.transformer.is_none() {
                return Err(cfg_err(s, "stage has no blocks"));
            }
            for i in 0..stage.mv2_blocks {
                let stride = if i == 0 { stage.stride } else { 1 };
                x = b.mv2(
                    s,
                    &format!("{s}.mv2.{i}"),
                    x,
                    stage.out_channels,
                    stride,
                    stage.expansion,
                )?;
            }
            if let Some(t) = &stage.transformer {
                if stage.mv2_blocks == 0 && b.shape(x)[0] != stage.out_channels {
                    return Err(cfg_err(
                        s,
                        "MobileViT block needs an mv2 block to change width",
                    ));
                }
                x = b.mobilevit_block(
                    s,
                    &format!("{s}.mvit"),
                    x,
                    t,
                    config.resize_to_patch_multiple,
                )?;
            }
        }
        x = b.conv_bn("head", "head", x, config.embedding_dim, 1, 1, 1, true)?;
        let c = b.shape(x)[0];
        b.push("pool".into(), Op::GlobalAvgPool, vec![x], vec![c]);

        let mut last_use: Vec<NodeId> = (0..b.nodes.len()).collect();
        for (id, node) in b.nodes.iter().enumerate() {
            for &i in &node.inputs {
                last_use[i] = last_use[i].max(id);
            }
        }
        Ok(Self {
            config: config.clone(),
            nodes: b.nodes,
            params: b.params,
            weights: None,
            last_use,
        })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.nodes.last().expect("graph has an output").out_shape
    }

    pub fn is_loaded(&self) -> bool {
        self.weights.is_some()
    }

    /// Attaches weights. Every parameter must be supplied exactly once with
    /// the declared shape; unknown names are rejected.
    pub fn load_weights<I>(&mut self, tensors: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, Tensor<f32>)>,
    {
        let mut by_name: BTreeMap<String, Tensor<f32>> = BTreeMap::new();
        for (name, t) in tensors {
            if by_name.contains_key(&name) {
                return Err(BackboneError::DuplicateTensor(name));
            }
            by_name.insert(name, t);
        }
        let mut weights = Vec::with_capacity(self.params.len());
        for spec in &self.params {
            let t = by_name
                .remove(&spec.name)
                .ok_or_else(|| BackboneError::MissingTensor(spec.name.clone()))?;
            if t.shape() != spec.shape.as_slice() {
                return Err(BackboneError::TensorShape {
                    name: spec.name.clone(),
                    expected: spec.shape.clone(),
                    got: t.shape().to_vec(),
                });
            }
            weights.push(t);
        }
        if let Some(name) = by_name.into_keys().next() {
            return Err(BackboneError::UnexpectedTensor(name));
        }
        self.weights = Some(weights);
        Ok(())
    }

    /// Named weights in parameter order, if loaded.
    pub fn weights(&self) -> Option<Vec<(String, Tensor<f32>)>> {
        self.weights.as_ref().map(|w| {
            self.params
                .iter()
                .zip(w)
                .map(|(s, t)| (s.name.clone(), t.clone()))
                .collect()
        })
    }

    /// Packs the config and loaded weights into a bundle.
    pub fn to_bundle(&self) -> Result<WeightBundle> {
        let tensors = self.weights().ok_or(BackboneError::WeightsNotLoaded)?;
        let arch =
            serde_json::to_value(&self.config).map_err(|e| BackboneError::Arch(e.to_string()))?;
        Ok(WeightBundle::new(arch, tensors))
    }

    /// Builds the graph described by `bundle.arch` and loads its tensors.
    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let config: ArchConfig = serde_json::from_value(bundle.arch.clone())
            .map_err(|e| BackboneError::Arch(e.to_string()))?;
        let mut model = Self::build(&config)?;
        model.load_weights(bundle.tensors.iter().cloned())?;
        Ok(model)
    }

    /// Maps an image `[C,H,W]` to its embedding `[embedding_dim]`.
    pub fn forward(&self, image: &Tensor<f32>) -> Result<Tensor<f32>> {
        let weights = self
            .weights
            .as_ref()
            .ok_or(BackboneError::WeightsNotLoaded)?;
        let expected = &self.nodes[0].out_shape;
        if image.shape() != expected.as_slice() {
            return Err(BackboneError::ResolutionMismatch {
                expected: expected.clone(),
                got: image.shape().to_vec(),
            });
        }
        let bn_eps = self.config.bn_eps as f32;
        let ln_eps = self.config.ln_eps as f32;
        let mut values: Vec<Option<Tensor<f32>>> = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            let arg = |k: usize| values[node.inputs[k]].as_ref().expect("input computed");
            let out = match node.op {
                Op::Input => image.clone(),
                Op::Conv {
                    weight,
                    bias,
                    stride,
                    padding,
                    groups,
                } => tensor::conv2d_grouped(
                    arg(0),
                    &weights[weight],
                    bias.map(|b| &weights[b]),
                    Conv2dParams::new(stride, padding),
                    groups,
                )?,
                Op::BatchNorm {
                    gamma,
                    beta,
                    mean,
                    var,
                } => tensor::batchnorm_inference(
                    arg(0),
                    BatchNormParams {
                        mean: &weights[mean],
                        var: &weights[var],
                        gamma: &weights[gamma],
                        beta: &weights[beta],
                    },
                    bn_eps,
                )?,
                Op::Silu => tensor::silu(arg(0)),
                Op::Add => tensor::add(arg(0), arg(1))?,
                Op::ConcatChannels => tensor::concat_channels(arg(0), arg(1))?,
                Op::Resize { h, w } => tensor::resize_bilinear(arg(0), h, w)?,
                Op::Unfold { ph, pw } => tensor::unfold(arg(0), ph, pw)?,
                Op::Fold { h, w, ph, pw } => tensor::fold(arg(0), h, w, ph, pw)?,
                Op::LayerNorm { gamma, beta } => {
                    tensor::layernorm(arg(0), &weights[gamma], &weights[beta], ln_eps)?
                }
                Op::Attention {
                    qkv_weight,
                    qkv_bias,
                    out_weight,
                    out_bias,
                    heads,
                } => {
                    let d = *node.out_shape.last().expect("rank 3");
                    let split = |t: &Tensor<f32>, rows: usize, k: usize| {
                        let width = t.len() / (3 * rows);
                        let chunk = rows * width;
                        let shape = if width == 1 {
                            vec![rows]
                        } else {
                            vec![rows, width]
                        };
                        Tensor::from_vec(shape, t.data()[k * chunk..(k + 1) * chunk].to_vec())
                    };
                    let (qw, kw, vw) = (
                        split(&weights[qkv_weight], d, 0)?,
                        split(&weights[qkv_weight], d, 1)?,
                        split(&weights[qkv_weight], d, 2)?,
                    );
                    let (qb, kb, vb) = (
                        split(&weights[qkv_bias], d, 0)?,
                        split(&weights[qkv_bias], d, 1)?,
                        split(&weights[qkv_bias], d, 2)?,
                    );
                    let params = AttentionParams {
                        wq: &qw,
                        wk: &kw,
                        wv: &vw,
                        wo: &weights[out_weight],
                        bq: Some(&qb),
                        bk: Some(&kb),
                        bv: Some(&vb),
                        bo: Some(&weights[out_bias]),
                    };
                    tensor::multi_head_attention_batched(arg(0), params, heads)?
                }
                Op::Linear { weight, bias } => {
                    tensor::linear(arg(0), &weights[weight], Some(&weights[bias]))?
                }
                Op::GlobalAvgPool => tensor::global_avg_pool(arg(0))?,
            };
            debug_assert_eq!(out.shape(), node.out_shape.as_slice(), "node {}", node.name);
            values[id] = Some(out);
            for &i in &node.inputs {
                if self.last_use[i] == id {
                    values[i] = None;
                }
            }
        }
        Ok(values.pop().flatten().expect("output computed"))
    }

    pub fn forward_batch(&self, images: &[Tensor<f32>]) -> Result<Vec<Tensor<f32>>> {
        images.iter().map(|im| self.forward(im)).collect()
    }
}
