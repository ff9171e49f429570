use serde::{Deserialize, Serialize};

use crate::tensor::DEFAULT_NORM_EPS;

/// Transformer part of a MobileViT block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerSpec {
    pub dim: usize,
    pub ffn_dim: usize,
    pub depth: usize,
    pub heads: usize,
    /// Patch height and width.
    pub patch: (usize, usize),
}

/// One resolution stage: `mv2_blocks` inverted-residual blocks (the first
/// one carries `stride`), optionally followed by one MobileViT block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    pub out_channels: usize,
    pub stride: usize,
    pub expansion: usize,
    pub mv2_blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformer: Option<TransformerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// `(H, W)` of input images in pixels.
    pub input_resolution: (usize, usize),
    pub in_channels: usize,
    pub stem_channels: usize,
    pub stages: Vec<StageSpec>,
    /// Width of the final 1x1 expansion conv, which is also the embedding width.
    pub embedding_dim: usize,
    #[serde(default = "default_eps")]
    pub bn_eps: f64,
    #[serde(default = "default_eps")]
    pub ln_eps: f64,
    /// Bilinearly resize feature maps whose size is not a multiple of the
    /// patch size before unfolding, and resize back after folding.
    #[serde(default = "default_true")]
    pub resize_to_patch_multiple: bool,
}

fn default_eps() -> f64 {
    DEFAULT_NORM_EPS
}

fn default_true() -> bool {
    true
}

impl ArchConfig {
    /// MobileViT-XXS: expansion 2 everywhere, transformer widths 64/80/96
    /// with depths 2/4/3, 2x2 patches, final width 320. No classifier head.
    pub fn mobilevit_xxs(resolution: (usize, usize)) -> Self {
        let mv2 = |name: &str, out, stride, blocks| StageSpec {
            name: name.into(),
            out_channels: out,
            stride,
            expansion: 2,
            mv2_blocks: blocks,
            transformer: None,
        };
        let mvit = |name: &str, out, dim, depth| StageSpec {
            transformer: Some(TransformerSpec {
                dim,
                ffn_dim: 2 * dim,
                depth,
                heads: 4,
                patch: (2, 2),
            }),
            ..mv2(name, out, 2, 1)
        };
        Self {
            input_resolution: resolution,
            in_channels: 3,
            stem_channels: 16,
            stages: vec![
                mv2("layer1", 16, 1, 1),
                mv2("layer2", 24, 2, 3),
                mvit("layer3", 48, 64, 2),
                mvit("layer4", 64, 80, 4),
                mvit("layer5", 80, 96, 3),
            ],
            embedding_dim: 320,
            bn_eps: DEFAULT_NORM_EPS,
            ln_eps: DEFAULT_NORM_EPS,
            resize_to_patch_multiple: true,
        }
    }

    pub fn with_resolution(&self, resolution: (usize, usize)) -> Self {
        Self {
            input_resolution: resolution,
            ..self.clone()
        }
    }
}
