//! MobileViT feature extractor: configuration, graph construction, forward
//! pass and analytic complexity.

mod complexity;
mod config;
mod graph;
mod init;

pub use complexity::{
    complexity, complexity_of_config, conv_cost, node_complexity, ComplexityReport,
    LayerComplexity, ReferenceComparison,
};
pub use config::{ArchConfig, StageSpec, TransformerSpec};
pub use graph::{ModelGraph, Node, NodeId, Op, ParamId, ParamKind, ParamSpec};
pub use init::{random_weights, zero_weights};

use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum BackboneError {
    #[error("invalid architecture at stage `{stage}`: {reason}")]
    Config { stage: String, reason: String },
    #[error("bundle architecture is not a valid config: {0}")]
    Arch(String),
    #[error("weights are not loaded")]
    WeightsNotLoaded,
    #[error("input shape {got:?} does not match configured {expected:?}")]
    ResolutionMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("missing weight tensor `{0}`")]
    MissingTensor(String),
    #[error("weight tensor `{0}` supplied twice")]
    DuplicateTensor(String),
    #[error("weight tensor `{0}` is not a parameter of this graph")]
    UnexpectedTensor(String),
    #[error("weight tensor `{name}` has shape {got:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T, E = BackboneError> = std::result::Result<T, E>;

/// Builds the feature extractor described by `config` (weights unloaded).
pub fn build_mobilevit(config: &ArchConfig) -> Result<ModelGraph> {
    ModelGraph::build(config)
}
