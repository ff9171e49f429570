//! Feature distillation: a small student regressed onto precomputed teacher
//! embeddings with an MSE loss and plain SGD.

mod bundle;
pub mod gradcheck;
mod layers;
mod train;

pub use bundle::{
    embed_vectors, is_student_bundle, student_from_bundle, student_to_bundle, StudentArch,
    STUDENT_KIND,
};
pub use layers::{Layer, LayerSpec, Student, MAX_LAYERS};
pub use train::{mse_feature_loss, train, DistillConfig, TeacherEmbeddingSet, TrainReport};

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistillError {
    #[error("invalid student or training config: {0}")]
    Config(String),
    #[error(
        "student width {student} differs from teacher width {teacher} and no projection is enabled"
    )]
    DimensionMismatch { student: usize, teacher: usize },
    #[error("loss dimension mismatch: student {student}, teacher {teacher}")]
    LossDimension { student: usize, teacher: usize },
    #[error("layer `{0}` has no backward pass")]
    NonDifferentiable(&'static str),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("no training items")]
    EmptyDataset,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T, E = DistillError> = std::result::Result<T, E>;
