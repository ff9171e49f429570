//! Few-shot classification over embeddings: centering and normalization,
//! nearest-class-mean, transductive soft k-means and episodic evaluation.

mod episode;
mod eval;
mod ncm;
mod soft_kmeans;

pub use episode::{episode_rng, sample_episode, Episode, EpisodeSampler};
pub use eval::{evaluate, ClassifierConfig, EvalReport, Protocol};
pub use ncm::{ncm_classify, ncm_fit, preprocess, preprocess_one, squared_distance, Prototype};
pub use soft_kmeans::{soft_kmeans_transductive, SoftKMeans, Transductive};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FewShotError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {class} has no support vectors")]
    EmptyClass { class: u32 },
    #[error("no prototypes to classify against")]
    NoPrototypes,
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dataset has {have} classes, episode needs {need}")]
    InsufficientClasses { have: usize, need: usize },
    #[error("class {class} has {have} items, episode needs {need}")]
    InsufficientData {
        class: u32,
        have: usize,
        need: usize,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = FewShotError> = std::result::Result<T, E>;
