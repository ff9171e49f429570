//! Weight bundles and embedding datasets on disk.
//!
//! Both formats share one container (see [`container`]); `docs/format.md`
//! has the byte-level layout.

mod bundle;
pub mod container;
mod embeddings;

pub use bundle::{load_bundle, read_bundle, save_bundle, write_bundle, TensorEntry, WeightBundle};
pub use embeddings::{
    load_embeddings, read_embeddings, save_embeddings, write_embeddings, EmbeddingDataset,
};

use std::path::PathBuf;

pub const WEIGHTS_TAG: &[u8; 4] = b"FSLW";
pub const EMBEDDINGS_TAG: &[u8; 4] = b"FSLE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic at byte {pos}")]
    BadMagic { pos: usize },
    #[error("unsupported format version {found:?} at byte {pos}")]
    UnsupportedVersion { pos: usize, found: String },
    #[error("file truncated at byte {pos}, need {needed} bytes")]
    Truncated { pos: usize, needed: usize },
    #[error(
        "header checksum mismatch at byte {pos} (stored {stored:#010x}, computed {computed:#010x})"
    )]
    HeaderChecksum {
        pos: usize,
        stored: u32,
        computed: u32,
    },
    #[error("invalid metadata at byte {pos}: {reason}")]
    Metadata { pos: usize, reason: String },
    #[error("inconsistent layout at byte {pos}: {reason}")]
    Inconsistent { pos: usize, reason: String },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    /// Byte offset the error refers to, when it refers to one.
    pub fn position(&self) -> Option<usize> {
        match self {
            Self::BadMagic { pos }
            | Self::UnsupportedVersion { pos, .. }
            | Self::Truncated { pos, .. }
            | Self::HeaderChecksum { pos, .. }
            | Self::Metadata { pos, .. }
            | Self::Inconsistent { pos, .. } => Some(*pos),
            Self::Invalid { .. } | Self::Io { .. } => None,
        }
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn f32s_to_le(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn le_to_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn check_version(v: u32, pos: usize) -> Result<(), FormatError> {
    if v != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            pos,
            found: v.to_string(),
        });
    }
    Ok(())
}
