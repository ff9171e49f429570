use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{container, FormatError, EMBEDDINGS_TAG, FORMAT_VERSION};

/// Labelled feature vectors of one width, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingDataset {
    dim: usize,
    labels: Vec<u32>,
    data: Vec<f32>,
    /// Free-form origin notes (teacher id, preprocessing, generator seed...).
    pub attrs: BTreeMap<String, String>,
}

impl EmbeddingDataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    /// Builds from parallel label and flat vector arrays.
    pub fn from_parts(dim: usize, labels: Vec<u32>, data: Vec<f32>) -> Result<Self, FormatError> {
        if data.len() != labels.len() * dim {
            return Err(FormatError::Invalid {
                what: "embedding dataset",
                reason: format!(
                    "{} values for {} items of dim {dim}",
                    data.len(),
                    labels.len()
                ),
            });
        }
        Ok(Self {
            dim,
            labels,
            data,
            attrs: BTreeMap::new(),
        })
    }

    pub fn push(&mut self, label: u32, vector: &[f32]) -> Result<(), FormatError> {
        if vector.len() != self.dim {
            return Err(FormatError::Invalid {
                what: "embedding dataset",
                reason: format!(
                    "vector of length {} in dataset of dim {}",
                    vector.len(),
                    self.dim
                ),
            });
        }
        self.labels.push(label);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f32])> + '_ {
        (0..self.len()).map(|i| (self.labels[i], self.vector(i)))
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<u32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Item indices grouped by label, labels ascending.
    pub fn by_class(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut m: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            m.entry(l).or_default().push(i);
        }
        m
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    dim: usize,
    count: usize,
    #[serde(default)]
    attrs: BTreeMap<String, String>,
    payload_len: usize,
}

pub fn write_embeddings(ds: &EmbeddingDataset) -> Result<Vec<u8>, FormatError> {
    let payload_len = 4 * ds.labels.len() + 4 * ds.data.len();
    let meta = Meta {
        format_version: FORMAT_VERSION,
        dim: ds.dim,
        count: ds.labels.len(),
        attrs: ds.attrs.clone(),
        payload_len,
    };
    let meta = serde_json::to_vec(&meta).map_err(|e| FormatError::Invalid {
        what: "embedding dataset",
        reason: e.to_string(),
    })?;
    let mut payload = Vec::with_capacity(payload_len);
    for l in &ds.labels {
        payload.extend_from_slice(&l.to_le_bytes());
    }
    super::f32s_to_le(&ds.data, &mut payload);
    Ok(container::write(EMBEDDINGS_TAG, &meta, &payload))
}

pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingDataset, FormatError> {
    let parsed = container::read(EMBEDDINGS_TAG, bytes)?;
    let meta: Meta = container::parse_meta(parsed.meta)?;
    super::check_version(meta.format_version, 20)?;
    let base = parsed.payload_offset;
    let expected = meta
        .dim
        .checked_add(1)
        .and_then(|per| per.checked_mul(meta.count))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::Inconsistent {
            pos: base,
            reason: format!("count {} x dim {} overflows", meta.count, meta.dim),
        })?;
    if meta.payload_len != expected {
        return Err(FormatError::Inconsistent {
            pos: base.saturating_add(meta.payload_len.min(expected)),
            reason: format!(
                "declared payload_len {} but {} items of dim {} need {expected}",
                meta.payload_len, meta.count, meta.dim
            ),
        });
    }
    container::check_payload_len(&parsed, expected)?;
    let (label_bytes, vec_bytes) = parsed.payload.split_at(4 * meta.count);
    let labels = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(EmbeddingDataset {
        dim: meta.dim,
        labels,
        data: super::le_to_f32s(vec_bytes),
        attrs: meta.attrs,
    })
}

pub fn save_embeddings(path: impl AsRef<Path>, ds: &EmbeddingDataset) -> Result<(), FormatError> {
    super::write_file(path.as_ref(), &write_embeddings(ds)?)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingDataset, FormatError> {
    read_embeddings(&super::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_round_trips() {
        let ds = EmbeddingDataset::new(8);
        let bytes = write_embeddings(&ds).unwrap();
        assert_eq!(&bytes[..8], b"FSLE0001");
        assert_eq!(bytes.len() % 64, 0);
        assert_eq!(read_embeddings(&bytes).unwrap(), ds);
    }

    #[test]
    fn single_item_layout() {
        let mut ds = EmbeddingDataset::new(2);
        ds.push(7, &[1.0, -2.5]).unwrap();
        let bytes = write_embeddings(&ds).unwrap();
        let p = bytes.len() - 12;
        assert_eq!(p % 64, 0);
        assert_eq!(&bytes[p..p + 4], &7u32.to_le_bytes());
        assert_eq!(&bytes[p + 4..p + 8], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[p + 8..], &(-2.5f32).to_le_bytes());
        assert_eq!(read_embeddings(&bytes).unwrap(), ds);
    }

    #[test]
    fn wrong_width_push_rejected() {
        let mut ds = EmbeddingDataset::new(3);
        assert!(ds.push(0, &[1.0]).is_err());
        assert!(EmbeddingDataset::from_parts(2, vec![0, 1], vec![0.0; 3]).is_err());
    }
}
