use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{container, FormatError, FORMAT_VERSION, WEIGHTS_TAG};
use crate::Tensor;

/// Named f32 tensors plus the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub format_version: u32,
    /// Architecture description, stored verbatim.
    pub arch: serde_json::Value,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl WeightBundle {
    pub fn new(arch: serde_json::Value, tensors: Vec<(String, Tensor<f32>)>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            arch,
            tensors,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn payload_len(&self) -> usize {
        self.tensors.iter().map(|(_, t)| 4 * t.len()).sum()
    }
}

/// One index entry of the metadata block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset relative to the start of the payload.
    pub offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    arch: serde_json::Value,
    tensors: Vec<TensorEntry>,
    payload_len: usize,
}

pub fn write_bundle(bundle: &WeightBundle) -> Result<Vec<u8>, FormatError> {
    let invalid = |reason: String| FormatError::Invalid {
        what: "weight bundle",
        reason,
    };
    if bundle.format_version != FORMAT_VERSION {
        return Err(invalid(format!(
            "format_version {} (only {FORMAT_VERSION} is written)",
            bundle.format_version
        )));
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(bundle.tensors.len());
    let mut offset = 0;
    for (name, t) in &bundle.tensors {
        if !seen.insert(name.as_str()) {
            return Err(invalid(format!("duplicate tensor name {name:?}")));
        }
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += 4 * t.len();
    }
    let meta = Meta {
        format_version: bundle.format_version,
        arch: bundle.arch.clone(),
        tensors: entries,
        payload_len: offset,
    };
    let meta = serde_json::to_vec(&meta).map_err(|e| invalid(e.to_string()))?;
    let mut payload = Vec::with_capacity(offset);
    for (_, t) in &bundle.tensors {
        super::f32s_to_le(t.data(), &mut payload);
    }
    Ok(container::write(WEIGHTS_TAG, &meta, &payload))
}

pub fn read_bundle(bytes: &[u8]) -> Result<WeightBundle, FormatError> {
    let parsed = container::read(WEIGHTS_TAG, bytes)?;
    let meta: Meta = container::parse_meta(parsed.meta)?;
    super::check_version(meta.format_version, 20)?;
    let base = parsed.payload_offset;
    let inconsistent = |pos: usize, reason: String| FormatError::Inconsistent { pos, reason };

    let mut seen = HashSet::new();
    let mut expected = 0usize;
    let mut sizes = Vec::with_capacity(meta.tensors.len());
    for e in &meta.tensors {
        if !seen.insert(e.name.as_str()) {
            return Err(inconsistent(
                20,
                format!("duplicate tensor name {:?}", e.name),
            ));
        }
        if e.offset != expected {
            return Err(inconsistent(
                base.saturating_add(e.offset),
                format!(
                    "tensor {:?} at offset {}, expected {expected}",
                    e.name, e.offset
                ),
            ));
        }
        let bytes_len = e
            .shape
            .iter()
            .try_fold(
                4usize,
                |acc, &d| if d == 0 { None } else { acc.checked_mul(d) },
            )
            .ok_or_else(|| {
                inconsistent(
                    base + expected,
                    format!("tensor {:?} has invalid shape {:?}", e.name, e.shape),
                )
            })?;
        sizes.push(bytes_len);
        expected = expected
            .checked_add(bytes_len)
            .ok_or_else(|| inconsistent(base, "payload size overflows".into()))?;
    }
    if meta.payload_len != expected {
        return Err(inconsistent(
            base.saturating_add(expected),
            format!(
                "declared payload_len {} but tensors need {expected}",
                meta.payload_len
            ),
        ));
    }
    container::check_payload_len(&parsed, expected)?;

    let mut tensors = Vec::with_capacity(meta.tensors.len());
    for (e, len) in meta.tensors.into_iter().zip(sizes) {
        let data = super::le_to_f32s(&parsed.payload[e.offset..e.offset + len]);
        let t = Tensor::from_vec(e.shape, data).expect("shape checked above");
        tensors.push((e.name, t));
    }
    Ok(WeightBundle {
        format_version: meta.format_version,
        arch: meta.arch,
        tensors,
    })
}

pub fn save_bundle(path: impl AsRef<Path>, bundle: &WeightBundle) -> Result<(), FormatError> {
    super::write_file(path.as_ref(), &write_bundle(bundle)?)
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<WeightBundle, FormatError> {
    read_bundle(&super::read_file(path.as_ref())?)
}
