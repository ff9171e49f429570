//! Shared container layout for both file formats:
//!
//! ```text
//! offset  size      field
//! 0       4         family tag, "FSLW" (weights) or "FSLE" (embeddings)
//! 4       4         version as ASCII digits, "0001"
//! 8       8         u64 LE  metadata length M
//! 16      4         u32 LE  CRC-32 (IEEE) over bytes [8, 16) ++ metadata
//! 20      M         UTF-8 JSON metadata
//! 20+M    ..        zero padding up to the next multiple of 64
//! P       L         raw little-endian payload, L declared in the metadata
//! ```
//!
//! The file ends exactly at `P + L`.

use super::FormatError;

pub const VERSION: &[u8; 4] = b"0001";
pub const ALIGN: usize = 64;
const HEADER: usize = 20;

pub(crate) fn payload_offset(meta_len: usize) -> usize {
    (HEADER + meta_len).div_ceil(ALIGN) * ALIGN
}

fn crc(len_bytes: &[u8], meta: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(len_bytes);
    h.update(meta);
    h.finalize()
}

pub(crate) fn write(tag: &[u8; 4], meta: &[u8], payload: &[u8]) -> Vec<u8> {
    let start = payload_offset(meta.len());
    let mut out = Vec::with_capacity(start + payload.len());
    out.extend_from_slice(tag);
    out.extend_from_slice(VERSION);
    let len_bytes = (meta.len() as u64).to_le_bytes();
    out.extend_from_slice(&len_bytes);
    out.extend_from_slice(&crc(&len_bytes, meta).to_le_bytes());
    out.extend_from_slice(meta);
    out.resize(start, 0);
    out.extend_from_slice(payload);
    out
}

/// A parsed container: metadata bytes and the payload region (everything
/// after the padding). Payload length is checked by the caller against the
/// metadata.
pub(crate) struct Parsed<'a> {
    pub meta: &'a [u8],
    pub payload: &'a [u8],
    pub payload_offset: usize,
}

pub(crate) fn read<'a>(tag: &[u8; 4], bytes: &'a [u8]) -> Result<Parsed<'a>, FormatError> {
    for (i, &expect) in tag.iter().enumerate() {
        match bytes.get(i) {
            None => {
                return Err(FormatError::Truncated {
                    pos: bytes.len(),
                    needed: HEADER,
                })
            }
            Some(&b) if b != expect => return Err(FormatError::BadMagic { pos: i }),
            _ => {}
        }
    }
    if bytes.len() < HEADER {
        return Err(FormatError::Truncated {
            pos: bytes.len(),
            needed: HEADER,
        });
    }
    if &bytes[4..8] != VERSION {
        return Err(FormatError::UnsupportedVersion {
            pos: 4,
            found: String::from_utf8_lossy(&bytes[4..8]).into_owned(),
        });
    }
    let len_bytes = &bytes[8..16];
    let meta_len = u64::from_le_bytes(len_bytes.try_into().expect("8 bytes"));
    let stored_crc = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes"));
    let meta_end = usize::try_from(meta_len)
        .ok()
        .and_then(|m| m.checked_add(HEADER))
        .filter(|&end| end <= bytes.len())
        .ok_or(FormatError::Truncated {
            pos: bytes.len(),
            needed: meta_len
                .saturating_add(HEADER as u64)
                .min(usize::MAX as u64) as usize,
        })?;
    let meta = &bytes[HEADER..meta_end];
    let computed = crc(len_bytes, meta);
    if computed != stored_crc {
        return Err(FormatError::HeaderChecksum {
            pos: 16,
            stored: stored_crc,
            computed,
        });
    }
    let start = payload_offset(meta.len());
    if bytes.len() < start {
        return Err(FormatError::Truncated {
            pos: bytes.len(),
            needed: start,
        });
    }
    if let Some(i) = bytes[meta_end..start].iter().position(|&b| b != 0) {
        return Err(FormatError::Inconsistent {
            pos: meta_end + i,
            reason: "non-zero header padding".into(),
        });
    }
    Ok(Parsed {
        meta,
        payload: &bytes[start..],
        payload_offset: start,
    })
}

/// Confirms the payload region holds exactly `declared` bytes.
pub(crate) fn check_payload_len(parsed: &Parsed<'_>, declared: usize) -> Result<(), FormatError> {
    let have = parsed.payload.len();
    if have < declared {
        return Err(FormatError::Truncated {
            pos: parsed.payload_offset + have,
            needed: parsed.payload_offset + declared,
        });
    }
    if have > declared {
        return Err(FormatError::Inconsistent {
            pos: parsed.payload_offset + declared,
            reason: format!("{} trailing bytes after payload", have - declared),
        });
    }
    Ok(())
}

pub(crate) fn parse_meta<T: serde::de::DeserializeOwned>(meta: &[u8]) -> Result<T, FormatError> {
    serde_json::from_slice(meta).map_err(|e| FormatError::Metadata {
        pos: HEADER + json_error_offset(meta, e.line(), e.column()),
        reason: e.to_string(),
    })
}

fn json_error_offset(meta: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = meta
        .split(|&b| b == b'\n')
        .take(line - 1)
        .map(|l| l.len() + 1)
        .sum();
    (line_start + column.saturating_sub(1)).min(meta.len())
}
