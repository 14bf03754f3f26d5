//! On-disk activation trace cache.
//!
//! Entries are keyed by model fingerprint, image id, tagging configuration and
//! reduction mode, so re-analysis with new thresholds skips inference.
//!
//! File layout (little-endian): `"SSVT" | version: u32 | traces: u32 |
//! len: u32 | traces x { layer: u32 | channel: u32 | len x f64 }`.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stimgen::TaggingConfig;
use crate::tinynet::{ActivationTrace, FilterId, ReductionMode};

const MAGIC: &[u8; 4] = b"SSVT";
const VERSION: u32 = 1;

pub fn cache_key(fingerprint: &str, image_id: usize, tagging: &TaggingConfig, mode: ReductionMode) -> String {
    let mut h = Sha256::new();
    h.update(fingerprint.as_bytes());
    h.update([0]);
    h.update((image_id as u64).to_le_bytes());
    h.update(serde_json::to_vec(tagging).expect("tagging configs serialize"));
    h.update([0]);
    h.update(mode.as_str().as_bytes());
    hex::encode(&h.finalize()[..16])
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.trace"))
}

pub fn encode(traces: &[ActivationTrace]) -> Vec<u8> {
    let len = traces.first().map_or(0, |t| t.values.len());
    let mut out = Vec::with_capacity(16 + traces.len() * (8 + 8 * len));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(traces.len() as u32).to_le_bytes());
    out.extend_from_slice(&(len as u32).to_le_bytes());
    for t in traces {
        out.extend_from_slice(&t.filter.layer.to_le_bytes());
        out.extend_from_slice(&t.filter.channel.to_le_bytes());
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], mode: ReductionMode) -> Result<Vec<ActivationTrace>> {
    let corrupt = || Error::format("trace cache entry is corrupt");
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(corrupt());
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(corrupt());
    }
    let (count, len) = (word(8) as usize, word(12) as usize);
    let stride = 8 + 8 * len;
    if bytes.len() != 16 + count * stride {
        return Err(corrupt());
    }
    Ok((0..count)
        .map(|k| {
            let base = 16 + k * stride;
            let values = bytes[base + 8..base + stride]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ActivationTrace {
                filter: FilterId::new(word(base), word(base + 4)),
                values,
                mode,
            }
        })
        .collect())
}
