//! CIFAR-10 binary batch format.
//!
//! A batch is a flat sequence of 3073-byte records: one label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes, each plane row-major over a
//! 32x32 grid.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stimgen::SourceImage;

pub const SIDE: usize = 32;
pub const PIXELS: usize = SIDE * SIDE * 3;
pub const RECORD_LEN: usize = PIXELS + 1;
pub const NUM_CLASSES: u8 = 10;

/// Number of whole records in `bytes`, or a format error when the buffer is
/// empty or ends inside a record.
pub fn record_count(bytes: &[u8]) -> Result<usize> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD_LEN) {
        return Err(Error::format(format!(
            "CIFAR-10 batch length {} is not a positive multiple of {RECORD_LEN}",
            bytes.len()
        )));
    }
    Ok(bytes.len() / RECORD_LEN)
}

/// Decodes the records at `indices` from an in-memory batch.
pub fn decode_records(bytes: &[u8], indices: &[usize]) -> Result<Vec<(SourceImage, u8)>> {
    let count = record_count(bytes)?;
    indices
        .iter()
        .map(|&idx| {
            if idx >= count {
                return Err(Error::format(format!(
                    "record index {idx} out of range ({count} records)"
                )));
            }
            let rec = &bytes[idx * RECORD_LEN..(idx + 1) * RECORD_LEN];
            let label = rec[0];
            if label >= NUM_CLASSES {
                return Err(Error::format(format!(
                    "record {idx} has label {label}, expected 0..=9"
                )));
            }
            let data = rec[1..].iter().map(|&b| b as f32 / 255.0).collect();
            Ok((SourceImage::new(SIDE, SIDE, data)?, label))
        })
        .collect()
}

/// Reads the records at `indices` from a batch file.
pub fn load_cifar10(path: &Path, indices: &[usize]) -> Result<Vec<(SourceImage, u8)>> {
    let bytes = fs::read(path)?;
    decode_records(&bytes, indices)
}

/// Encodes 32x32 images as a batch; pixel bytes are `round(v * 255)`.
pub fn encode_records(records: &[(SourceImage, u8)]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(records.len() * RECORD_LEN);
    for (img, label) in records {
        if img.width() != SIDE || img.height() != SIDE {
            return Err(Error::arg(format!(
                "CIFAR-10 records are 32x32, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        if *label >= NUM_CLASSES {
            return Err(Error::arg(format!("label {label} out of range")));
        }
        out.push(*label);
        out.extend(img.data().iter().map(|&v| (v * 255.0).round() as u8));
    }
    Ok(out)
}
