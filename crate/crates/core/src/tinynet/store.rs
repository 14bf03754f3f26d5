//! `SSVW` named-tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SSVW" | version: u32 | count: u32
//! count x { name_len: u16 | name | ndim: u8 | dims: u32 x ndim | offset: u64 }
//! data section: float32 LE payloads, each starting on an 8-byte boundary
//! ```
//!
//! Offsets are absolute from the start of the file. Padding bytes are zero and
//! the file ends right after the last payload.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSVW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::arg(format!(
                "tensor `{name}`: shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(NamedTensor { name, shape, data })
    }
}

/// Ordered collection of uniquely named float32 tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    tensors: Vec<NamedTensor>,
    index: HashMap<String, usize>,
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tensor: NamedTensor) -> Result<()> {
        if self.index.contains_key(&tensor.name) {
            return Err(Error::arg(format!("duplicate tensor name `{}`", tensor.name)));
        }
        if tensor.name.len() > u16::MAX as usize {
            return Err(Error::arg("tensor name longer than 65535 bytes"));
        }
        if tensor.shape.len() > u8::MAX as usize
            || tensor.shape.iter().any(|&d| d > u32::MAX as usize)
        {
            return Err(Error::arg(format!(
                "tensor `{}` shape does not fit the container",
                tensor.name
            )));
        }
        self.index.insert(tensor.name.clone(), self.tensors.len());
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut NamedTensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header_len: usize = 12
            + self
                .tensors
                .iter()
                .map(|t| 2 + t.name.len() + 1 + 4 * t.shape.len() + 8)
                .sum::<usize>();
        let mut offsets = Vec::with_capacity(self.tensors.len());
        let mut cursor = header_len;
        for t in &self.tensors {
            cursor = align8(cursor);
            offsets.push(cursor);
            cursor += 4 * t.data.len();
        }

        let mut out = Vec::with_capacity(cursor);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (t, &offset) in self.tensors.iter().zip(&offsets) {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.extend_from_slice(&(offset as u64).to_le_bytes());
        }
        debug_assert_eq!(out.len(), header_len);
        for (t, &offset) in self.tensors.iter().zip(&offsets) {
            out.resize(offset, 0);
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("not an SSVW tensor store (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported SSVW version {version}")));
        }
        let count = r.u32()? as usize;
        let mut headers = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::format("tensor name is not UTF-8"))?
                .to_owned();
            let ndim = r.u8()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let offset = r.u64()?;
            headers.push((name, shape, offset));
        }
        let header_end = r.pos;

        let mut store = TensorStore::new();
        for (name, shape, offset) in headers {
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::format(format!("tensor `{name}` shape overflows")))?;
            let start = usize::try_from(offset)
                .map_err(|_| Error::format(format!("tensor `{name}` offset too large")))?;
            if start % 8 != 0 || start < header_end {
                return Err(Error::format(format!(
                    "tensor `{name}` has invalid data offset {start}"
                )));
            }
            let end = numel
                .checked_mul(4)
                .and_then(|len| start.checked_add(len))
                .filter(|&end| end <= bytes.len())
                .ok_or_else(|| Error::format(format!("tensor `{name}` data is truncated")))?;
            let data = bytes[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            store
                .insert(NamedTensor { name, shape, data })
                .map_err(|e| Error::format(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn align8(n: usize) -> usize {
    n.div_ceil(8) * 8
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("tensor store header is truncated"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
