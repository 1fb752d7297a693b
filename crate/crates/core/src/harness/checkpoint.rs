//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"SALCKPT1"  u32 version  u32 entry_count
//! per entry:   u32 name_len  name (UTF-8)  u8 trainable
//!              u32 ndim  u64 dim * ndim  f64 value * product(dims)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SalError};
use crate::params::{ParameterSet, Tensor};

pub const MAGIC: &[u8; 8] = b"SALCKPT1";
pub const VERSION: u32 = 1;

pub fn encode(params: &ParameterSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.num_values() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for e in params.entries() {
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.push(e.trainable as u8);
        let shape = e.tensor.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in e.tensor.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| SalError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParameterSet> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(SalError::Checkpoint("bad magic bytes".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(SalError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = c.u32()?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let name_len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| SalError::Checkpoint("entry name is not UTF-8".into()))?
            .to_string();
        let trainable = match c.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(SalError::Checkpoint(format!("bad trainable flag {b}"))),
        };
        let ndim = c.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(16));
        for _ in 0..ndim {
            shape.push(c.u64()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| SalError::Checkpoint(format!("entry {name:?} has an impossible shape")))?;
        let raw = c.take(n * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        params
            .push(name, Tensor::new(shape, values)?, trainable)
            .map_err(|e| SalError::Checkpoint(e.to_string()))?;
    }
    if c.pos != bytes.len() {
        return Err(SalError::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(params)
}

pub fn save(params: &ParameterSet, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| SalError::io(path, e))?;
    f.write_all(&encode(params)).map_err(|e| SalError::io(path, e))
}

pub fn load(path: &Path) -> Result<ParameterSet> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| SalError::io(path, e))?;
    decode(&bytes)
}
