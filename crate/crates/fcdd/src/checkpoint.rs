//! Little-endian binary checkpoints.
//!
//! ```text
//! magic    8 bytes  "FCDDCKPT"
//! version  u32      1
//! count    u32      number of tensors
//! per tensor:
//!   name_len u32, name (UTF-8)
//!   ndim     u32, dims (u64 each)
//!   data     f64 each, row-major
//! ```

use std::fs;
use std::path::Path;

use fcdd_core::model::FcnParams;
use fcdd_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FCDDCKPT";
pub const VERSION: u32 = 1;

pub fn encode(params: &FcnParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let tensors = params.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.path, "truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
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

/// Parses a checkpoint and checks it against the network architecture.
pub fn decode(bytes: &[u8], path: &Path) -> Result<FcnParams> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    let mut names = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name =
            std::str::from_utf8(r.take(len)?).map_err(|_| Error::format(path, "tensor name is not UTF-8"))?.to_string();
        let ndim = r.u32()? as usize;
        if ndim > 8 {
            return Err(Error::format(path, format!("tensor {name} has rank {ndim}")));
        }
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::format(path, "tensor too large"))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push(Tensor::new(&shape, data).map_err(|e| Error::format(path, e.to_string()))?);
        names.push(name);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after last tensor"));
    }
    let params =
        FcnParams::from_tensors(tensors).map_err(|e| Error::format(path, format!("architecture mismatch: {e}")))?;
    for ((expected, _), got) in params.named_tensors().iter().zip(&names) {
        if expected != got {
            return Err(Error::format(path, format!("expected tensor {expected}, found {got}")));
        }
    }
    Ok(params)
}

/// Writes via a temporary file and rename so readers never see a partial file.
pub fn save(path: &Path, params: &FcnParams) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, encode(params)).map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

pub fn load(path: &Path) -> Result<FcnParams> {
    decode(&fs::read(path).map_err(Error::io(path))?, path)
}
