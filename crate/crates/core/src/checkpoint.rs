//! Binary encoder checkpoints.
//!
//! Layout (little-endian): `CGP1`, arch tag (u8), input/hidden/output dims
//! (3×u64), then every tensor in `EncoderParams::tensors()` order as
//! `rows u64, cols u64, rows·cols f32`.

use std::fs;
use std::path::Path;

use crate::autodiff::Matrix;
use crate::encoder::{layout, Arch, Dims, EncoderParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CGP1";

pub fn encode_checkpoint(params: &EncoderParams) -> Vec<u8> {
    let d = params.dims();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(params.arch().tag());
    for v in [d.input, d.hidden, d.output] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for t in params.tensors() {
        out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        for v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
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
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("dimension {v} too large")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<EncoderParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let tag = r.take(1)?[0];
    let arch = Arch::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown arch tag {tag}")))?;
    let dims = Dims::new(r.u64()?, r.u64()?, r.u64()?);
    let (wl, bl) = layout(arch, dims);
    let mut read_tensor = |expected: (usize, usize)| -> Result<Matrix<f32>> {
        let shape = (r.u64()?, r.u64()?);
        if shape != expected {
            return Err(Error::Format(format!(
                "tensor shape {shape:?}, expected {expected:?}"
            )));
        }
        let payload = r.take(shape.0 * shape.1 * 4)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(shape.0, shape.1, data)
    };
    let weights = wl.into_iter().map(&mut read_tensor).collect::<Result<Vec<_>>>()?;
    let biases = bl.into_iter().map(&mut read_tensor).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    EncoderParams::from_parts(arch, dims, weights, biases)
}

pub fn save_checkpoint(params: &EncoderParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<EncoderParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes)
}
