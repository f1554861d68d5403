//! Binary checkpoint: little-endian
//!
//! ```text
//! "JRCK" | version u32 | count u32 |
//!   count × { name_len u32 | name UTF-8 | ndim u32 | dims u32×ndim | data f32×numel }
//! ```
//!
//! Trainable parameters and buffers share the table; which is which follows
//! from the model layout.

use std::io::{Read, Write};

use crate::error::{NeuralError, Result};
use crate::layers::{export_state, import_state, Layer, NamedArray, ParamKind};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"JRCK";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(model: &dyn Layer<T>, mut out: W) -> Result<()> {
    let state = export_state(model);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(state.len() as u32).to_le_bytes())?;
    for a in &state {
        out.write_all(&(a.name.len() as u32).to_le_bytes())?;
        out.write_all(a.name.as_bytes())?;
        out.write_all(&(a.shape.len() as u32).to_le_bytes())?;
        for &d in &a.shape {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &a.data {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the raw table. Kinds are reported as trainable; [`load_into`]
/// matches by name so the distinction is not needed.
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<NamedArray>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NeuralError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut input)? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = read_u32(&mut input)? as usize;
        if len > 4096 {
            return Err(NeuralError::Checkpoint(format!("implausible name length {len}")));
        }
        let mut name = vec![0u8; len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        let ndim = read_u32(&mut input)? as usize;
        if ndim > 8 {
            return Err(NeuralError::Checkpoint(format!("{name}: implausible rank {ndim}")));
        }
        let shape = (0..ndim).map(|_| read_u32(&mut input).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let mut raw = vec![0u8; numel * 4];
        input.read_exact(&mut raw)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        out.push(NamedArray { name, shape, kind: ParamKind::Trainable, data });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(NeuralError::Checkpoint("trailing bytes after parameter table".into()));
    }
    Ok(out)
}

pub fn load_into<T: Scalar, R: Read>(model: &mut dyn Layer<T>, input: R) -> Result<()> {
    import_state(model, &read_checkpoint(input)?)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
