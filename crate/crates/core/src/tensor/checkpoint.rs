//! Binary parameter checkpoints.
//!
//! Layout, all integers and floats little-endian:
//! `"MDSD"`, version `u16`, layer count `u32`, then per layer the kind byte,
//! the weight shape as `u32` dims (2 for dense, 4 for conv), the weights and
//! then the biases as `f64`.

use std::io::{Read, Write};

use super::layer::LayerKind;
use super::params::{LayerParams, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MDSD";
pub const CHECKPOINT_VERSION: u16 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::io("<checkpoint stream>", e)
}

/// Writes the layers of several stores, in order, as one layer list.
pub fn write_layers<W: Write>(w: &mut W, stores: &[&ParamStore]) -> Result<()> {
    let count: usize = stores.iter().map(|s| s.layers.len()).sum();
    w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(count as u32).to_le_bytes()).map_err(io_err)?;
    for layer in stores.iter().flat_map(|s| &s.layers) {
        let mut buf = Vec::with_capacity(1 + 16 + 8 * (layer.weights.len() + layer.biases.len()));
        buf.push(layer.kind.tag());
        for &d in &layer.weight_shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in layer.weights.iter().chain(&layer.biases) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err)?;
    }
    Ok(())
}

pub(crate) fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(b)
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw).map_err(io_err)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Reads the flat layer list written by [`write_layers`].
pub fn read_layers<R: Read>(r: &mut R) -> Result<Vec<LayerParams>> {
    let bad = |d: String| Error::format("<checkpoint stream>", d);
    let magic: [u8; 4] = read_exact(r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(read_exact(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(read_exact(r)?) as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let [tag] = read_exact::<_, 1>(r)?;
        let kind = LayerKind::from_tag(tag).ok_or_else(|| bad(format!("layer {i}: kind {tag}")))?;
        let mut shape = Vec::with_capacity(kind.weight_rank());
        for _ in 0..kind.weight_rank() {
            shape.push(u32::from_le_bytes(read_exact(r)?) as usize);
        }
        let n: usize = shape.iter().product();
        if n == 0 || n > 1 << 28 {
            return Err(bad(format!("layer {i}: implausible shape {shape:?}")));
        }
        let weights = read_f64s(r, n)?;
        let biases = read_f64s(r, shape[0])?;
        layers.push(LayerParams {
            kind,
            weight_shape: shape,
            weights,
            biases,
        });
    }
    Ok(layers)
}
