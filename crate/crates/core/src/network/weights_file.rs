//! Binary weights file.
//!
//! Layout (little-endian): magic `ICLW`, `u32` version, `u32` layer count,
//! then per layer a `u32`-length-prefixed UTF-8 name, `u32` rank, the kernel
//! dimensions (`kh, kw, cin, cout` for 2-D layers, `k, cin, cout` for 1-D),
//! the kernel as `f32` in that order, and `cout` bias values as `f32`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::arch::ARCHITECTURE;
use super::model::{Layer, NetworkWeights};
use super::Real;
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"ICLW";

const MAX_NAME_LEN: u32 = 256;

fn put_u32(w: &mut dyn Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(r: &mut dyn Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_exact(r: &mut dyn Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("weights file truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

fn get_f32s(r: &mut dyn Read, n: usize, what: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Serializes weights as `f32`. Refuses to write non-finite parameters.
pub fn write_weights<T: Real>(weights: &NetworkWeights<T>, w: &mut dyn Write) -> Result<()> {
    if let Some(layer) = weights.first_non_finite() {
        return Err(Error::NumericInstability { layer: layer.to_string() });
    }
    w.write_all(&WEIGHTS_MAGIC)?;
    put_u32(w, NetworkWeights::<T>::VERSION)?;
    put_u32(w, weights.layers().len() as u32)?;
    for layer in weights.layers() {
        let name = layer.spec.name.as_bytes();
        put_u32(w, name.len() as u32)?;
        w.write_all(name)?;
        let dims = layer.spec.kernel_dims();
        put_u32(w, dims.len() as u32)?;
        for d in &dims {
            put_u32(w, *d as u32)?;
        }
        let mut buf = Vec::with_capacity((layer.kernel.len() + layer.bias.len()) * 4);
        for v in layer.kernel.iter().chain(layer.bias.iter()) {
            let x = v.to_f32().expect("finite");
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_weights(r: &mut dyn Read) -> Result<NetworkWeights<f32>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "magic")?;
    if magic != WEIGHTS_MAGIC {
        return Err(Error::Format("not a weights file (bad magic)".into()));
    }
    let version = get_u32(r, "version")?;
    if version != NetworkWeights::<f32>::VERSION {
        return Err(Error::Format(format!(
            "unsupported weights version {version} (expected {})",
            NetworkWeights::<f32>::VERSION
        )));
    }
    let count = get_u32(r, "layer count")? as usize;
    if count != ARCHITECTURE.len() {
        return Err(Error::Shape(format!("expected {} layers, file has {count}", ARCHITECTURE.len())));
    }
    let mut layers = Vec::with_capacity(count);
    for spec in ARCHITECTURE.iter() {
        let name_len = get_u32(r, "layer name length")?;
        if name_len > MAX_NAME_LEN {
            return Err(Error::Format(format!("layer name length {name_len} is implausible")));
        }
        let mut name = vec![0u8; name_len as usize];
        read_exact(r, &mut name, "layer name")?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("layer name is not UTF-8".into()))?;
        if name != spec.name {
            return Err(Error::Shape(format!("expected layer {}, found {name}", spec.name)));
        }
        let rank = get_u32(r, "rank")? as usize;
        let expected = spec.kernel_dims();
        if rank != expected.len() {
            return Err(Error::Shape(format!("layer {name}: rank {rank}, expected {}", expected.len())));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(get_u32(r, "dimension")? as usize);
        }
        if dims != expected {
            return Err(Error::Shape(format!("layer {name}: kernel dims {dims:?}, expected {expected:?}")));
        }
        let g = spec.geometry();
        let kernel = get_f32s(r, g.patch_len() * g.cout, "kernel")?;
        let bias = get_f32s(r, g.cout, "bias")?;
        if kernel.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("layer {name} contains non-finite values")));
        }
        layers.push(Layer {
            spec: *spec,
            kernel: Array2::from_shape_vec((g.patch_len(), g.cout), kernel).expect("sized"),
            bias: Array1::from(bias),
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last layer".into()));
    }
    NetworkWeights::from_layers(layers)
}

pub fn save_weights<T: Real>(weights: &NetworkWeights<T>, path: &Path) -> Result<()> {
    crate::io::atomic_write(path, |w| write_weights(weights, w))
}

pub fn load_weights(path: &Path) -> Result<NetworkWeights<f32>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_weights(&mut r)
}
