//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            4 bytes  "DRPN"
//! version          u32      1
//! dtype            u8       1 = f32, 2 = f64
//! relu_before_skip u8       0 | 1
//! reserved         u16      0
//! layers           u32      L
//! bands            u32      S
//! hidden_channels  u32
//! filter sizes     L × (u32 h, u32 w)
//! param_count      u64      must equal the count implied by the header
//! payload          per layer: weights (c_out·c_in·h·w), then bias (c_out)
//! ```

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{NetworkParams, NetworkSpec};
use crate::error::{Error, Result};
use crate::real::Real;

const MAGIC: &[u8; 4] = b"DRPN";
const VERSION: u32 = 1;

pub fn write_checkpoint<T: Real>(params: &NetworkParams<T>, spec: &NetworkSpec, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(64 + params.param_count() * T::BYTES);
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION)?;
    buf.write_u8(T::DTYPE)?;
    buf.write_u8(spec.relu_before_skip as u8)?;
    buf.write_u16::<LittleEndian>(0)?;
    buf.write_u32::<LittleEndian>(spec.layers as u32)?;
    buf.write_u32::<LittleEndian>(spec.bands as u32)?;
    buf.write_u32::<LittleEndian>(spec.hidden_channels as u32)?;
    for &(h, w) in &spec.filter_sizes {
        buf.write_u32::<LittleEndian>(h as u32)?;
        buf.write_u32::<LittleEndian>(w as u32)?;
    }
    buf.write_u64::<LittleEndian>(params.param_count() as u64)?;
    for v in params.flatten() {
        v.write_le(&mut buf);
    }
    out.write_all(&buf)
}

pub fn save_checkpoint<T: Real>(params: &NetworkParams<T>, spec: &NetworkSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    params.check_spec(spec)?;
    let mut bytes = Vec::new();
    write_checkpoint(params, spec, &mut bytes).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<(NetworkParams<T>, NetworkSpec)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes).map_err(|reason| Error::format(path, reason))
}

/// Parses a checkpoint image. Values stored in another precision are converted.
pub fn read_checkpoint<T: Real>(bytes: &[u8]) -> std::result::Result<(NetworkParams<T>, NetworkSpec), String> {
    let mut cur = Cursor::new(bytes);
    let truncated = |what: &str| format!("checkpoint truncated while reading {what}");

    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    if &magic != MAGIC {
        return Err(format!("not a checkpoint (magic {magic:?})"));
    }
    let version = cur.read_u32::<LittleEndian>().map_err(|_| truncated("version"))?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let dtype = cur.read_u8().map_err(|_| truncated("dtype"))?;
    let relu = cur.read_u8().map_err(|_| truncated("flags"))?;
    cur.read_u16::<LittleEndian>().map_err(|_| truncated("flags"))?;
    let mut header = [0u32; 3];
    for v in &mut header {
        *v = cur.read_u32::<LittleEndian>().map_err(|_| truncated("header"))?;
    }
    let [layers, bands, hidden] = header.map(|v| v as usize);
    if layers > 4096 {
        return Err(format!("implausible layer count {layers}"));
    }
    let mut filter_sizes = Vec::with_capacity(layers);
    for _ in 0..layers {
        let h = cur.read_u32::<LittleEndian>().map_err(|_| truncated("filter sizes"))? as usize;
        let w = cur.read_u32::<LittleEndian>().map_err(|_| truncated("filter sizes"))? as usize;
        filter_sizes.push((h, w));
    }
    let spec = NetworkSpec {
        layers,
        bands,
        hidden_channels: hidden,
        filter_sizes,
        relu_before_skip: match relu {
            0 => false,
            1 => true,
            other => return Err(format!("bad relu flag {other}")),
        },
    };
    spec.validate().map_err(|e| e.to_string())?;

    let count = cur.read_u64::<LittleEndian>().map_err(|_| truncated("parameter count"))? as usize;
    if count != spec.param_count() {
        return Err(format!(
            "header declares {count} parameters, the network shape implies {}",
            spec.param_count()
        ));
    }

    let rest = &bytes[cur.position() as usize..];
    let values: Vec<T> = match dtype {
        1 => decode::<f32, T>(rest, count)?,
        2 => decode::<f64, T>(rest, count)?,
        other => return Err(format!("unknown dtype tag {other}")),
    };
    let mut params = NetworkParams::zeros(&spec).map_err(|e| e.to_string())?;
    params.unflatten(&values).map_err(|e| e.to_string())?;
    Ok((params, spec))
}

fn decode<S: Real, T: Real>(payload: &[u8], count: usize) -> std::result::Result<Vec<T>, String> {
    let need = count * S::BYTES;
    if payload.len() < need {
        return Err(format!(
            "checkpoint truncated: payload has {} bytes, needs {need}",
            payload.len()
        ));
    }
    if payload.len() > need {
        return Err(format!("{} trailing bytes after payload", payload.len() - need));
    }
    Ok(payload
        .chunks_exact(S::BYTES)
        .map(|c| T::from_f64_lossy(S::read_le(c).as_f64()))
        .collect())
}
