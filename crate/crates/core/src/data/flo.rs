//! Middlebury `.flo` files: `202021.25` as f32 LE, i32 LE width, i32 LE
//! height, then interleaved `(u, v)` f32 LE pairs in row-major order.

use std::fs;
use std::path::Path;

use super::FlowField;
use crate::error::{Error, Result};

pub const FLO_MAGIC: f32 = 202021.25;

pub fn encode_flo(flow: &FlowField) -> Result<Vec<u8>> {
    if !flow.is_finite() {
        return Err(Error::contract("write_flo", "flow contains non-finite values"));
    }
    let n = flow.pixels();
    let mut out = Vec::with_capacity(12 + 8 * n);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for i in 0..n {
        let (u, v) = flow.at(i);
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField> {
    let word = |at: usize| -> Result<[u8; 4]> {
        bytes
            .get(at..at + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or_else(|| Error::format(path, at as u64, "truncated header"))
    };
    let magic = f32::from_le_bytes(word(0)?);
    if magic != FLO_MAGIC {
        return Err(Error::format(path, 0, format!("bad magic {magic}, expected {FLO_MAGIC}")));
    }
    let width = i32::from_le_bytes(word(4)?);
    let height = i32::from_le_bytes(word(8)?);
    if width <= 0 || height <= 0 {
        return Err(Error::format(path, 4, format!("invalid extents {width}×{height}")));
    }
    let (w, h) = (width as usize, height as usize);
    let n = w * h;
    let need = 12 + 8 * n;
    if bytes.len() < need {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated payload: expected {need} bytes, found {}", bytes.len()),
        ));
    }
    if bytes.len() > need {
        return Err(Error::format(path, need as u64, "trailing bytes after payload"));
    }
    let mut data = vec![0.0f32; 2 * n];
    for (i, c) in bytes[12..need].chunks_exact(8).enumerate() {
        data[i] = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        data[n + i] = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
    }
    FlowField::new(h, w, data)
}

pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    let bytes = encode_flo(flow)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, path)
}
