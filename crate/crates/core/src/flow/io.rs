//! Middlebury `.flo` layout: `PIEH`, little-endian u32 width and height, then
//! interleaved little-endian f32 `(u, v)` in row-major order. Invalid pixels
//! are written as `(1e10, 1e10)`; any `u > 1e9` reads back as invalid.

use std::path::Path;

use super::field::FlowField;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PIEH";
const UNKNOWN: f32 = 1e10;
const UNKNOWN_THRESHOLD: f32 = 1e9;

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.vectors().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(flow.width() as u32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as u32).to_le_bytes());
    for (uv, &ok) in flow.vectors().iter().zip(flow.validity()) {
        let [u, v] = if ok { *uv } else { [UNKNOWN, UNKNOWN] };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(0, "expected magic `PIEH`"));
    }
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "truncated header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (w, h) = (word(4), word(8));
    if w == 0 || h == 0 {
        return Err(Error::format(4, "zero flow dimension"));
    }
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::format(4, "flow dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(Error::format(bytes.len(), format!("truncated payload: expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected, "trailing bytes after payload"));
    }
    let float = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let mut vectors = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let at = 12 + 8 * i;
        let (u, v) = (float(at), float(at + 4));
        let ok = !(u > UNKNOWN_THRESHOLD);
        if ok && !(u.is_finite() && v.is_finite()) {
            return Err(Error::format(at, "non-finite flow vector"));
        }
        vectors.push([u, v]);
        valid.push(ok);
    }
    FlowField::new(w, h, vectors, valid)
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_flow(&std::fs::read(path)?)
}

pub fn write_flow(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    std::fs::write(path, encode_flow(flow))?;
    Ok(())
}
