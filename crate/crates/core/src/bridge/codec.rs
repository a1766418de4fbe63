//! Length-prefixed JSON framing: a 4-byte big-endian payload length followed
//! by the UTF-8 JSON payload.

use std::io::{ErrorKind, Read, Write};

use super::messages::Envelope;
use crate::error::{Error, Result};

pub const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;

pub fn encode(msg: &Envelope) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(msg).map_err(|e| Error::Protocol(format!("cannot encode message: {e}")))?;
    if payload.len() > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!(
            "message of {} bytes exceeds the {MAX_FRAME_LEN}-byte limit",
            payload.len()
        )));
    }
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Decodes exactly one frame, prefix included.
pub fn decode(bytes: &[u8]) -> Result<Envelope> {
    if bytes.len() < 4 {
        return Err(Error::Protocol("frame shorter than its length prefix".into()));
    }
    let len = check_len(u32::from_be_bytes(bytes[..4].try_into().expect("four bytes")))?;
    if bytes.len() - 4 != len {
        return Err(Error::Protocol(format!("length prefix announces {len} bytes but {} follow", bytes.len() - 4)));
    }
    decode_payload(&bytes[4..])
}

fn check_len(len: u32) -> Result<usize> {
    let len = len as usize;
    if len == 0 {
        return Err(Error::Protocol("empty frame".into()));
    }
    if len > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame of {len} bytes exceeds the {MAX_FRAME_LEN}-byte limit")));
    }
    Ok(len)
}

pub fn decode_payload(payload: &[u8]) -> Result<Envelope> {
    serde_json::from_slice(payload).map_err(|e| Error::Protocol(format!("malformed message: {e}")))
}

/// Best-effort request id of an undecodable payload, so the error reply can
/// still echo it.
pub fn salvage_id(payload: &[u8]) -> Option<u64> {
    serde_json::from_slice::<serde_json::Value>(payload).ok()?.get("id")?.as_u64()
}

pub fn write_message(w: &mut impl Write, msg: &Envelope) -> Result<()> {
    w.write_all(&encode(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one raw payload; `None` on a clean end of stream between frames.
pub fn read_payload(r: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut prefix[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::Protocol("stream closed inside a length prefix".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = check_len(u32::from_be_bytes(prefix))?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Protocol("stream closed inside a frame".into()),
        _ => e.into(),
    })?;
    Ok(Some(payload))
}

pub fn read_message(r: &mut impl Read) -> Result<Option<Envelope>> {
    read_payload(r)?.map(|p| decode_payload(&p)).transpose()
}
