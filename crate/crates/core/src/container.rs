//! Versioned binary container used for model and index files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  b"ONTOSRCH"
//! version  u32
//! kind     u32 length + UTF-8 bytes
//! header   u64 length + UTF-8 JSON
//! payload  u64 count  + count × f64
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a write/read cycle is bitwise.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"ONTOSRCH";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a container file (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("expected container kind `{expected}`, found `{found}`")]
    WrongKind { expected: String, found: String },
    #[error("truncated container")]
    Truncated,
    #[error("bad container header: {0}")]
    Header(#[from] serde_json::Error),
}

pub fn to_bytes<H: Serialize>(kind: &str, header: &H, payload: &[f64]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("header serialises");
    let mut out = Vec::with_capacity(32 + kind.len() + header.len() + payload.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(kind.len() as u32).to_le_bytes());
    out.extend_from_slice(kind.as_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(n).ok_or(ContainerError::Truncated)?;
        let slice = self.buf.get(self.pos..end).ok_or(ContainerError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes<H: DeserializeOwned>(
    bytes: &[u8],
    kind: &str,
) -> Result<(H, Vec<f64>), ContainerError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let kind_len = cur.u32()? as usize;
    let found = String::from_utf8_lossy(cur.take(kind_len)?).into_owned();
    if found != kind {
        return Err(ContainerError::WrongKind {
            expected: kind.to_string(),
            found,
        });
    }
    let header_len = cur.u64()? as usize;
    let header: H = serde_json::from_slice(cur.take(header_len)?)?;
    let count = cur.u64()? as usize;
    let raw = cur.take(count.checked_mul(8).ok_or(ContainerError::Truncated)?)?;
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

pub fn write<H: Serialize>(
    path: impl AsRef<Path>,
    kind: &str,
    header: &H,
    payload: &[f64],
) -> Result<(), ContainerError> {
    let path = path.as_ref();
    fs::write(path, to_bytes(kind, header, payload)).map_err(|source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read<H: DeserializeOwned>(
    path: impl AsRef<Path>,
    kind: &str,
) -> Result<(H, Vec<f64>), ContainerError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes, kind)
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}
