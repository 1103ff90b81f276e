//! `TNET` parameter checkpoints.
//!
//! ```text
//! "TNET"  version:u8  kind:u8  in_channels:u8  num_classes:u16  layers:u8  width:u16 * layers
//! param_count:u32  param:f32 * param_count  crc32:u32
//! ```
//!
//! Integers and floats are little-endian; the CRC-32 covers every preceding byte.

use std::fs;
use std::path::Path;

use super::arch::{NetArch, NetKind, TrunkArch};
use super::nets::Net;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNET";
pub const VERSION: u8 = 1;

pub fn encode_checkpoint(net: &Net) -> Vec<u8> {
    let arch = net.arch();
    let mut out = Vec::with_capacity(16 + 4 * net.params().len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(match arch.kind {
        NetKind::Classifier => 0,
        NetKind::Segmenter => 1,
    });
    out.push(arch.trunk.in_channels as u8);
    out.extend_from_slice(&(arch.num_classes as u16).to_le_bytes());
    out.push(arch.trunk.widths.len() as u8);
    for &w in &arch.trunk.widths {
        out.extend_from_slice(&(w as u16).to_le_bytes());
    }
    out.extend_from_slice(&(net.params().len() as u32).to_le_bytes());
    for &p in net.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::format(
                field,
                format!("truncated: need {end} bytes, have {}", self.bytes.len()),
            ));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, field: &'static str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &'static str) -> Result<u16> {
        let b = self.take(2, field)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Net> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format("magic", "not a TNET checkpoint"));
    }
    if bytes.len() < 8 {
        return Err(Error::format("checksum", "file too short"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]);
    if crc32fast::hash(body) != stored {
        return Err(Error::format("checksum", "CRC-32 mismatch"));
    }
    let mut cur = Cursor { bytes: body, pos: 4 };
    let version = cur.u8("version")?;
    if version != VERSION {
        return Err(Error::format("version", format!("unsupported version {version}")));
    }
    let kind = match cur.u8("kind")? {
        0 => NetKind::Classifier,
        1 => NetKind::Segmenter,
        other => return Err(Error::format("kind", format!("unknown network kind {other}"))),
    };
    let in_channels = cur.u8("in_channels")? as usize;
    let num_classes = cur.u16("num_classes")? as usize;
    let layers = cur.u8("layers")? as usize;
    let widths = (0..layers)
        .map(|_| cur.u16("widths").map(usize::from))
        .collect::<Result<Vec<_>>>()?;
    let arch = NetArch {
        kind,
        trunk: TrunkArch::new(in_channels, widths),
        num_classes,
    };
    arch.validate()?;
    let count = cur.u32("param_count")? as usize;
    let raw = cur.take(count * 4, "params")?;
    if cur.pos != body.len() {
        return Err(Error::format("params", "trailing bytes after parameters"));
    }
    let params = raw
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Net::from_params(arch, params)
}

pub fn save_checkpoint(net: &Net, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Net> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
