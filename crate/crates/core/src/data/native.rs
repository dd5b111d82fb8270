//! Native recording format `psgr/1`.
//!
//! One UTF-8 JSON header line, then each channel's samples as contiguous
//! little-endian f32 in header order, then the u64 little-endian byte count of
//! everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::recording::{Channel, Recording, Stage};
use crate::error::{Error, Result};
use crate::util::{atomic_write, read_file};

pub const NATIVE_FORMAT: &str = "psgr/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    id: String,
    channels: Vec<String>,
    fs: Vec<f64>,
    samples: Vec<u64>,
    duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Option<Stage>>>,
}

pub fn encode_native(rec: &Recording) -> Result<Vec<u8>> {
    let header = Header {
        format: NATIVE_FORMAT.into(),
        id: rec.id.clone(),
        channels: rec.channels.iter().map(|c| c.name.clone()).collect(),
        fs: rec.channels.iter().map(|c| c.fs).collect(),
        samples: rec.channels.iter().map(|c| c.samples.len() as u64).collect(),
        duration: rec.duration(),
        labels: rec.labels.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    for c in &rec.channels {
        out.reserve(c.samples.len() * 4);
        for v in &c.samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let len = out.len() as u64;
    out.extend_from_slice(&len.to_le_bytes());
    Ok(out)
}

pub fn decode_native(bytes: &[u8], source: &Path) -> Result<Recording> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(source, 0, "missing header line"))?;
    let header: Header = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::parse(source, e.column() as u64, format!("bad header: {e}")))?;
    if header.format != NATIVE_FORMAT {
        return Err(Error::parse(source, 0, format!("unsupported format `{}`", header.format)));
    }
    let n = header.channels.len();
    if header.fs.len() != n || header.samples.len() != n {
        return Err(Error::parse(source, 0, "channel, fs and samples lists differ in length"));
    }
    let body_start = nl + 1;
    let total: u64 = header.samples.iter().try_fold(0u64, |acc, &s| acc.checked_add(s.checked_mul(4)?)).ok_or_else(|| Error::parse(source, 0, "sample counts overflow"))?;
    let expected = (body_start as u64).checked_add(total).and_then(|v| v.checked_add(8));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::parse(
            source,
            bytes.len() as u64,
            format!("file is {} bytes, header implies {:?}", bytes.len(), expected),
        ));
    }
    let trailer_at = bytes.len() - 8;
    let trailer = u64::from_le_bytes(bytes[trailer_at..].try_into().unwrap());
    if trailer != trailer_at as u64 {
        return Err(Error::parse(source, trailer_at as u64, "trailing length check failed"));
    }
    let mut pos = body_start;
    let mut channels = Vec::with_capacity(n);
    for ((name, &fs), &count) in header.channels.iter().zip(&header.fs).zip(&header.samples) {
        let nbytes = count as usize * 4;
        let samples = bytes[pos..pos + nbytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += nbytes;
        channels.push(Channel {
            name: name.clone(),
            fs,
            samples,
        });
    }
    let rec = Recording {
        id: header.id,
        channels,
        labels: header.labels,
    };
    rec.validate().map_err(|e| Error::parse(source, 0, e.to_string()))?;
    Ok(rec)
}

pub fn write_native(rec: &Recording, path: &Path) -> Result<()> {
    atomic_write(path, &encode_native(rec)?)
}

pub fn read_native(path: &Path) -> Result<Recording> {
    decode_native(&read_file(path)?, path)
}

/// Unscored epochs are written as `?`.
pub const UNSCORED_TOKEN: &str = "?";

pub fn format_hypnogram(labels: &[Option<Stage>]) -> String {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(l.map_or(UNSCORED_TOKEN, Stage::name));
        s.push('\n');
    }
    s
}

pub fn parse_hypnogram(text: &str, source: &Path) -> Result<Vec<Option<Stage>>> {
    let mut offset = 0u64;
    let mut out = Vec::new();
    for line in text.lines() {
        let tok = line.trim();
        if tok.is_empty() {
            offset += line.len() as u64 + 1;
            continue;
        }
        out.push(if tok == UNSCORED_TOKEN {
            None
        } else {
            Some(tok.parse::<Stage>().map_err(|m| Error::parse(source, offset, m))?)
        });
        offset += line.len() as u64 + 1;
    }
    Ok(out)
}

pub fn write_hypnogram(labels: &[Option<Stage>], path: &Path) -> Result<()> {
    atomic_write(path, format_hypnogram(labels).as_bytes())
}

pub fn read_hypnogram(path: &Path) -> Result<Vec<Option<Stage>>> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::parse(path, e.valid_up_to() as u64, "not UTF-8"))?;
    parse_hypnogram(text, path)
}
