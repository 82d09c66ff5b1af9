//! Feature volumes exported by external pipelines.
//!
//! Binary: three little-endian `u64` (channels, height, width) followed by
//! channel-major little-endian `f64`. Text: the same three integers, then the
//! values, all whitespace separated; `#` starts a comment.

use std::fs;
use std::path::Path;

use dar_core::tensor::{FeatureVolume, VolumeShape};

use crate::error::{EvalError, Result};

const HEADER_LEN: usize = 24;

pub fn encode_volume_bin(volume: &FeatureVolume) -> Vec<u8> {
    let s = volume.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.len());
    for n in [s.channels, s.height, s.width] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in volume.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_volume_bin(bytes: &[u8], origin: &Path) -> Result<FeatureVolume> {
    let err = |message: String| EvalError::Parse {
        path: origin.to_path_buf(),
        line: 0,
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(err(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let dim = |i: usize| {
        let n = u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
        usize::try_from(n).map_err(|_| err(format!("dimension {n} does not fit in memory")))
    };
    let shape = VolumeShape {
        channels: dim(0)?,
        height: dim(1)?,
        width: dim(2)?,
    };
    let expected = shape
        .channels
        .checked_mul(shape.height)
        .and_then(|n| n.checked_mul(shape.width))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| err("header dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(err(format!(
            "header promises {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureVolume::new(shape, data).map_err(|e| err(e.to_string()))
}

pub fn encode_volume_text(volume: &FeatureVolume) -> String {
    let s = volume.shape();
    let mut out = format!("{} {} {}\n", s.channels, s.height, s.width);
    for row in volume.data().chunks(s.width.max(1)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_volume_text(text: &str, origin: &Path) -> Result<FeatureVolume> {
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        line.split_whitespace().map(move |t| (i + 1, t))
    });
    let err = |line: usize, message: String| EvalError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut header = [0usize; 3];
    for slot in &mut header {
        let (line, tok) = tokens
            .next()
            .ok_or_else(|| err(0, "missing header".into()))?;
        *slot = tok
            .parse()
            .map_err(|_| err(line, format!("bad dimension `{tok}`")))?;
    }
    let shape = VolumeShape {
        channels: header[0],
        height: header[1],
        width: header[2],
    };
    let mut data = Vec::with_capacity(shape.len());
    for (line, tok) in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| err(line, format!("bad value `{tok}`")))?;
        data.push(v);
    }
    if data.len() != shape.len() {
        return Err(err(
            0,
            format!(
                "header promises {} values, found {}",
                shape.len(),
                data.len()
            ),
        ));
    }
    FeatureVolume::new(shape, data).map_err(|e| err(0, e.to_string()))
}

fn is_text(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("txt"))
}

/// Reads a volume, choosing the text format for `.txt` and binary otherwise.
pub fn read_volume(path: &Path) -> Result<FeatureVolume> {
    let bytes = fs::read(path).map_err(|e| EvalError::io(path, e))?;
    if is_text(path) {
        let text = String::from_utf8(bytes).map_err(|_| EvalError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "not UTF-8 text".into(),
        })?;
        decode_volume_text(&text, path)
    } else {
        decode_volume_bin(&bytes, path)
    }
}

pub fn write_volume(path: &Path, volume: &FeatureVolume) -> Result<()> {
    let bytes = if is_text(path) {
        encode_volume_text(volume).into_bytes()
    } else {
        encode_volume_bin(volume)
    };
    fs::write(path, bytes).map_err(|e| EvalError::io(path, e))
}
