//! Mask files on disk: single-channel 8-bit PNG or PGM.

use std::fs;
use std::path::Path;

use dar_core::mask::{BinaryMask, ClassId, FloatGrid, LabelMap, ValueRemap};
use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{EvalError, Result};

/// Decodes `path` into raw 8-bit values plus `(width, height)`.
pub fn load_gray8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let reader = ImageReader::open(path)
        .map_err(|e| EvalError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| EvalError::io(path, e))?;
    if reader.format().is_none() {
        return Err(malformed(path, "unrecognised image format"));
    }
    let img = reader
        .decode()
        .map_err(|e| malformed(path, &e.to_string()))?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(malformed(
            path,
            &format!(
                "expected single-channel 8-bit image, found {:?}",
                other.color()
            ),
        )),
    }
}

fn malformed(path: &Path, reason: &str) -> EvalError {
    EvalError::MalformedImage {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Loads a label map. Pixel values are class ids after `remap`; values the
/// remap does not mention pass through unchanged and must be below
/// `expected_classes`.
pub fn load_label_map(
    path: &Path,
    expected_classes: u32,
    remap: Option<&ValueRemap>,
) -> Result<LabelMap> {
    let (w, h, raw) = load_gray8(path)?;
    LabelMap::from_gray8(w, h, &raw, expected_classes, remap).map_err(|source| EvalError::Mask {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes raw gray values. The container follows the extension (`.pgm` or
/// `.png`, defaulting to PNG).
pub fn save_gray8(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let mut encoded = Vec::new();
    let (w, h) = (width as u32, height as u32);
    let written = if pgm {
        PnmEncoder::new(&mut encoded)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(data, w, h, ExtendedColorType::L8)
    } else {
        PngEncoder::new(&mut encoded).write_image(data, w, h, ExtendedColorType::L8)
    };
    written.map_err(|source| EvalError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, encoded).map_err(|e| EvalError::io(path, e))
}

/// Writes a label map with class ids as pixel values.
pub fn save_label_map(path: &Path, map: &LabelMap) -> Result<()> {
    let data = map.to_gray8().ok_or_else(|| {
        EvalError::Config(format!(
            "{} classes do not fit in 8 bits",
            map.num_classes()
        ))
    })?;
    save_gray8(path, map.width(), map.height(), &data)
}

/// Writes a binary mask as 0/255.
pub fn save_binary_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    save_gray8(path, mask.width(), mask.height(), &mask.to_gray8())
}

/// Writes a float grid scaled by 255, rounded and clamped.
pub fn save_float_grid(path: &Path, grid: &FloatGrid) -> Result<()> {
    save_gray8(path, grid.width(), grid.height(), &grid.to_gray8())
}

/// Parses a remap table.
///
/// One mapping per line, `raw class` or `raw=class`, `#` starts a comment.
/// `raw` may be `nonzero`, standing for every value in 1..=255; explicit
/// lines override it regardless of order.
pub fn parse_remap(text: &str, origin: &Path) -> Result<ValueRemap> {
    let mut nonzero = None;
    let mut explicit = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message,
        };
        let mut parts = line
            .split(|c: char| c == '=' || c.is_whitespace())
            .filter(|s| !s.is_empty());
        let (Some(raw), Some(class), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `raw class`, found `{line}`")));
        };
        let class: ClassId = class
            .parse()
            .map_err(|_| err(format!("bad class id `{class}`")))?;
        if raw.eq_ignore_ascii_case("nonzero") {
            nonzero = Some(class);
        } else {
            let raw: u8 = raw
                .parse()
                .map_err(|_| err(format!("raw value `{raw}` is not in 0..=255")))?;
            explicit.push((raw, class));
        }
    }
    let mut remap = ValueRemap::new();
    if let Some(class) = nonzero {
        for v in 1..=255u8 {
            remap.insert(v, class);
        }
    }
    for (raw, class) in explicit {
        remap.insert(raw, class);
    }
    Ok(remap)
}

pub fn load_remap(path: &Path) -> Result<ValueRemap> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    parse_remap(&text, path)
}
