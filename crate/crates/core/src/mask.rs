//! Label maps, binary masks and real-valued grids.
//!
//! All grids are row-major with the origin at the top-left corner: pixel
//! `(x, y)` lives at index `y * width + x`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub type ClassId = u32;

/// Width and height of a grid, both non-zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "grid width and height must be positive",
            ));
        }
        Ok(Self { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ensure_same(&self, other: Dims) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: (other.width, other.height),
            })
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: (len, 1),
            })
        }
    }

    fn position(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }
}

/// Translation table from raw 8-bit pixel values to class ids.
///
/// Values without an entry pass through unchanged and are then range-checked
/// against the class count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueRemap {
    table: [Option<ClassId>; 256],
}

impl Default for ValueRemap {
    fn default() -> Self {
        Self { table: [None; 256] }
    }
}

impl ValueRemap {
    pub fn new() -> Self {
        Self::default()
    }

    /// `0 → 0`, every non-zero value `→ 1`. Accepts both {0,1} and {0,255}
    /// binary encodings.
    pub fn binary_nonzero() -> Self {
        let mut remap = Self::new();
        remap.table[0] = Some(0);
        for v in 1..256 {
            remap.table[v] = Some(1);
        }
        remap
    }

    pub fn from_pairs<I: IntoIterator<Item = (u8, ClassId)>>(pairs: I) -> Self {
        let mut remap = Self::new();
        for (raw, class) in pairs {
            remap.insert(raw, class);
        }
        remap
    }

    pub fn insert(&mut self, raw: u8, class: ClassId) {
        self.table[raw as usize] = Some(class);
    }

    pub fn apply(&self, raw: u8) -> ClassId {
        self.table[raw as usize].unwrap_or(raw as ClassId)
    }

    /// Explicit entries, in raw-value order.
    pub fn entries(&self) -> impl Iterator<Item = (u8, ClassId)> + '_ {
        self.table
            .iter()
            .enumerate()
            .filter_map(|(raw, class)| class.map(|c| (raw as u8, c)))
    }
}

/// Grid of class ids in `[0, num_classes)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    dims: Dims,
    num_classes: u32,
    data: Vec<ClassId>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, num_classes: u32, data: Vec<ClassId>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        dims.check_len(data.len())?;
        if num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be positive"));
        }
        if let Some(i) = data.iter().position(|&v| v >= num_classes) {
            return Err(Error::ClassIdOutOfRange {
                value: data[i],
                num_classes,
                position: Some(dims.position(i)),
            });
        }
        Ok(Self {
            dims,
            num_classes,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, num_classes: u32, class: ClassId) -> Result<Self> {
        Self::new(width, height, num_classes, vec![class; width * height])
    }

    pub fn from_fn<F>(width: usize, height: usize, num_classes: u32, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> ClassId,
    {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, num_classes, data)
    }

    /// Builds a label map from 8-bit pixels. Without a remap, pixel value `v`
    /// is class `v`.
    pub fn from_gray8(
        width: usize,
        height: usize,
        pixels: &[u8],
        num_classes: u32,
        remap: Option<&ValueRemap>,
    ) -> Result<Self> {
        let data = match remap {
            Some(r) => pixels.iter().map(|&v| r.apply(v)).collect(),
            None => pixels.iter().map(|&v| v as ClassId).collect(),
        };
        Self::new(width, height, num_classes, data)
    }

    /// Raw pixel bytes (class id per pixel), or `None` when a class id does not
    /// fit in a byte.
    pub fn to_gray8(&self) -> Option<Vec<u8>> {
        self.data.iter().map(|&c| u8::try_from(c).ok()).collect()
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn data(&self) -> &[ClassId] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> ClassId {
        self.data[y * self.dims.width + x]
    }

    pub fn binarize(&self, positive_class: ClassId) -> Result<BinaryMask> {
        if positive_class >= self.num_classes {
            return Err(Error::ClassIdOutOfRange {
                value: positive_class,
                num_classes: self.num_classes,
                position: None,
            });
        }
        Ok(BinaryMask {
            dims: self.dims,
            data: self.data.iter().map(|&c| c == positive_class).collect(),
        })
    }
}

/// Grid of {0, 1} values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    dims: Dims,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        dims.check_len(data.len())?;
        Ok(Self { dims, data })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> bool,
    {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Axis-aligned rectangle of ones, `[x0, x0 + w) × [y0, y0 + h)`, clipped.
    pub fn with_rect(
        width: usize,
        height: usize,
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
    ) -> Result<Self> {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.dims.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    fn zip_with<F: Fn(bool, bool) -> bool>(&self, other: &Self, f: F) -> Result<Self> {
        self.dims.ensure_same(other.dims)?;
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Set difference `self \ other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn symmetric_difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a != b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims == other.dims && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.dims == other.dims && self.data.iter().zip(&other.data).all(|(&a, &b)| !(a && b))
    }

    /// 8-connected components of the ones, each as a sorted list of pixel
    /// indices. Components are ordered by their first pixel in raster order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let (w, h) = (self.dims.width, self.dims.height);
        let mut seen = vec![false; self.data.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                comp.push(i);
                let (x, y) = (i % w, i / w);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let j = ny * w + nx;
                        if self.data[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// 0 / 255 bytes, the usual on-disk encoding.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }
}

/// Grid of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatGrid {
    dims: Dims,
    data: Vec<f64>,
}

impl FloatGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        dims.check_len(data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid values must be finite"));
        }
        Ok(Self { dims, data })
    }

    pub(crate) fn from_parts(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.len(), data.len());
        Self { dims, data }
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.dims.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values scaled by 255, rounded and clamped to a byte.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| libm::round(v * 255.0).clamp(0.0, 255.0) as u8)
            .collect()
    }
}

pub fn binarize(map: &LabelMap, positive_class: ClassId) -> Result<BinaryMask> {
    map.binarize(positive_class)
}

/// Pixels set in `a` but not in `b`. With `a = y, b = GT` these are the false
/// positives; swapped, the false negatives.
pub fn complement_diff(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    a.difference(b)
}

pub fn or_fuse(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    a.union(b)
}

pub fn count_ones(mask: &BinaryMask) -> usize {
    mask.count_ones()
}
