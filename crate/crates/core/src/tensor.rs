//! Dense row-major matrices and feature sequences.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix values must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: (self.cols, other.cols),
                found: (other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: (other.rows, other.cols),
            });
        }
        Ok(Matrix::from_fn(self.rows, other.rows, |i, j| {
            self.row(i)
                .iter()
                .zip(other.row(j))
                .map(|(a, b)| a * b)
                .sum()
        }))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: (other.rows, other.cols),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Columns placed side by side; all parts must share a row count.
    pub fn hconcat(parts: &[Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if let Some(bad) = parts.iter().find(|m| m.rows != rows) {
            return Err(Error::DimensionMismatch {
                expected: (rows, bad.cols),
                found: (bad.rows, bad.cols),
            });
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(Matrix { rows, cols, data })
    }
}

/// Layout of a `channels × height × width` feature volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VolumeShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl VolumeShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Channel-major feature volume: value `(c, r, col)` is at
/// `(c · height + r) · width + col`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    shape: VolumeShape,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn new(shape: VolumeShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: (shape.len(), 1),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("feature values must be finite"));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> VolumeShape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        let s = self.shape;
        self.data[(channel * s.height + row) * s.width + col]
    }
}

/// `n` feature vectors of dimension `d`, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSeq {
    values: Matrix,
    origin_shape: Option<VolumeShape>,
}

impl FeatureSeq {
    pub fn new(len: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        Ok(Self::from_matrix(Matrix::new(len, dim, data)?))
    }

    pub fn from_matrix(values: Matrix) -> Self {
        Self {
            values,
            origin_shape: None,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::from_matrix(Matrix::from_rows(rows)?))
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    pub fn origin_shape(&self) -> Option<VolumeShape> {
        self.origin_shape
    }

    /// Attaches a volume layout; requires `len = height · width` and
    /// `dim = channels`.
    pub fn with_origin_shape(mut self, shape: VolumeShape) -> Result<Self> {
        if shape.height * shape.width != self.len() || shape.channels != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: (shape.height * shape.width, shape.channels),
                found: (self.len(), self.dim()),
            });
        }
        self.origin_shape = Some(shape);
        Ok(self)
    }

    /// Element-wise sum; keeps `self`'s origin shape.
    pub fn add(&self, other: &FeatureSeq) -> Result<FeatureSeq> {
        Ok(FeatureSeq {
            values: self.values.add(&other.values)?,
            origin_shape: self.origin_shape,
        })
    }
}

/// Flattens a feature volume into a sequence: spatial position `(r, c)` becomes
/// row `r · width + c`, channels become columns.
pub fn seq_from_volume(volume: &FeatureVolume) -> FeatureSeq {
    let s = volume.shape();
    let positions = s.height * s.width;
    let values = Matrix::from_fn(positions, s.channels, |i, ch| {
        volume.get(ch, i / s.width, i % s.width)
    });
    FeatureSeq {
        values,
        origin_shape: Some(s),
    }
}

/// Inverse of [`seq_from_volume`]; needs the recorded origin shape.
pub fn volume_from_seq(seq: &FeatureSeq) -> Result<FeatureVolume> {
    let s = seq
        .origin_shape()
        .ok_or(Error::InvalidParameter("sequence has no origin shape"))?;
    let mut data = vec![0.0; s.len()];
    for ch in 0..s.channels {
        for r in 0..s.height {
            for c in 0..s.width {
                data[(ch * s.height + r) * s.width + c] = seq.values.get(r * s.width + c, ch);
            }
        }
    }
    FeatureVolume::new(s, data)
}
