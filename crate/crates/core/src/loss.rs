//! Pixel-wise cross-entropy and the weighted two-task loss
//! `L = α·L_CGL + β·L_SS`.

use alloc::vec::Vec;

use crate::mask::LabelMap;
use crate::{Error, Result};

/// Per-pixel class scores: `classes` logits for each pixel, stored
/// pixel-major in row-major pixel order.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitGrid {
    width: usize,
    height: usize,
    classes: usize,
    data: Vec<f64>,
}

impl LogitGrid {
    pub fn new(width: usize, height: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "grid width and height must be positive",
            ));
        }
        if classes < 2 {
            return Err(Error::InvalidParameter("at least two classes are required"));
        }
        if data.len() != width * height * classes {
            return Err(Error::DimensionMismatch {
                expected: (width * height * classes, 1),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("logits must be finite"));
        }
        Ok(Self {
            width,
            height,
            classes,
            data,
        })
    }

    pub fn uniform(width: usize, height: usize, classes: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            classes,
            alloc::vec![value; width * height * classes],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn logits(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.classes;
        &self.data[start..start + self.classes]
    }

    pub fn set(&mut self, x: usize, y: usize, class: usize, value: f64) {
        self.data[(y * self.width + x) * self.classes + class] = value;
    }

    /// Class with the largest logit per pixel (lowest id on ties).
    pub fn argmax(&self) -> Result<LabelMap> {
        let data = self
            .data
            .chunks(self.classes)
            .map(|z| {
                let mut best = 0;
                for (c, &v) in z.iter().enumerate() {
                    if v > z[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect();
        LabelMap::new(self.width, self.height, self.classes as u32, data)
    }
}

/// Mean over pixels of `−ln softmax(z)[gt]`.
pub fn pixel_cross_entropy(logits: &LogitGrid, gt: &LabelMap) -> Result<f64> {
    if (logits.width, logits.height) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch {
            expected: (gt.width(), gt.height()),
            found: (logits.width, logits.height),
        });
    }
    let mut total = 0.0;
    for (i, (z, &g)) in logits
        .data
        .chunks(logits.classes)
        .zip(gt.data())
        .enumerate()
    {
        if g as usize >= logits.classes {
            return Err(Error::ClassIdOutOfRange {
                value: g,
                num_classes: logits.classes as u32,
                position: Some((i % gt.width(), i / gt.width())),
            });
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|&v| libm::exp(v - max)).sum();
        total += libm::log(sum) - (z[g as usize] - max);
    }
    Ok(total / gt.data().len() as f64)
}

/// Task weights `α` (CGL) and `β` (semantic segmentation).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    alpha: f64,
    beta: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(alpha) && ok(beta)) {
            return Err(Error::InvalidParameter(
                "loss weights must be finite and non-negative",
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

pub fn combined_loss(l_cgl: f64, l_ss: f64, weights: &LossWeights) -> f64 {
    weights.alpha * l_cgl + weights.beta * l_ss
}
