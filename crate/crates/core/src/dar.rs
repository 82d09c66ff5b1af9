//! Dimension-agnostic recall (DaR).
//!
//! The score forgives small disagreements in the extent of predicted blobs
//! while still penalizing blobs that are missed or hallucinated outright:
//!
//! 1. `fp = y \ GT` and `fn = GT \ y`.
//! 2. Each complement is blurred with a normalized, truncated Gaussian.
//! 3. Each blurred field is thresholded at `th` (strictly greater). With a
//!    normalized kernel only pixels whose neighbourhood is almost entirely
//!    disagreement survive, so this acts as an erosion.
//! 4. `y' = fp_eroded ∪ fn_eroded`.
//! 5. `DaR = 1 − |y'| / |GT|`.
//!
//! Note that `y'` contains surviving false positives too, so despite the name
//! the score also penalizes large spurious detections and can go negative
//! when those outweigh the ground truth. Ground-truth blobs narrower than the
//! erosion cutoff (18 px for the defaults) vanish entirely even when missed;
//! [`DarResult::vanished_components`] counts them.

use alloc::vec;
use alloc::vec::Vec;

use crate::mask::{BinaryMask, Dims, FloatGrid};
use crate::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 3.0;
pub const DEFAULT_THRESHOLD: f64 = 0.999;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BorderMode {
    /// Out-of-image pixels read as 0, so disagreement touching the border
    /// erodes from that side as well.
    #[default]
    ZeroPad,
    /// Out-of-image reads clamp to the nearest edge pixel.
    Replicate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EmptyGtPolicy {
    /// Report [`Error::EmptyGroundTruth`]; the image is excluded from
    /// aggregation.
    #[default]
    Skip,
    /// 1.0 if `y'` is empty, otherwise 0.0.
    ScoreOneIfClean,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarParams {
    pub sigma: f64,
    pub th: f64,
    pub kernel_radius: usize,
    pub border_mode: BorderMode,
    pub empty_gt_policy: EmptyGtPolicy,
    pub clamp_negative: bool,
}

impl Default for DarParams {
    fn default() -> Self {
        Self::with_sigma(DEFAULT_SIGMA)
    }
}

impl DarParams {
    /// Defaults with the given sigma and a `ceil(3σ)` kernel radius.
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            th: DEFAULT_THRESHOLD,
            kernel_radius: default_radius(sigma),
            border_mode: BorderMode::ZeroPad,
            empty_gt_policy: EmptyGtPolicy::Skip,
            clamp_negative: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter("sigma must be positive and finite"));
        }
        check_threshold(self.th)?;
        if self.kernel_radius < 1 {
            return Err(Error::InvalidParameter("kernel radius must be at least 1"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel2D> {
        self.validate()?;
        gaussian_kernel(self.sigma, self.kernel_radius)
    }
}

/// `ceil(3σ)`, at least 1.
pub fn default_radius(sigma: f64) -> usize {
    if sigma.is_finite() && sigma > 0.0 {
        (libm::ceil(3.0 * sigma) as usize).max(1)
    } else {
        1
    }
}

fn check_threshold(th: f64) -> Result<()> {
    if th > 0.0 && th < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "threshold must lie strictly between 0 and 1",
        ))
    }
}

/// Square, separable Gaussian kernel of side `2·radius + 1`.
///
/// Each 1-D pass accumulates symmetric tap pairs from the outside in and the
/// centre tap last; the centre tap is chosen so that this sum over all taps
/// is exactly 1.0. A pixel whose whole window is ones therefore blurs to
/// exactly 1.0, and any other pixel of a binary mask to at most 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    sigma: f64,
    radius: usize,
    taps: Vec<f64>,
    weights: Vec<f64>,
}

pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel2D> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter("sigma must be positive and finite"));
    }
    if radius < 1 {
        return Err(Error::InvalidParameter("kernel radius must be at least 1"));
    }
    let r = radius as i64;
    let two_var = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| libm::exp(-((i * i) as f64) / two_var))
        .collect();
    let total: f64 = raw.iter().sum();
    let mut taps: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // The centre tap absorbs the rounding residue of the paired sum.
    let outer = (1..=radius)
        .rev()
        .fold(0.0, |acc, k| acc + taps[radius + k] * 2.0);
    taps[radius] = 1.0 - outer;
    let side = 2 * radius + 1;
    let mut weights = Vec::with_capacity(side * side);
    for &wy in &taps {
        for &wx in &taps {
            weights.push(wy * wx);
        }
    }
    Ok(Kernel2D {
        sigma,
        radius,
        taps,
        weights,
    })
}

impl Kernel2D {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// The 1-D factor; `weights = taps ⊗ taps`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Row-major `side × side` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)`, each in `[-radius, radius]`.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        assert!(
            dx.abs() <= r && dy.abs() <= r,
            "offset outside kernel support"
        );
        self.weights[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }

    pub fn center_weight(&self) -> f64 {
        self.weight(0, 0)
    }

    /// Whether thresholding at `th` can only keep pixels that were set before
    /// blurring: a zero pixel blurs to at most `1 − w(0,0)`.
    pub fn preserves_subsets(&self, th: f64) -> bool {
        self.center_weight() > 1.0 - th
    }
}

/// Separable convolution of a binary mask: horizontal pass, then vertical.
pub fn blur(mask: &BinaryMask, kernel: &Kernel2D, border: BorderMode) -> FloatGrid {
    let dims = mask.dims();
    let src: Vec<f64> = mask
        .data()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let horizontal = convolve_axis(&src, dims, kernel.taps(), border, Axis::X);
    let out = convolve_axis(&horizontal, dims, kernel.taps(), border, Axis::Y);
    FloatGrid::from_parts(dims, out)
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn convolve_axis(
    src: &[f64],
    dims: Dims,
    taps: &[f64],
    border: BorderMode,
    axis: Axis,
) -> Vec<f64> {
    let (w, h) = (dims.width, dims.height);
    let r = (taps.len() / 2) as isize;
    let (extent, stride) = match axis {
        Axis::X => (w as isize, 1usize),
        Axis::Y => (h as isize, w),
    };
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let pos = match axis {
                Axis::X => x as isize,
                Axis::Y => y as isize,
            };
            let base = y * w + x;
            let origin = base - (pos as usize) * stride;
            let read = |p: isize| -> f64 {
                if p < 0 || p >= extent {
                    match border {
                        BorderMode::ZeroPad => 0.0,
                        BorderMode::Replicate => {
                            src[origin + p.clamp(0, extent - 1) as usize * stride]
                        }
                    }
                } else {
                    src[origin + p as usize * stride]
                }
            };
            let mut acc = 0.0;
            for k in (1..=r).rev() {
                acc += taps[(r + k) as usize] * (read(pos - k) + read(pos + k));
            }
            acc += taps[r as usize] * read(pos);
            out[base] = acc;
        }
    }
    out
}

/// Strict threshold: a pixel is set iff its value is greater than `th`.
pub fn threshold(grid: &FloatGrid, th: f64) -> Result<BinaryMask> {
    check_threshold(th)?;
    BinaryMask::new(
        grid.width(),
        grid.height(),
        grid.data().iter().map(|&v| v > th).collect(),
    )
}

/// Every stage of the pipeline, for inspection and debug dumps.
#[derive(Clone, Debug, PartialEq)]
pub struct DarIntermediates {
    pub fp_mask: BinaryMask,
    pub fn_mask: BinaryMask,
    pub fp_blurred: FloatGrid,
    pub fn_blurred: FloatGrid,
    pub fp_eroded: BinaryMask,
    pub fn_eroded: BinaryMask,
    pub y_prime: BinaryMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DarResult {
    /// Reported score, after clamping and empty-GT handling.
    pub score: f64,
    /// `1 − |y'| / |GT|` before clamping; `None` when GT is empty.
    pub raw_score: Option<f64>,
    pub surviving_fp: usize,
    pub surviving_fn: usize,
    pub y_prime_ones: usize,
    pub gt_ones: usize,
    /// The score was raised to 0 by `clamp_negative`.
    pub clamped: bool,
    /// GT had no positive pixels (only under [`EmptyGtPolicy::ScoreOneIfClean`]).
    pub empty_gt: bool,
    /// Ground-truth components missed completely by the prediction that
    /// nonetheless leave no survivor in `y'`.
    pub vanished_components: usize,
    pub intermediates: Option<DarIntermediates>,
}

/// Parameters plus the kernel built from them, reusable across images.
#[derive(Clone, Debug)]
pub struct DarEvaluator {
    params: DarParams,
    kernel: Kernel2D,
}

impl DarEvaluator {
    pub fn new(params: DarParams) -> Result<Self> {
        let kernel = params.kernel()?;
        Ok(Self { params, kernel })
    }

    pub fn params(&self) -> &DarParams {
        &self.params
    }

    pub fn kernel(&self) -> &Kernel2D {
        &self.kernel
    }

    /// Whether `fp_eroded ⊆ fp` and `fn_eroded ⊆ fn` are guaranteed.
    pub fn preserves_subsets(&self) -> bool {
        self.kernel.preserves_subsets(self.params.th)
    }

    /// Full pipeline, keeping every intermediate.
    pub fn components(&self, pred: &BinaryMask, gt: &BinaryMask) -> Result<DarResult> {
        gt.dims().ensure_same(pred.dims())?;
        let border = self.params.border_mode;
        let fp_mask = pred.difference(gt)?;
        let fn_mask = gt.difference(pred)?;
        let fp_blurred = blur(&fp_mask, &self.kernel, border);
        let fn_blurred = blur(&fn_mask, &self.kernel, border);
        let fp_eroded = threshold(&fp_blurred, self.params.th)?;
        let fn_eroded = threshold(&fn_blurred, self.params.th)?;
        let y_prime = fp_eroded.union(&fn_eroded)?;

        let surviving_fp = fp_eroded.count_ones();
        let surviving_fn = fn_eroded.count_ones();
        let y_prime_ones = y_prime.count_ones();
        let gt_ones = gt.count_ones();

        let mut result = DarResult {
            score: 1.0,
            raw_score: None,
            surviving_fp,
            surviving_fn,
            y_prime_ones,
            gt_ones,
            clamped: false,
            empty_gt: false,
            vanished_components: vanished_components(gt, pred, &fn_eroded),
            intermediates: None,
        };

        if gt_ones == 0 {
            match self.params.empty_gt_policy {
                EmptyGtPolicy::Skip => return Err(Error::EmptyGroundTruth),
                EmptyGtPolicy::ScoreOneIfClean => {
                    result.empty_gt = true;
                    result.score = if y_prime_ones == 0 { 1.0 } else { 0.0 };
                }
            }
        } else {
            let raw = 1.0 - y_prime_ones as f64 / gt_ones as f64;
            result.raw_score = Some(raw);
            result.score = raw;
            if self.params.clamp_negative && raw < 0.0 {
                result.score = 0.0;
                result.clamped = true;
            }
        }

        result.intermediates = Some(DarIntermediates {
            fp_mask,
            fn_mask,
            fp_blurred,
            fn_blurred,
            fp_eroded,
            fn_eroded,
            y_prime,
        });
        Ok(result)
    }

    pub fn score(&self, pred: &BinaryMask, gt: &BinaryMask) -> Result<DarResult> {
        let mut result = self.components(pred, gt)?;
        result.intermediates = None;
        Ok(result)
    }
}

fn vanished_components(gt: &BinaryMask, pred: &BinaryMask, fn_eroded: &BinaryMask) -> usize {
    gt.components()
        .iter()
        .filter(|comp| {
            let missed = comp.iter().all(|&i| !pred.data()[i]);
            missed && comp.iter().all(|&i| !fn_eroded.data()[i])
        })
        .count()
}

pub fn dar_components(pred: &BinaryMask, gt: &BinaryMask, params: &DarParams) -> Result<DarResult> {
    DarEvaluator::new(*params)?.components(pred, gt)
}

pub fn dar_score(pred: &BinaryMask, gt: &BinaryMask, params: &DarParams) -> Result<DarResult> {
    DarEvaluator::new(*params)?.score(pred, gt)
}
