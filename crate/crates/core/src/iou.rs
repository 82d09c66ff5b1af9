//! Confusion counts and the IoU family.
//!
//! A class that appears in neither prediction nor ground truth has an
//! undefined IoU and is left out of every mean.

use alloc::vec;
use alloc::vec::Vec;

use crate::mask::{ClassId, LabelMap};
use crate::{Error, Result};

/// Per-class true positive, false positive and false negative pixel counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    num_classes: u32,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionCounts {
    pub fn zeros(num_classes: u32) -> Self {
        let k = num_classes as usize;
        Self {
            num_classes,
            tp: vec![0; k],
            fp: vec![0; k],
            fn_: vec![0; k],
        }
    }

    /// Rebuilds counts from stored vectors (e.g. a parsed report).
    pub fn from_parts(tp: Vec<u64>, fp: Vec<u64>, fn_: Vec<u64>) -> Result<Self> {
        if tp.is_empty() || tp.len() != fp.len() || tp.len() != fn_.len() {
            return Err(Error::InvalidParameter(
                "tp, fp and fn must be non-empty and of equal length",
            ));
        }
        Ok(Self {
            num_classes: tp.len() as u32,
            tp,
            fp,
            fn_,
        })
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        if self.num_classes != other.num_classes {
            return Err(Error::ClassCountMismatch {
                left: self.num_classes,
                right: other.num_classes,
            });
        }
        for c in 0..self.num_classes as usize {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        Ok(())
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.accumulate(other)?;
        Ok(out)
    }

    pub fn class_iou(&self, class: ClassId) -> Result<Option<f64>> {
        if class >= self.num_classes {
            return Err(Error::ClassIdOutOfRange {
                value: class,
                num_classes: self.num_classes,
                position: None,
            });
        }
        let c = class as usize;
        let denom = self.tp[c] + self.fp[c] + self.fn_[c];
        Ok((denom > 0).then(|| self.tp[c] as f64 / denom as f64))
    }

    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        (0..self.num_classes)
            .map(|c| self.class_iou(c).expect("class in range"))
            .collect()
    }

    pub fn mean_iou(&self) -> Result<f64> {
        mean_defined(&self.per_class_iou()).ok_or(Error::AllClassesUndefined)
    }
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values.iter().flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn confusion_counts(pred: &LabelMap, gt: &LabelMap) -> Result<ConfusionCounts> {
    gt.dims().ensure_same(pred.dims())?;
    if pred.num_classes() != gt.num_classes() {
        return Err(Error::ClassCountMismatch {
            left: pred.num_classes(),
            right: gt.num_classes(),
        });
    }
    let mut counts = ConfusionCounts::zeros(gt.num_classes());
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if p == g {
            counts.tp[p as usize] += 1;
        } else {
            counts.fp[p as usize] += 1;
            counts.fn_[g as usize] += 1;
        }
    }
    Ok(counts)
}

pub fn class_iou(counts: &ConfusionCounts, class: ClassId) -> Result<Option<f64>> {
    counts.class_iou(class)
}

pub fn mean_iou(counts: &ConfusionCounts) -> Result<f64> {
    counts.mean_iou()
}

/// How per-image counts are combined into dataset scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AggregationMode {
    /// Score every image, then average the defined per-image values per class.
    #[default]
    PerImageMean,
    /// Sum the counts over all images and score once.
    GlobalCounts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IoUReport {
    pub per_class_iou: Vec<Option<f64>>,
    /// Mean of the defined entries of `per_class_iou`.
    pub mean_iou: f64,
    /// IoU of the positive (CGL) class.
    pub cgl_iou: Option<f64>,
    pub aggregation_mode: AggregationMode,
}

pub fn aggregate_iou(
    per_image: &[ConfusionCounts],
    mode: AggregationMode,
    positive_class: ClassId,
) -> Result<IoUReport> {
    let first = per_image.first().ok_or(Error::EmptyInput)?;
    let k = first.num_classes();
    if positive_class >= k {
        return Err(Error::ClassIdOutOfRange {
            value: positive_class,
            num_classes: k,
            position: None,
        });
    }
    let per_class_iou = match mode {
        AggregationMode::GlobalCounts => {
            let mut total = ConfusionCounts::zeros(k);
            for counts in per_image {
                total.accumulate(counts)?;
            }
            total.per_class_iou()
        }
        AggregationMode::PerImageMean => {
            let mut sums = vec![0.0; k as usize];
            let mut defined = vec![0usize; k as usize];
            for counts in per_image {
                if counts.num_classes() != k {
                    return Err(Error::ClassCountMismatch {
                        left: k,
                        right: counts.num_classes(),
                    });
                }
                for (c, iou) in counts.per_class_iou().into_iter().enumerate() {
                    if let Some(v) = iou {
                        sums[c] += v;
                        defined[c] += 1;
                    }
                }
            }
            sums.iter()
                .zip(&defined)
                .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
                .collect()
        }
    };
    let mean_iou = mean_defined(&per_class_iou).ok_or(Error::AllClassesUndefined)?;
    Ok(IoUReport {
        cgl_iou: per_class_iou[positive_class as usize],
        per_class_iou,
        mean_iou,
        aggregation_mode: mode,
    })
}
