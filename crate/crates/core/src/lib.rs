#![no_std]
//! Segmentation evaluation primitives and attention reference kernels.
//!
//! - [`mask`] – label maps, binary masks, float grids and the pixel-set
//!   algebra shared by the metrics.
//! - [`iou`] – confusion counts and the IoU family (per-class, CGL, mean).
//! - [`dar`] – dimension-agnostic recall: complements, Gaussian blur,
//!   threshold, OR, ratio.
//! - [`attention`] – forward-pass scaled dot-product and multi-head attention
//!   plus the self/cross-attention blocks, over [`tensor`] sequences.
//! - [`loss`] – pixel cross-entropy and the weighted two-task loss.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the batch
//! harness and the command line live in `dar-eval`.

extern crate alloc;

pub mod attention;
pub mod dar;
mod error;
pub mod iou;
pub mod loss;
pub mod mask;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
