//! File IO, batch evaluation and reporting on top of `dar-core`.
//!
//! Masks are single-channel 8-bit PNG or PGM files. Metrics run at whatever
//! resolution a prediction/ground-truth pair shares; nothing is resampled,
//! so predictions must already be at ground-truth resolution.

pub mod config;
pub mod debug;
mod error;
pub mod harness;
pub mod io;
pub mod tensor_io;

pub use config::{EvalConfig, MetricSet, OutputFormat, Settings};
pub use debug::{dar_debug_dump, DEBUG_FILES};
pub use error::{EvalError, Result};
pub use harness::{
    pair_masks, read_report_json, render_report, run_eval, write_report, EvalReport,
};
pub use io::load_label_map;
