use std::fs;
use std::path::{Path, PathBuf};

use dar_core::dar::DarResult;

use crate::error::{EvalError, Result};
use crate::io::{save_binary_mask, save_float_grid};

/// File names written by [`dar_debug_dump`], in pipeline order.
pub const DEBUG_FILES: [&str; 7] = [
    "fp.png",
    "fn.png",
    "fp_blur.png",
    "fn_blur.png",
    "fp_erode.png",
    "fn_erode.png",
    "y_prime.png",
];

/// Writes every intermediate of `result` into `out_dir`, creating it if
/// needed. Masks are 0/255; blurred fields are scaled by 255 and rounded.
pub fn dar_debug_dump(result: &DarResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let i = result
        .intermediates
        .as_ref()
        .ok_or(EvalError::Core(dar_core::Error::MissingIntermediates))?;
    fs::create_dir_all(out_dir).map_err(|e| EvalError::io(out_dir, e))?;
    let paths: Vec<PathBuf> = DEBUG_FILES.iter().map(|n| out_dir.join(n)).collect();
    save_binary_mask(&paths[0], &i.fp_mask)?;
    save_binary_mask(&paths[1], &i.fn_mask)?;
    save_float_grid(&paths[2], &i.fp_blurred)?;
    save_float_grid(&paths[3], &i.fn_blurred)?;
    save_binary_mask(&paths[4], &i.fp_eroded)?;
    save_binary_mask(&paths[5], &i.fn_eroded)?;
    save_binary_mask(&paths[6], &i.y_prime)?;
    Ok(paths)
}
