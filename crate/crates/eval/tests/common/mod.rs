#![allow(dead_code)]

use std::path::Path;

use dar_core::mask::BinaryMask;
use dar_eval::io::save_gray8;

pub fn write_mask(path: &Path, mask: &BinaryMask) {
    save_gray8(path, mask.width(), mask.height(), &mask.to_gray8()).unwrap();
}

pub fn block(size: usize, inset: usize, side: usize) -> BinaryMask {
    BinaryMask::with_rect(size, size, inset, inset, side, side).unwrap()
}

pub fn touch(dir: &Path, names: &[&str]) {
    std::fs::create_dir_all(dir).unwrap();
    for n in names {
        write_mask(&dir.join(n), &BinaryMask::zeros(4, 4).unwrap());
    }
}
