//! Otsu thresholding.

use crate::raster::{GrayImage, Mask};

const BINS: usize = 256;

/// Otsu threshold over arbitrary float values. Values `<= t` form the low
/// class. Returns `None` when the input is empty or constant.
pub fn otsu_threshold_values(values: &[f32]) -> Option<f32> {
    let (lo, hi) = values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if values.is_empty() || hi <= lo {
        return None;
    }
    let scale = (BINS - 1) as f32 / (hi - lo);
    let mut hist = [0u64; BINS];
    for &v in values {
        hist[((v - lo) * scale).round() as usize] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_var) = (0usize, -1.0);
    for (i, &c) in hist.iter().enumerate().take(BINS - 1) {
        w0 += c as f64;
        sum0 += i as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best = i;
        }
    }
    Some(lo + (best as f32 + 0.5) / scale)
}

pub fn otsu_threshold(img: &GrayImage) -> Option<f32> {
    otsu_threshold_values(img.data())
}

/// Marks pixels darker than the Otsu threshold (ink on paper). A constant
/// image yields an empty mask.
pub fn binarize_dark(img: &GrayImage) -> Mask {
    match otsu_threshold(img) {
        Some(t) => Mask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) <= t),
        None => Mask::new(img.width(), img.height(), false),
    }
}
