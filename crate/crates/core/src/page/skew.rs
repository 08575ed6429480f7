//! Document skew from text baselines.

use super::hough::probabilistic_hough;
use super::threshold::binarize_dark;
use super::{PageConfig, PageError};
use crate::raster::{GrayImage, Mask};

/// Lower boundary pixels of a mask: set pixels whose lower neighbour is
/// unset.
pub fn bottom_edges(m: &Mask) -> Mask {
    let h = m.height();
    Mask::from_fn(m.width(), h, |x, y| m.get(x, y) && (y + 1 == h || !m.get(x, y + 1)))
}

/// Dominant text direction, `atan2(dy, dx)` in image coordinates (y down),
/// in (-pi/2, pi/2]. Segments come from the probabilistic Hough transform
/// over the bottom edges of the ink; the result is their length-weighted
/// median angle.
pub fn detect_skew(gray: &GrayImage, cfg: &PageConfig) -> Result<f64, PageError> {
    let ink = binarize_dark(gray);
    if ink.count() == 0 {
        return Err(PageError::NoLinesFound);
    }
    let edges = bottom_edges(&ink);
    let min_len = cfg.hough_min_length_fraction * gray.width() as f64;
    let segments = probabilistic_hough(&edges, &cfg.hough_params(min_len));
    if segments.len() < 2 {
        return Err(PageError::NoLinesFound);
    }
    let mut weighted: Vec<(f64, f64)> = segments.iter().map(|s| (s.angle, s.length())).collect();
    weighted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = weighted.iter().map(|w| w.1).sum::<f64>() / 2.0;
    let mut acc = 0.0;
    for (angle, len) in &weighted {
        acc += len;
        if acc >= half {
            return Ok(*angle);
        }
    }
    Ok(weighted.last().unwrap().0)
}

/// Undoes a skew of `angle` by rotating about the image center, filling
/// uncovered pixels with white.
pub fn deskew(gray: &GrayImage, angle: f64) -> GrayImage {
    if angle == 0.0 {
        return gray.clone();
    }
    gray.rotate_about_center(-angle, 255.0)
}
