//! Fingertip localization from the blue device in view.

use super::color::{lab_channel, LabChannel};
use super::components::label_components;
use super::morphology::dilate;
use super::threshold::otsu_threshold;
use super::{PageConfig, PageError};
use crate::geometry::Point2;
use crate::raster::{Mask, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct FingertipEstimate {
    /// Topmost device pixel (smallest x on ties).
    pub position: Point2,
    pub device_mask: Mask,
    /// Normalized b* separation between device and background, in (0, 1].
    pub confidence: f64,
}

pub fn detect_fingertip(rgb: &RgbImage, cfg: &PageConfig) -> Result<FingertipEstimate, PageError> {
    let b = lab_channel(rgb, LabChannel::B);
    let t = otsu_threshold(&b).ok_or(PageError::NoDeviceFound)?;
    let blue = Mask::from_fn(b.width(), b.height(), |x, y| b.get(x, y) <= t);
    let (mut sum_lo, mut n_lo, mut sum_hi, mut n_hi) = (0.0f64, 0usize, 0.0f64, 0usize);
    for (&v, &is_blue) in b.data().iter().zip(blue.data()) {
        if is_blue {
            sum_lo += v as f64;
            n_lo += 1;
        } else {
            sum_hi += v as f64;
            n_hi += 1;
        }
    }
    if n_lo == 0 || n_hi == 0 {
        return Err(PageError::NoDeviceFound);
    }
    let contrast = sum_hi / n_hi as f64 - sum_lo / n_lo as f64;
    if contrast < cfg.min_device_contrast as f64 {
        return Err(PageError::NoDeviceFound);
    }
    let labels = label_components(&blue);
    let largest = labels.largest().ok_or(PageError::NoDeviceFound)?;
    if largest.area < cfg.min_device_area {
        return Err(PageError::NoDeviceFound);
    }
    let (x, y) = largest.top_pixel;
    Ok(FingertipEstimate {
        position: Point2::new(x as f64, y as f64),
        device_mask: labels.mask_of(largest.label),
        confidence: (contrast / 100.0).clamp(0.01, 1.0),
    })
}

/// Region where text corners are accepted: everything except the device
/// and a small margin around it.
pub fn page_mask(tip: Option<&FingertipEstimate>, width: usize, height: usize, margin: usize) -> Mask {
    match tip {
        Some(t) => dilate(&t.device_mask, 2 * margin + 1, 2 * margin + 1).invert(),
        None => Mask::new(width, height, true),
    }
}
