//! Per-frame scene understanding: skew, fingertip, text lines, the focused
//! word and its recognition.

pub mod color;
pub mod components;
mod debug;
pub mod fast;
mod fingertip;
pub mod hough;
mod lines;
pub mod morphology;
mod ocr;
mod skew;
pub mod threshold;
mod word;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use debug::{write_debug_dump, DebugOverlay};
pub use fingertip::{detect_fingertip, page_mask, FingertipEstimate};
pub use lines::{cluster_text_lines, LineRegion, TextLines};
pub use ocr::{recognize_word, ExternalOcr, OcrEngine, OcrResult, TemplateOcr};
pub use skew::{bottom_edges, deskew, detect_skew};
pub use word::{extract_focused_word, WordCrop};

use crate::geometry::Point2;
use crate::raster::{GrayImage, Mask};

/// Line pitch, in pixels, at which the default structuring elements apply.
pub const MORPHOLOGY_REFERENCE_PITCH_PX: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PageError {
    #[error("no text lines found")]
    NoLinesFound,
    #[error("no device found in frame")]
    NoDeviceFound,
    #[error("no text line above the fingertip")]
    NoLineAboveFinger,
    #[error("word crop is empty")]
    EmptyCrop,
    #[error("OCR engine failure: {0}")]
    EngineFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageConfig {
    pub fast_threshold: f32,
    pub fast_nonmax: bool,
    /// Fraction of edge points that vote in the probabilistic Hough transform.
    pub hough_sample_fraction: f64,
    /// Minimum skew segment length as a fraction of the frame width.
    pub hough_min_length_fraction: f64,
    /// Minimum text-block segment length (blob raster) as a fraction of the
    /// frame width.
    pub block_min_length_fraction: f64,
    pub hough_theta_step_deg: f64,
    pub hough_min_votes: usize,
    pub hough_seed: u64,
    /// Expected distance between consecutive text lines in the frame.
    pub nominal_line_pitch_px: f64,
    /// Dilation element (width, height) at the reference pitch.
    pub dilate: [usize; 2],
    /// Closing element (width, height) at the reference pitch.
    pub close: [usize; 2],
    pub min_line_corners: usize,
    pub min_device_area: usize,
    /// Minimum b* separation between device and background classes.
    pub min_device_contrast: f32,
    /// Blobs within this horizontal distance of the nearest one count as
    /// equally near the fingertip.
    pub word_tip_tolerance_px: f64,
    /// Margin around the device mask excluded from corner detection.
    pub device_margin_px: usize,
}

impl Default for PageConfig {
    fn default() -> Self {
        Self {
            fast_threshold: 20.0,
            fast_nonmax: true,
            hough_sample_fraction: 0.2,
            hough_min_length_fraction: 0.3,
            block_min_length_fraction: 0.1,
            hough_theta_step_deg: 0.25,
            hough_min_votes: 10,
            hough_seed: 0x5eed,
            nominal_line_pitch_px: MORPHOLOGY_REFERENCE_PITCH_PX,
            dilate: [9, 3],
            close: [5, 5],
            min_line_corners: 8,
            min_device_area: 200,
            min_device_contrast: 15.0,
            word_tip_tolerance_px: 2.0,
            device_margin_px: 3,
        }
    }
}

impl PageConfig {
    /// Largest gap bridged when walking a Hough segment.
    pub fn hough_max_gap(&self) -> f64 {
        0.6 * self.nominal_line_pitch_px
    }

    pub(crate) fn hough_params(&self, min_length: f64) -> hough::HoughParams {
        let theta_step = self.hough_theta_step_deg.to_radians();
        let expected = (self.hough_sample_fraction * min_length * 0.25).round() as usize;
        hough::HoughParams {
            sample_fraction: self.hough_sample_fraction,
            theta_step,
            min_votes: self.hough_min_votes.max(expected),
            min_length,
            max_gap: self.hough_max_gap(),
            seed: self.hough_seed,
        }
    }
}

/// FAST corners of `gray` that fall inside `mask`.
pub fn detect_corners(gray: &GrayImage, mask: &Mask, cfg: &PageConfig) -> Vec<Point2> {
    fast::fast_corners(gray, cfg.fast_threshold, Some(mask), cfg.fast_nonmax).iter().map(|c| c.point()).collect()
}
