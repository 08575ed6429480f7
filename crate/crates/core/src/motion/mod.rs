//! Text motion relative to the finger camera: features, sparse optical flow
//! and the aggregate affine motion.

mod affine;
mod features;
mod flow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use affine::{estimate_motion, fit_affine, residuals, AffineMotion};
pub use features::{detect_features, min_eigen_map};
pub use flow::{track_flow, FlowField, FlowPoint};

use crate::geometry::Point2;
use crate::raster::GrayImage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("need at least 3 tracked points, got {got}")]
    InsufficientPoints { got: usize },
    #[error("tracked points are collinear")]
    DegenerateGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub max_features: usize,
    pub quality_level: f64,
    pub min_distance: f64,
    /// Structure-tensor block half size for feature detection.
    pub block_radius: usize,
    /// Flow window half size (1 gives a 3 x 3 window).
    pub window_radius: usize,
    pub pyramid: bool,
    pub pyramid_levels: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the update, in pixels.
    pub epsilon: f64,
    /// Normalized minimum eigenvalue below which a point is untracked.
    pub min_eigen_threshold: f64,
    /// Largest forward-backward tracking discrepancy, in pixels.
    pub max_round_trip_error: f64,
    /// Re-detect features after this many frames.
    pub redetect_interval: usize,
    /// Re-detect when fewer than this fraction of `max_features` survive.
    pub redetect_fraction: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            max_features: 100,
            quality_level: 0.01,
            min_distance: 7.0,
            block_radius: 1,
            window_radius: 1,
            pyramid: false,
            pyramid_levels: 3,
            max_iterations: 30,
            epsilon: 0.01,
            min_eigen_threshold: 1e-4,
            max_round_trip_error: 0.5,
            redetect_interval: 15,
            redetect_fraction: 0.5,
        }
    }
}

/// Frame-to-frame tracker that keeps its feature set alive between frames
/// and refreshes it on a schedule.
#[derive(Debug, Clone)]
pub struct MotionTracker {
    cfg: MotionConfig,
    prev: Option<(f64, GrayImage)>,
    points: Vec<Point2>,
    frames_since_detect: usize,
}

impl MotionTracker {
    pub fn new(cfg: MotionConfig) -> Self {
        Self { cfg, prev: None, points: Vec::new(), frames_since_detect: 0 }
    }

    /// Feeds the next frame; returns the flow from the previous frame when
    /// there was one.
    pub fn update(&mut self, timestamp: f64, gray: &GrayImage) -> Option<FlowField> {
        let flow = match &self.prev {
            Some((t0, prev)) if prev.width() == gray.width() && prev.height() == gray.height() && timestamp > *t0 => {
                let f = track_flow(prev, gray, &self.points, timestamp - t0, &self.cfg);
                self.points = f.tracked_pairs().map(|(_, d)| d).collect();
                Some(f)
            }
            _ => None,
        };
        self.frames_since_detect += 1;
        let too_few = (self.points.len() as f64) < self.cfg.redetect_fraction * self.cfg.max_features as f64;
        if flow.is_none() || too_few || self.frames_since_detect >= self.cfg.redetect_interval {
            self.points = detect_features(gray, self.cfg.max_features, &self.cfg);
            self.frames_since_detect = 0;
        }
        self.prev = Some((timestamp, gray.clone()));
        flow
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.points.clear();
        self.frames_since_detect = 0;
    }
}
