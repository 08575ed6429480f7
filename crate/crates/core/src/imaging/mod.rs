//! Geometric and photometric rectification of finger-camera frames.

mod deconv;
mod fisheye;
mod tps;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deconv::{blind_deconvolve, DeconvConfig, DeconvResult, DeconvStatus, Psf};
pub use fisheye::{
    distort_image, project_fisheye, undistort_image, CameraIntrinsics, FisheyeDistortion, RemapGrid, RigidPose,
};
pub use tps::{apply_tps, fit_tps, tps_kernel_sq, TpsWarp};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("point lies behind the camera (z = {z})")]
    PointBehindCamera { z: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("distortion coefficients must be finite")]
    InvalidDistortion,
    #[error("rotation is not proper orthonormal (orthogonality error {orthogonality_error:e}, det {determinant})")]
    InvalidRotation { orthogonality_error: f64, determinant: f64 },
    #[error("control points are collinear or too few")]
    DegenerateConfiguration,
    #[error("invalid PSF: {0}")]
    InvalidPsf(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("calibration file line {line}: {message}")]
    Calibration { line: usize, message: String },
    #[error("calibration file: {0}")]
    CalibrationIo(#[from] std::io::Error),
}

/// Contents of a camera calibration file.
///
/// The file is plain `key = value` text (`:` also accepted, `#` starts a
/// comment) with keys `fx fy cx cy k1 k2 k3 k4 width height`. The
/// distortion keys default to zero; everything else is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraCalibration {
    pub intrinsics: CameraIntrinsics,
    pub distortion: FisheyeDistortion,
    pub width: usize,
    pub height: usize,
}

impl CameraCalibration {
    pub fn parse(text: &str) -> Result<CameraCalibration, ImagingError> {
        let mut vals: std::collections::HashMap<String, (f64, usize)> = Default::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| ImagingError::Calibration { line: idx + 1, message: format!("expected key = value, got {line:?}") })?;
            let key = key.trim().to_ascii_lowercase();
            let value: f64 = value.trim().parse().map_err(|_| ImagingError::Calibration {
                line: idx + 1,
                message: format!("value for {key} is not a number"),
            })?;
            if !matches!(key.as_str(), "fx" | "fy" | "cx" | "cy" | "k1" | "k2" | "k3" | "k4" | "width" | "height") {
                return Err(ImagingError::Calibration { line: idx + 1, message: format!("unknown key {key}") });
            }
            vals.insert(key, (value, idx + 1));
        }
        let req = |k: &str| {
            vals.get(k).map(|v| v.0).ok_or_else(|| ImagingError::Calibration { line: 0, message: format!("missing key {k}") })
        };
        let opt = |k: &str| vals.get(k).map(|v| v.0).unwrap_or(0.0);
        let width = req("width")?;
        let height = req("height")?;
        if !(width >= 1.0 && height >= 1.0 && width.fract() == 0.0 && height.fract() == 0.0) {
            return Err(ImagingError::Calibration { line: 0, message: "width/height must be positive integers".into() });
        }
        let intrinsics = CameraIntrinsics { fx: req("fx")?, fy: req("fy")?, cx: req("cx")?, cy: req("cy")? };
        intrinsics.validate(Some((width as usize, height as usize)))?;
        let distortion = FisheyeDistortion::new(opt("k1"), opt("k2"), opt("k3"), opt("k4"))?;
        Ok(CameraCalibration { intrinsics, distortion, width: width as usize, height: height as usize })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CameraCalibration, ImagingError> {
        CameraCalibration::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let i = &self.intrinsics;
        let d = &self.distortion;
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\nk1 = {}\nk2 = {}\nk3 = {}\nk4 = {}\nwidth = {}\nheight = {}\n",
            i.fx, i.fy, i.cx, i.cy, d.k1, d.k2, d.k3, d.k4, self.width, self.height
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_roundtrips_through_text() {
        let text = "# finger camera\nfx = 200\nfy: 201.5\ncx = 160\ncy = 120\nk1 = -0.02\nk3 = 0.001\nwidth = 320\nheight = 240\n";
        let cal = CameraCalibration::parse(text).unwrap();
        assert_eq!(cal.intrinsics.fy, 201.5);
        assert_eq!(cal.distortion.k2, 0.0);
        assert_eq!(CameraCalibration::parse(&cal.to_text()).unwrap(), cal);
    }

    #[test]
    fn calibration_reports_bad_lines() {
        let err = CameraCalibration::parse("fx = 1\nfy = abc\n").unwrap_err();
        assert!(matches!(err, ImagingError::Calibration { line: 2, .. }));
        let err = CameraCalibration::parse("fx = 1\nfy = 1\ncx = 1\ncy = 1\nwidth = 10\n").unwrap_err();
        assert!(err.to_string().contains("height"));
        let err = CameraCalibration::parse("fx = 1\nfy = 1\ncx = 50\ncy = 1\nwidth = 10\nheight = 10\n").unwrap_err();
        assert!(matches!(err, ImagingError::InvalidIntrinsics(_)));
    }
}
