use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::geometry::Point2;
use crate::raster::{GrayImage, RgbImage};

/// Pinhole intrinsics shared by the conventional and fisheye models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, ImagingError> {
        let intr = Self { fx, fy, cx, cy };
        intr.validate(None)?;
        Ok(intr)
    }

    /// Checks focal lengths and, when a sensor size is given, that the
    /// principal point lies on the sensor.
    pub fn validate(&self, sensor: Option<(usize, usize)>) -> Result<(), ImagingError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(ImagingError::InvalidIntrinsics(format!("focal lengths must be positive, got fx={} fy={}", self.fx, self.fy)));
        }
        if let Some((w, h)) = sensor {
            if !(self.cx >= 0.0 && self.cx <= w as f64 && self.cy >= 0.0 && self.cy <= h as f64) {
                return Err(ImagingError::InvalidIntrinsics(format!(
                    "principal point ({}, {}) outside {w}x{h} sensor",
                    self.cx, self.cy
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn to_pixel(&self, xn: f64, yn: f64) -> Point2 {
        Point2::new(self.fx * xn + self.cx, self.fy * yn + self.cy)
    }

    #[inline]
    pub fn to_normalized(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy)
    }
}

/// Radial fisheye coefficients acting on the incidence angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FisheyeDistortion {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl FisheyeDistortion {
    pub const NONE: FisheyeDistortion = FisheyeDistortion { k1: 0.0, k2: 0.0, k3: 0.0, k4: 0.0 };

    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64) -> Result<Self, ImagingError> {
        let d = Self { k1, k2, k3, k4 };
        if [k1, k2, k3, k4].iter().all(|k| k.is_finite()) {
            Ok(d)
        } else {
            Err(ImagingError::InvalidDistortion)
        }
    }

    /// θ' = θ (1 + k1 θ² + k2 θ⁴ + k3 θ⁶ + k4 θ⁸)
    #[inline]
    pub fn distort_angle(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        theta * (1.0 + t2 * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * self.k4))))
    }

    #[inline]
    fn distort_angle_derivative(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        1.0 + t2 * (3.0 * self.k1 + t2 * (5.0 * self.k2 + t2 * (7.0 * self.k3 + t2 * 9.0 * self.k4)))
    }

    /// Ratio θ'/r for a normalized radius `r`. Small radii use the series of
    /// atan(r)/r so the principal point maps exactly with ratio 1.
    #[inline]
    pub fn radial_scale(&self, r: f64) -> f64 {
        let atan_over_r = if r < 1e-4 {
            let r2 = r * r;
            1.0 - r2 / 3.0 + r2 * r2 / 5.0 - r2 * r2 * r2 / 7.0
        } else {
            r.atan() / r
        };
        let theta = r * atan_over_r;
        let t2 = theta * theta;
        atan_over_r * (1.0 + t2 * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * self.k4))))
    }

    /// Maps undistorted normalized coordinates to distorted normalized ones.
    #[inline]
    pub fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let s = self.radial_scale(x.hypot(y));
        (x * s, y * s)
    }

    /// Inverts the angle polynomial with Newton iterations. Returns `None`
    /// when the distorted angle lies beyond the monotone range of the
    /// polynomial or beyond the 90° horizon.
    pub fn undistort_angle(&self, theta_d: f64) -> Option<f64> {
        if theta_d == 0.0 {
            return Some(0.0);
        }
        let mut theta = theta_d;
        for _ in 0..30 {
            let f = self.distort_angle(theta) - theta_d;
            let df = self.distort_angle_derivative(theta);
            if df <= 1e-12 {
                return None;
            }
            let step = f / df;
            theta -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let ok = theta.is_finite()
            && (0.0..std::f64::consts::FRAC_PI_2).contains(&theta)
            && (self.distort_angle(theta) - theta_d).abs() < 1e-9
            && self.distort_angle_derivative(theta) > 0.0;
        ok.then_some(theta)
    }

    /// Maps distorted normalized coordinates back to the undistorted plane.
    pub fn undistort_normalized(&self, xd: f64, yd: f64) -> Option<(f64, f64)> {
        let theta_d = xd.hypot(yd);
        if theta_d == 0.0 {
            return Some((0.0, 0.0));
        }
        let theta = self.undistort_angle(theta_d)?;
        let s = theta.tan() / theta_d;
        Some((xd * s, yd * s))
    }
}

/// Extrinsics: camera = R · world + T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, ImagingError> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho_err > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(ImagingError::InvalidRotation { orthogonality_error: ortho_err, determinant: det });
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn transform(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Inverse transform, camera frame to world frame.
    #[inline]
    pub fn inverse_transform(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (cam - self.translation)
    }
}

/// Projects a world point through the pose, the fisheye angle model and
/// the intrinsics.
pub fn project_fisheye(
    world: &Vector3<f64>,
    pose: &RigidPose,
    intr: &CameraIntrinsics,
    dist: &FisheyeDistortion,
) -> Result<Point2, ImagingError> {
    let cam = pose.transform(world);
    if cam.z.is_nan() || cam.z <= 0.0 {
        return Err(ImagingError::PointBehindCamera { z: cam.z });
    }
    let (xd, yd) = dist.distort_normalized(cam.x / cam.z, cam.y / cam.z);
    Ok(intr.to_pixel(xd, yd))
}

/// Per-pixel source coordinates for a backward remap. Reused for every
/// frame that shares the same camera model.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapGrid {
    width: usize,
    height: usize,
    /// Source (x, y) per output pixel; NaN marks an unmappable pixel.
    coords: Vec<(f32, f32)>,
}

impl RemapGrid {
    /// Grid for rectification: each output (pinhole) pixel reads the input
    /// at its forward-distorted location.
    pub fn undistort(width: usize, height: usize, intr: &CameraIntrinsics, dist: &FisheyeDistortion) -> RemapGrid {
        let mut coords = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                let (xn, yn) = intr.to_normalized(Point2::new(u as f64, v as f64));
                let (xd, yd) = dist.distort_normalized(xn, yn);
                let p = intr.to_pixel(xd, yd);
                coords.push((p.x as f32, p.y as f32));
            }
        }
        RemapGrid { width, height, coords }
    }

    /// Grid for synthesizing a distorted view from an undistorted image.
    pub fn distort(width: usize, height: usize, intr: &CameraIntrinsics, dist: &FisheyeDistortion) -> RemapGrid {
        let mut coords = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                let (xd, yd) = intr.to_normalized(Point2::new(u as f64, v as f64));
                match dist.undistort_normalized(xd, yd) {
                    Some((xn, yn)) => {
                        let p = intr.to_pixel(xn, yn);
                        coords.push((p.x as f32, p.y as f32));
                    }
                    None => coords.push((f32::NAN, f32::NAN)),
                }
            }
        }
        RemapGrid { width, height, coords }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn source(&self, x: usize, y: usize) -> (f32, f32) {
        self.coords[y * self.width + x]
    }

    pub fn apply_gray(&self, input: &GrayImage, fill: f32) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            let (sx, sy) = self.source(x, y);
            input.sample_or(sx as f64, sy as f64, fill)
        })
    }

    pub fn apply_rgb(&self, input: &RgbImage, fill: [u8; 3]) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let (sx, sy) = self.source(x, y);
            input.sample_bilinear(sx as f64, sy as f64).unwrap_or(fill)
        })
    }
}

/// Rectifies a fisheye frame into the pinhole image with the same
/// intrinsics. Builds a one-off grid; pipelines should hold a
/// [`RemapGrid`] instead.
pub fn undistort_image(frame: &GrayImage, intr: &CameraIntrinsics, dist: &FisheyeDistortion, fill: f32) -> GrayImage {
    RemapGrid::undistort(frame.width(), frame.height(), intr, dist).apply_gray(frame, fill)
}

/// Inverse of [`undistort_image`]: renders what the fisheye sensor would
/// record of an undistorted image.
pub fn distort_image(frame: &GrayImage, intr: &CameraIntrinsics, dist: &FisheyeDistortion, fill: f32) -> GrayImage {
    RemapGrid::distort(frame.width(), frame.height(), intr, dist).apply_gray(frame, fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let intr = CameraIntrinsics::new(210.0, 205.0, 160.5, 120.25).unwrap();
        let dist = FisheyeDistortion::new(0.3, -0.1, 0.05, -0.01).unwrap();
        let p = project_fisheye(&Vector3::new(0.0, 0.0, 3.0), &RigidPose::identity(), &intr, &dist).unwrap();
        assert_eq!(p, Point2::new(160.5, 120.25));
    }

    #[test]
    fn zero_coefficients_give_theta_mapping() {
        let p = project_fisheye(&Vector3::new(1.0, 0.0, 1.0), &RigidPose::identity(), &intr(), &FisheyeDistortion::NONE).unwrap();
        assert!((p.x - 100.0 * 1f64.atan()).abs() < 1e-12);
        assert!((p.x - 78.5398).abs() < 1e-4);
        assert_eq!(p.y, 0.0);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let err = project_fisheye(&Vector3::new(0.0, 0.0, -1.0), &RigidPose::identity(), &intr(), &FisheyeDistortion::NONE);
        assert!(matches!(err, Err(ImagingError::PointBehindCamera { .. })));
        let err = project_fisheye(&Vector3::new(1.0, 0.0, 0.0), &RigidPose::identity(), &intr(), &FisheyeDistortion::NONE);
        assert!(matches!(err, Err(ImagingError::PointBehindCamera { .. })));
    }

    #[test]
    fn pose_rejects_non_rotations() {
        let scaled = Matrix3::identity() * 1.01;
        assert!(RigidPose::new(scaled, Vector3::zeros()).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidPose::new(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn small_radius_series_is_continuous() {
        let d = FisheyeDistortion::new(0.2, 0.1, 0.0, 0.0).unwrap();
        let below = d.radial_scale(0.99999e-4);
        let above = d.radial_scale(1.00001e-4);
        assert!((below - above).abs() < 1e-12);
        assert_eq!(d.radial_scale(0.0), 1.0);
    }

    #[test]
    fn principal_pixel_survives_undistortion() {
        let intr = CameraIntrinsics::new(80.0, 80.0, 20.0, 15.0).unwrap();
        let dist = FisheyeDistortion::new(-0.05, 0.01, 0.0, 0.0).unwrap();
        let mut img = GrayImage::new(41, 31, 0.0);
        img.set(20, 15, 255.0);
        let out = undistort_image(&img, &intr, &dist, 0.0);
        assert_eq!(out.get(20, 15), 255.0);
    }

    proptest! {
        #[test]
        fn angle_inverse_roundtrips(theta in 0.0f64..1.2, k1 in -0.05f64..0.05, k2 in -0.01f64..0.01) {
            let d = FisheyeDistortion::new(k1, k2, 0.0, 0.0).unwrap();
            let td = d.distort_angle(theta);
            let back = d.undistort_angle(td).unwrap();
            prop_assert!((back - theta).abs() < 1e-9);
        }
    }
}
