//! Synthetic finger camera: a page crop around the fingertip, seen through
//! the fisheye lens, with the blue device wedge in the foreground.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::imaging::{CameraCalibration, CameraIntrinsics, FisheyeDistortion, RemapGrid};
use crate::raster::{GrayImage, Rgb, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerPose {
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_rad: f64,
}

impl FingerPose {
    pub fn new(x_mm: f64, y_mm: f64) -> Self {
        Self { x_mm, y_mm, yaw_rad: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRig {
    pub width: usize,
    pub height: usize,
    /// Page scale of the rectified image.
    pub px_per_mm: f64,
    /// Row of the fingertip in the rectified image, as a fraction of height.
    pub tip_row_fraction: f64,
    pub focal_px: f64,
    pub distortion: FisheyeDistortion,
    /// Render through the fisheye lens; `false` gives a plain pinhole crop.
    pub fisheye: bool,
    /// Additive Gaussian noise, as a fraction of full scale.
    pub noise_sigma: f64,
    pub wedge_half_angle_deg: f64,
    pub wedge_color: Rgb,
    /// Shade outside the page.
    pub background: u8,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            px_per_mm: 8.0,
            tip_row_fraction: 0.85,
            focal_px: 200.0,
            distortion: FisheyeDistortion { k1: 0.05, k2: 0.01, k3: 0.0, k4: 0.0 },
            fisheye: true,
            noise_sigma: 2.0 / 255.0,
            wedge_half_angle_deg: 20.0,
            wedge_color: [20, 40, 200],
            background: 90,
        }
    }
}

impl CameraRig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics { fx: self.focal_px, fy: self.focal_px, cx: self.width as f64 / 2.0, cy: self.height as f64 / 2.0 }
    }

    /// Calibration a pipeline needs to rectify this camera's frames; `None`
    /// for the pinhole rig.
    pub fn calibration(&self) -> Option<CameraCalibration> {
        self.fisheye.then(|| CameraCalibration {
            intrinsics: self.intrinsics(),
            distortion: self.distortion,
            width: self.width,
            height: self.height,
        })
    }

    /// Fingertip location in the rectified image.
    pub fn tip_pixel(&self) -> Point2 {
        Point2::new(self.width as f64 / 2.0, (self.tip_row_fraction * self.height as f64).round())
    }

    /// Page position (mm) seen at rectified pixel `p`.
    pub fn pixel_to_page_mm(&self, pose: &FingerPose, p: Point2) -> Point2 {
        let tip = self.tip_pixel();
        let (dx, dy) = ((p.x - tip.x) / self.px_per_mm, (p.y - tip.y) / self.px_per_mm);
        let (s, c) = pose.yaw_rad.sin_cos();
        Point2::new(pose.x_mm + c * dx - s * dy, pose.y_mm + s * dx + c * dy)
    }

    /// Rectified pixel that sees page position `mm`.
    pub fn page_mm_to_pixel(&self, pose: &FingerPose, mm: Point2) -> Point2 {
        let tip = self.tip_pixel();
        let (dx, dy) = (mm.x - pose.x_mm, mm.y - pose.y_mm);
        let (s, c) = pose.yaw_rad.sin_cos();
        Point2::new(tip.x + (c * dx + s * dy) * self.px_per_mm, tip.y + (-s * dx + c * dy) * self.px_per_mm)
    }
}

/// Camera with its precomputed lens remap.
#[derive(Debug, Clone)]
pub struct CameraSim {
    rig: CameraRig,
    grid: Option<RemapGrid>,
}

impl CameraSim {
    pub fn new(rig: CameraRig) -> Self {
        let grid = rig.fisheye.then(|| RemapGrid::distort(rig.width, rig.height, &rig.intrinsics(), &rig.distortion));
        Self { rig, grid }
    }

    pub fn rig(&self) -> &CameraRig {
        &self.rig
    }

    /// Renders the sensor image for `pose`. `page` is rendered at
    /// `page_dpmm`; `with_device` paints the fingertip wedge.
    pub fn capture(
        &self,
        page: &GrayImage,
        page_dpmm: f64,
        pose: &FingerPose,
        with_device: bool,
        rng: &mut impl Rng,
    ) -> RgbImage {
        let rig = &self.rig;
        let tip = rig.tip_pixel();
        let tan_half = rig.wedge_half_angle_deg.to_radians().tan();
        let bg = rig.background as f32;
        let (s, c) = pose.yaw_rad.sin_cos();
        let k = page_dpmm / rig.px_per_mm;
        let origin_x = pose.x_mm * page_dpmm - 0.5;
        let origin_y = pose.y_mm * page_dpmm - 0.5;
        let shade = |ux: f64, uy: f64| -> Rgb {
            let (dx, dy) = (ux - tip.x, uy - tip.y);
            if with_device && dy >= 0.0 && dx.abs() <= dy * tan_half {
                return rig.wedge_color;
            }
            let px = origin_x + k * (c * dx - s * dy);
            let py = origin_y + k * (s * dx + c * dy);
            let v = page.sample_bilinear(px, py).unwrap_or(bg).round().clamp(0.0, 255.0) as u8;
            [v, v, v]
        };
        let mut img = RgbImage::from_fn(rig.width, rig.height, |x, y| match &self.grid {
            Some(g) => {
                let (sx, sy) = g.source(x, y);
                if sx.is_nan() {
                    [0, 0, 0]
                } else {
                    shade(sx as f64, sy as f64)
                }
            }
            None => shade(x as f64, y as f64),
        });
        if rig.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, rig.noise_sigma * 255.0).expect("finite sigma");
            for y in 0..rig.height {
                for x in 0..rig.width {
                    let p = img.get(x, y);
                    let q = p.map(|v| (v as f64 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8);
                    img.set(x, y, q);
                }
            }
        }
        img
    }
}
