//! Least-squares affine motion of a tracked point set.

use nalgebra::{DMatrix, Matrix2, Vector2};
use super::{FlowField, MotionError};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMotion {
    pub a: Matrix2<f64>,
    /// Translation in pixels.
    pub b: Vector2<f64>,
    pub inlier_count: usize,
    /// Translation velocity when a pixel scale is known.
    pub translation_mm_per_s: Option<Vector2<f64>>,
}

impl AffineMotion {
    pub fn apply(&self, p: Point2) -> Point2 {
        let v = self.a * Vector2::new(p.x, p.y) + self.b;
        Point2::new(v.x, v.y)
    }

    /// Rotation angle of the linear part (radians).
    pub fn rotation(&self) -> f64 {
        (self.a[(1, 0)] - self.a[(0, 1)]).atan2(self.a[(0, 0)] + self.a[(1, 1)])
    }
}

fn is_collinear(pts: &[(Point2, Point2)]) -> bool {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.0.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (p, _) in pts {
        sxx += (p.x - mx).powi(2);
        syy += (p.y - my).powi(2);
        sxy += (p.x - mx) * (p.y - my);
    }
    let half = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let (lo, hi) = (half - disc, half + disc);
    hi <= 0.0 || lo <= 1e-10 * hi
}

/// Least-squares [A | b] minimizing sum |A src + b - dst|^2.
pub fn fit_affine(pairs: &[(Point2, Point2)]) -> Result<(Matrix2<f64>, Vector2<f64>), MotionError> {
    if pairs.len() < 3 {
        return Err(MotionError::InsufficientPoints { got: pairs.len() });
    }
    if is_collinear(pairs) {
        return Err(MotionError::DegenerateGeometry);
    }
    // Center the sources for conditioning.
    let n = pairs.len() as f64;
    let cx = pairs.iter().map(|p| p.0.x).sum::<f64>() / n;
    let cy = pairs.iter().map(|p| p.0.y).sum::<f64>() / n;
    let design = DMatrix::from_fn(pairs.len(), 3, |i, j| match j {
        0 => pairs[i].0.x - cx,
        1 => pairs[i].0.y - cy,
        _ => 1.0,
    });
    let rhs = DMatrix::from_fn(pairs.len(), 2, |i, j| if j == 0 { pairs[i].1.x } else { pairs[i].1.y });
    let sol = design.svd(true, true).solve(&rhs, 1e-14).map_err(|_| MotionError::DegenerateGeometry)?;
    let a = Matrix2::new(sol[(0, 0)], sol[(1, 0)], sol[(0, 1)], sol[(1, 1)]);
    let b = Vector2::new(sol[(2, 0)], sol[(2, 1)]) - a * Vector2::new(cx, cy);
    Ok((a, b))
}

pub fn residuals(pairs: &[(Point2, Point2)], a: &Matrix2<f64>, b: &Vector2<f64>) -> Vec<f64> {
    pairs.iter().map(|(s, d)| (a * Vector2::new(s.x, s.y) + b - Vector2::new(d.x, d.y)).norm()).collect()
}

/// Affine motion of the tracked points with one round of trimming at twice
/// the RMS residual. `mm_per_pixel` converts the translation to a velocity.
pub fn estimate_motion(flow: &FlowField, mm_per_pixel: Option<f64>) -> Result<AffineMotion, MotionError> {
    let pairs: Vec<(Point2, Point2)> = flow.tracked_pairs().collect();
    let (mut a, mut b) = fit_affine(&pairs)?;
    let res = residuals(&pairs, &a, &b);
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    let mut inliers = pairs.len();
    if rms > 1e-9 {
        let kept: Vec<_> = pairs.iter().zip(&res).filter(|(_, r)| **r <= 2.0 * rms).map(|(p, _)| *p).collect();
        if kept.len() < pairs.len() {
            if let Ok((a2, b2)) = fit_affine(&kept) {
                a = a2;
                b = b2;
                inliers = kept.len();
            }
        }
    }
    let translation_mm_per_s = match mm_per_pixel {
        Some(s) if flow.frame_interval > 0.0 => Some(b / flow.frame_interval * s),
        _ => None,
    };
    Ok(AffineMotion { a, b, inlier_count: inliers, translation_mm_per_s })
}
