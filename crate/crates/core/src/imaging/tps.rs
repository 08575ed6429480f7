//! Thin-plate spline fitting and backward warping.
//!
//! The warp maps output coordinates to input coordinates, so applying it
//! to an image pulls each output pixel from `f(p)` in the source. Flattening
//! a curved page means fitting with `src` on the flat target grid and `dst`
//! at the observed (curved) locations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::geometry::Point2;
use crate::raster::GrayImage;

/// U(r) = r² log r with U(0) = 0, written in terms of r².
#[inline]
pub fn tps_kernel_sq(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsWarp {
    pub control_points: Vec<(Point2, Point2)>,
    /// Non-affine coefficients, one 2-vector per control point.
    pub weights: Vec<[f64; 2]>,
    /// `[[a_xx, a_xy, b_x], [a_yx, a_yy, b_y]]`.
    pub affine: [[f64; 3]; 2],
    pub lambda: f64,
}

impl TpsWarp {
    pub fn identity() -> Self {
        Self { control_points: Vec::new(), weights: Vec::new(), affine: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], lambda: 0.0 }
    }

    #[inline]
    pub fn eval(&self, p: Point2) -> Point2 {
        let a = &self.affine;
        let mut x = a[0][0] * p.x + a[0][1] * p.y + a[0][2];
        let mut y = a[1][0] * p.x + a[1][1] * p.y + a[1][2];
        for ((src, _), w) in self.control_points.iter().zip(&self.weights) {
            let dx = p.x - src.x;
            let dy = p.y - src.y;
            let u = tps_kernel_sq(dx * dx + dy * dy);
            x += w[0] * u;
            y += w[1] * u;
        }
        Point2::new(x, y)
    }

    /// Bending energy, wᵀKw summed over both output coordinates (the
    /// integral in the smoothing objective up to a constant factor).
    pub fn bending_energy(&self) -> f64 {
        let n = self.control_points.len();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (pi, pj) = (self.control_points[i].0, self.control_points[j].0);
                let k = tps_kernel_sq((pi.x - pj.x).powi(2) + (pi.y - pj.y).powi(2));
                e += k * (self.weights[i][0] * self.weights[j][0] + self.weights[i][1] * self.weights[j][1]);
            }
        }
        e
    }

    /// Largest violation of Σw = 0, Σw·x = 0, Σw·y = 0.
    pub fn side_condition_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..2 {
            let mut s = 0.0;
            let mut sx = 0.0;
            let mut sy = 0.0;
            for ((src, _), w) in self.control_points.iter().zip(&self.weights) {
                s += w[c];
                sx += w[c] * src.x;
                sy += w[c] * src.y;
            }
            worst = worst.max(s.abs()).max(sx.abs()).max(sy.abs());
        }
        worst
    }
}

/// Fits the smoothing thin-plate spline through `pairs` (src → dst).
/// `lambda = 0` interpolates exactly; large `lambda` tends to the
/// least-squares affine map.
pub fn fit_tps(pairs: &[(Point2, Point2)], lambda: f64) -> Result<TpsWarp, ImagingError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ImagingError::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let n = pairs.len();
    if n < 3 || is_collinear(pairs.iter().map(|(s, _)| *s)) {
        return Err(ImagingError::DegenerateConfiguration);
    }

    let m = n + 3;
    let mut lhs = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        let pi = pairs[i].0;
        for j in 0..n {
            let pj = pairs[j].0;
            lhs[(i, j)] = tps_kernel_sq((pi.x - pj.x).powi(2) + (pi.y - pj.y).powi(2));
        }
        lhs[(i, i)] += lambda;
        lhs[(i, n)] = 1.0;
        lhs[(i, n + 1)] = pi.x;
        lhs[(i, n + 2)] = pi.y;
        lhs[(n, i)] = 1.0;
        lhs[(n + 1, i)] = pi.x;
        lhs[(n + 2, i)] = pi.y;
    }
    let mut rhs = DMatrix::<f64>::zeros(m, 2);
    for (i, (_, dst)) in pairs.iter().enumerate() {
        rhs[(i, 0)] = dst.x;
        rhs[(i, 1)] = dst.y;
    }
    let sol = lhs.lu().solve(&rhs).ok_or(ImagingError::DegenerateConfiguration)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(ImagingError::DegenerateConfiguration);
    }

    let weights = (0..n).map(|i| [sol[(i, 0)], sol[(i, 1)]]).collect();
    let affine = [
        [sol[(n + 1, 0)], sol[(n + 2, 0)], sol[(n, 0)]],
        [sol[(n + 1, 1)], sol[(n + 2, 1)], sol[(n, 1)]],
    ];
    Ok(TpsWarp { control_points: pairs.to_vec(), weights, affine, lambda })
}

/// Backward warp: output pixel `p` takes the input value at `warp.eval(p)`.
pub fn apply_tps(warp: &TpsWarp, frame: &GrayImage, fill: f32) -> GrayImage {
    GrayImage::from_fn(frame.width(), frame.height(), |x, y| {
        let s = warp.eval(Point2::new(x as f64, y as f64));
        frame.sample_or(s.x, s.y, fill)
    })
}

fn is_collinear(points: impl Iterator<Item = Point2>) -> bool {
    let pts: Vec<Point2> = points.collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in &pts {
        sxx += (p.x - mx).powi(2);
        syy += (p.y - my).powi(2);
        sxy += (p.x - mx) * (p.y - my);
    }
    let cov = DMatrix::from_row_slice(2, 2, &[sxx, sxy, sxy, syy]);
    let eig = DVector::from_vec(cov.symmetric_eigenvalues().iter().copied().collect());
    let max = eig.max();
    max <= 0.0 || eig.min() <= 1e-12 * max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners() -> Vec<Point2> {
        vec![Point2::new(0.0, 0.0), Point2::new(40.0, 0.0), Point2::new(0.0, 30.0), Point2::new(40.0, 30.0)]
    }

    #[test]
    fn identity_pairs_give_identity_warp() {
        for lambda in [0.0, 0.5, 100.0] {
            let pairs: Vec<_> = corners().into_iter().chain([Point2::new(17.0, 9.0)]).map(|p| (p, p)).collect();
            let w = fit_tps(&pairs, lambda).unwrap();
            let a = w.affine;
            assert!((a[0][0] - 1.0).abs() < 1e-10 && a[0][1].abs() < 1e-10 && a[0][2].abs() < 1e-9);
            assert!(a[1][0].abs() < 1e-10 && (a[1][1] - 1.0).abs() < 1e-10 && a[1][2].abs() < 1e-9);
            assert!(w.weights.iter().all(|v| v[0].abs() < 1e-10 && v[1].abs() < 1e-10));
        }
    }

    #[test]
    fn pure_translation_is_affine_only() {
        let pairs: Vec<_> = corners().into_iter().map(|p| (p, Point2::new(p.x + 5.0, p.y - 3.0))).collect();
        let w = fit_tps(&pairs, 0.0).unwrap();
        assert!((w.affine[0][2] - 5.0).abs() < 1e-9);
        assert!((w.affine[1][2] + 3.0).abs() < 1e-9);
        assert!(w.weights.iter().all(|v| v[0].abs() < 1e-10 && v[1].abs() < 1e-10));
        assert!(w.bending_energy().abs() < 1e-10);
    }

    #[test]
    fn collinear_sources_are_degenerate() {
        let pairs: Vec<_> = (0..5).map(|i| Point2::new(i as f64, 2.0 * i as f64)).map(|p| (p, p)).collect();
        assert!(matches!(fit_tps(&pairs, 0.0), Err(ImagingError::DegenerateConfiguration)));
        let two = [(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)), (Point2::new(1.0, 1.0), Point2::new(1.0, 1.0))];
        assert!(matches!(fit_tps(&two, 0.0), Err(ImagingError::DegenerateConfiguration)));
    }

    #[test]
    fn identity_warp_leaves_image_untouched() {
        let img = GrayImage::from_fn(12, 9, |x, y| ((x * 7 + y * 13) % 256) as f32);
        assert_eq!(apply_tps(&TpsWarp::identity(), &img, 0.0), img);
    }

    #[test]
    fn translation_warp_moves_impulse_opposite() {
        let pairs: Vec<_> = corners().into_iter().map(|p| (p, Point2::new(p.x + 5.0, p.y - 3.0))).collect();
        let w = fit_tps(&pairs, 0.0).unwrap();
        let mut img = GrayImage::new(41, 31, 0.0);
        img.set(20, 10, 255.0);
        let out = apply_tps(&w, &img, 0.0);
        assert!((out.get(15, 13) - 255.0).abs() < 1e-3, "impulse should land at (15, 13)");
        assert!(out.get(20, 10).abs() < 1e-3);
    }

    #[test]
    fn large_lambda_tends_to_affine() {
        let pairs: Vec<_> = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0), (5.0, 5.0)]
            .iter()
            .map(|&(x, y)| (Point2::new(x, y), Point2::new(x, y + if x == 5.0 { 2.0 } else { 0.0 })))
            .collect();
        let soft = fit_tps(&pairs, 0.0).unwrap().bending_energy();
        let stiff = fit_tps(&pairs, 1e6).unwrap().bending_energy();
        assert!(stiff < soft * 1e-4);
    }
}
