//! Shi-Tomasi corner selection.

use super::MotionConfig;
use crate::geometry::Point2;
use crate::raster::GrayImage;

/// Minimum eigenvalue of the gradient structure tensor summed over a
/// (2r+1)^2 block, per pixel. Gradients are central differences on
/// intensities scaled to [0, 1].
pub fn min_eigen_map(gray: &GrayImage, radius: usize) -> GrayImage {
    let (w, h) = (gray.width(), gray.height());
    let mut gxx = vec![0f32; w * h];
    let mut gyy = vec![0f32; w * h];
    let mut gxy = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let ix = (gray.get_clamped(xi + 1, yi) - gray.get_clamped(xi - 1, yi)) / (2.0 * 255.0);
            let iy = (gray.get_clamped(xi, yi + 1) - gray.get_clamped(xi, yi - 1)) / (2.0 * 255.0);
            let i = y * w + x;
            gxx[i] = ix * ix;
            gyy[i] = iy * iy;
            gxy[i] = ix * iy;
        }
    }
    let r = radius as isize;
    GrayImage::from_fn(w, h, |x, y| {
        let (mut a, mut b, mut c) = (0f32, 0f32, 0f32);
        for dy in -r..=r {
            for dx in -r..=r {
                let (sx, sy) = ((x as isize + dx).clamp(0, w as isize - 1), (y as isize + dy).clamp(0, h as isize - 1));
                let i = sy as usize * w + sx as usize;
                a += gxx[i];
                b += gyy[i];
                c += gxy[i];
            }
        }
        let half_trace = 0.5 * (a + b);
        let disc = (0.25 * (a - b) * (a - b) + c * c).sqrt();
        (half_trace - disc).max(0.0)
    })
}

/// Up to `max_count` strongest corners, response-sorted, at least
/// `min_distance` apart and above `quality_level` times the best response.
pub fn detect_features(gray: &GrayImage, max_count: usize, cfg: &MotionConfig) -> Vec<Point2> {
    if max_count == 0 || gray.is_empty() {
        return Vec::new();
    }
    let resp = min_eigen_map(gray, cfg.block_radius);
    let best = resp.data().iter().copied().fold(0f32, f32::max);
    if best <= 1e-12 {
        return Vec::new();
    }
    let floor = best * cfg.quality_level as f32;
    let (w, h) = (gray.width(), gray.height());
    let mut candidates = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let v = resp.get(x, y);
            if v < floor || v <= 0.0 {
                continue;
            }
            let is_max = (y - 1..=y + 1).all(|ny| (x - 1..=x + 1).all(|nx| resp.get(nx, ny) <= v));
            if is_max {
                candidates.push((v, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    let min_d2 = cfg.min_distance * cfg.min_distance;
    let mut chosen: Vec<Point2> = Vec::new();
    for (_, x, y) in candidates {
        let p = Point2::new(x as f64, y as f64);
        if chosen.iter().all(|q| (q.x - p.x).powi(2) + (q.y - p.y).powi(2) >= min_d2) {
            chosen.push(p);
            if chosen.len() == max_count {
                break;
            }
        }
    }
    chosen
}
