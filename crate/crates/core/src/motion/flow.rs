//! Sparse Lucas-Kanade optical flow.

use serde::{Deserialize, Serialize};

use super::MotionConfig;
use crate::geometry::Point2;
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub src: Point2,
    /// `None` when the point could not be tracked.
    pub dst: Option<Point2>,
}

impl FlowPoint {
    pub fn tracked(&self) -> bool {
        self.dst.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub points: Vec<FlowPoint>,
    /// Seconds between the two frames.
    pub frame_interval: f64,
}

impl FlowField {
    pub fn tracked_pairs(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.points.iter().filter_map(|p| p.dst.map(|d| (p.src, d)))
    }

    pub fn tracked_count(&self) -> usize {
        self.points.iter().filter(|p| p.tracked()).count()
    }
}

fn pyramid(img: &GrayImage, levels: usize) -> Vec<GrayImage> {
    let mut out = vec![img.clone()];
    for _ in 0..levels {
        let next = out.last().unwrap().downsample_half();
        if next.width() < 8 || next.height() < 8 {
            break;
        }
        out.push(next);
    }
    out
}

/// Tracks `points` from `prev` to `next`. Each point solves the windowed
/// brightness-constancy least-squares system, iterating the Gauss-Newton
/// update and, in pyramidal mode, refining coarse-to-fine. A point whose
/// normal matrix has a normalized minimum eigenvalue below the configured
/// threshold, which leaves the image, or which does not return to its start
/// when tracked backwards is marked untracked.
pub fn track_flow(prev: &GrayImage, next: &GrayImage, points: &[Point2], frame_interval: f64, cfg: &MotionConfig) -> FlowField {
    assert_eq!((prev.width(), prev.height()), (next.width(), next.height()), "frames must share dimensions");
    let levels = if cfg.pyramid { cfg.pyramid_levels } else { 0 };
    let pp = pyramid(prev, levels);
    let pn = pyramid(next, levels);
    let tracked = points
        .iter()
        .map(|&src| {
            let dst = track_point(&pp, &pn, src, cfg).filter(|&d| {
                track_point(&pn, &pp, d, cfg).is_some_and(|back| back.distance(&src) <= cfg.max_round_trip_error)
            });
            FlowPoint { src, dst }
        })
        .collect();
    FlowField { points: tracked, frame_interval }
}

fn track_point(pp: &[GrayImage], pn: &[GrayImage], src: Point2, cfg: &MotionConfig) -> Option<Point2> {
    let r = cfg.window_radius as isize;
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut guess = (0.0f64, 0.0f64);
    for level in (0..pp.len()).rev() {
        let s = (1u32 << level) as f64;
        let (prev, next) = (&pp[level], &pn[level]);
        // Level pixels average 2x2 blocks, so their centers sit half a pixel in.
        let (px, py) = ((src.x + 0.5) / s - 0.5, (src.y + 0.5) / s - 0.5);
        // Window samples of the previous frame and its gradient.
        let mut tmpl = Vec::with_capacity(n as usize);
        let (mut gxx, mut gyy, mut gxy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (px + dx as f64, py + dy as f64);
                let i = prev.sample_bilinear(x, y)? as f64 / 255.0;
                let ix = (prev.sample_bilinear(x + 1.0, y)? as f64 - prev.sample_bilinear(x - 1.0, y)? as f64) / (2.0 * 255.0);
                let iy = (prev.sample_bilinear(x, y + 1.0)? as f64 - prev.sample_bilinear(x, y - 1.0)? as f64) / (2.0 * 255.0);
                gxx += ix * ix;
                gyy += iy * iy;
                gxy += ix * iy;
                tmpl.push((i, ix, iy));
            }
        }
        let half_trace = 0.5 * (gxx + gyy);
        let min_eig = half_trace - (0.25 * (gxx - gyy).powi(2) + gxy * gxy).sqrt();
        if min_eig / n < cfg.min_eigen_threshold {
            return None;
        }
        let det = gxx * gyy - gxy * gxy;
        let mut d = guess;
        for _ in 0..cfg.max_iterations {
            let (mut bx, mut by) = (0.0, 0.0);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (i, ix, iy) = tmpl[k];
                    k += 1;
                    let j = next.sample_bilinear(px + dx as f64 + d.0, py + dy as f64 + d.1)? as f64 / 255.0;
                    let it = j - i;
                    bx += ix * it;
                    by += iy * it;
                }
            }
            let ux = -(gyy * bx - gxy * by) / det;
            let uy = -(gxx * by - gxy * bx) / det;
            d.0 += ux;
            d.1 += uy;
            if ux * ux + uy * uy < cfg.epsilon * cfg.epsilon {
                break;
            }
        }
        guess = if level > 0 { (d.0 * 2.0, d.1 * 2.0) } else { d };
    }
    let dst = Point2::new(src.x + guess.0, src.y + guess.1);
    let (w, h) = (pp[0].width() as f64, pp[0].height() as f64);
    (guess.0.is_finite() && guess.1.is_finite() && dst.x >= 0.0 && dst.y >= 0.0 && dst.x <= w - 1.0 && dst.y <= h - 1.0)
        .then_some(dst)
}
