//! Progressive probabilistic Hough transform for line segments.
//!
//! Edge points vote in random order; only a configurable fraction of them
//! vote at all. Whenever an accumulator cell reaches the vote threshold the
//! line through the current point is walked in the full edge map, the
//! pixels along it are consumed and, if the run is long enough, reported as
//! a segment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point2;
use crate::raster::Mask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughParams {
    /// Fraction of edge points that vote, in (0, 1].
    pub sample_fraction: f64,
    pub theta_step: f64,
    pub min_votes: usize,
    pub min_length: f64,
    pub max_gap: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point2,
    pub end: Point2,
    /// Direction angle in (-pi/2, pi/2], from a least-squares fit of the
    /// consumed pixels.
    pub angle: f64,
    pub pixel_count: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.start.distance(&self.end)
    }
}

pub fn normalize_line_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = a % PI;
    if a <= -PI / 2.0 {
        a += PI;
    } else if a > PI / 2.0 {
        a -= PI;
    }
    a
}

/// Total-least-squares direction of a point set.
pub fn fit_direction(points: &[(usize, usize)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 as f64 - mx, p.1 as f64 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    normalize_line_angle(0.5 * (2.0 * sxy).atan2(sxx - syy))
}

pub fn probabilistic_hough(edges: &Mask, p: &HoughParams) -> Vec<Segment> {
    let (w, h) = (edges.width(), edges.height());
    let n_theta = (std::f64::consts::PI / p.theta_step).round().max(1.0) as usize;
    let max_rho = ((w * w + h * h) as f64).sqrt().ceil() as isize;
    let n_rho = (2 * max_rho + 1) as usize;
    let trig: Vec<(f64, f64)> = (0..n_theta).map(|i| (i as f64 * p.theta_step).sin_cos()).collect();
    let mut acc = vec![0u32; n_theta * n_rho];
    let mut mask = edges.clone();
    let mut voted = Mask::new(w, h, false);

    let mut points: Vec<(usize, usize)> =
        (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| edges.get(x, y)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    points.shuffle(&mut rng);
    let n_vote = ((points.len() as f64 * p.sample_fraction.clamp(0.0, 1.0)).ceil() as usize).min(points.len());

    let rho_index = |x: usize, y: usize, t: usize| -> usize {
        let (s, c) = trig[t];
        ((x as f64 * c + y as f64 * s).round() as isize + max_rho) as usize
    };

    let mut segments = Vec::new();
    for &(x, y) in &points[..n_vote] {
        if !mask.get(x, y) {
            continue;
        }
        voted.set(x, y, true);
        let mut best = (0u32, 0usize);
        for t in 0..n_theta {
            let cell = &mut acc[t * n_rho + rho_index(x, y, t)];
            *cell += 1;
            if *cell > best.0 {
                best = (*cell, t);
            }
        }
        if (best.0 as usize) < p.min_votes {
            continue;
        }
        let (s, c) = trig[best.1];
        // Line direction is perpendicular to the normal (c, s).
        let run = walk_line(&mask, x, y, -s, c, p.max_gap);
        let good = run.len() >= 2 && {
            let (a, b) = (run[0], run[run.len() - 1]);
            let len = ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2)).sqrt();
            len >= p.min_length
        };
        for &(px, py) in &run {
            if good && voted.get(px, py) {
                for t in 0..n_theta {
                    acc[t * n_rho + rho_index(px, py, t)] -= 1;
                }
                voted.set(px, py, false);
            }
            mask.set(px, py, false);
        }
        if good {
            let (a, b) = (run[0], run[run.len() - 1]);
            segments.push(Segment {
                start: Point2::new(a.0 as f64, a.1 as f64),
                end: Point2::new(b.0 as f64, b.1 as f64),
                angle: fit_direction(&run),
                pixel_count: run.len(),
            });
        }
    }
    segments
}

/// Collects edge pixels along the line through (x0, y0) with direction
/// (dx, dy), in both directions, stopping after `max_gap` consecutive
/// steps without an edge pixel. A one-pixel perpendicular tolerance absorbs
/// rasterization staircases. The result is ordered from one end to the
/// other.
fn walk_line(mask: &Mask, x0: usize, y0: usize, dx: f64, dy: f64, max_gap: f64) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    // Step so that the major axis advances one pixel per step.
    let major = dx.abs().max(dy.abs());
    let (sx, sy) = (dx / major, dy / major);
    let (nx, ny) = if dx.abs() >= dy.abs() { (0isize, 1isize) } else { (1, 0) };
    let mut halves: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
    for (k, dir) in [1.0f64, -1.0].into_iter().enumerate() {
        let mut gap = 0usize;
        // Track the line through the last found pixel so small angle errors
        // in the accumulator do not make the walk drift off the line.
        let (mut ox, mut oy) = (x0 as f64, y0 as f64);
        let mut step = 0usize;
        loop {
            step += 1;
            let fx = ox + dir * sx * step as f64;
            let fy = oy + dir * sy * step as f64;
            let (ix, iy) = (fx.round() as isize, fy.round() as isize);
            if ix < 0 || iy < 0 || ix >= w || iy >= h {
                break;
            }
            let mut hit = None;
            for o in [0isize, -1, 1] {
                let (cx, cy) = (ix + o * nx, iy + o * ny);
                if cx >= 0 && cy >= 0 && cx < w && cy < h && mask.get(cx as usize, cy as usize) {
                    hit = Some((cx as usize, cy as usize));
                    break;
                }
            }
            match hit {
                Some(px) => {
                    halves[k].push(px);
                    gap = 0;
                    if (px.0 as isize, px.1 as isize) != (ix, iy) {
                        // Re-anchor halfway toward the found pixel.
                        ox += (px.0 as f64 - fx) * 0.5;
                        oy += (px.1 as f64 - fy) * 0.5;
                    }
                }
                None => {
                    gap += 1;
                    if gap as f64 > max_gap {
                        break;
                    }
                }
            }
        }
    }
    let [fwd, back] = halves;
    let mut run: Vec<(usize, usize)> = back.into_iter().rev().collect();
    run.push((x0, y0));
    run.extend(fwd);
    run
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> HoughParams {
        HoughParams { sample_fraction: 1.0, theta_step: 0.5f64.to_radians(), min_votes: 10, min_length: 40.0, max_gap: 3.0, seed: 1 }
    }

    #[test]
    fn finds_a_tilted_line() {
        let mut m = Mask::new(200, 100, false);
        let angle = 5f64.to_radians();
        for x in 10..190 {
            let y = 50.0 + (x as f64 - 100.0) * angle.tan();
            m.set(x, y.round() as usize, true);
        }
        let segs = probabilistic_hough(&m, &params());
        assert_eq!(segs.len(), 1, "{segs:?}");
        assert!((segs[0].angle - angle).abs() < 0.2f64.to_radians(), "{}", segs[0].angle.to_degrees());
        assert!(segs[0].length() > 170.0);
    }

    #[test]
    fn short_runs_and_empty_masks_give_nothing() {
        assert!(probabilistic_hough(&Mask::new(50, 50, false), &params()).is_empty());
        let mut m = Mask::new(100, 100, false);
        for x in 10..30 {
            m.set(x, 20, true);
        }
        assert!(probabilistic_hough(&m, &params()).is_empty());
    }

    #[test]
    fn angle_normalization_range() {
        use std::f64::consts::PI;
        assert_eq!(normalize_line_angle(PI / 2.0), PI / 2.0);
        assert!((normalize_line_angle(-PI / 2.0) - PI / 2.0).abs() < 1e-12);
        assert!((normalize_line_angle(PI - 0.1) + 0.1).abs() < 1e-12);
    }
}
