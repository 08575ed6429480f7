//! FAST-9 corner detection with non-maximum suppression.

use crate::geometry::Point2;
use crate::raster::{GrayImage, Mask};

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC: usize = 9;

/// A detected corner with its suppression score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: usize,
    pub y: usize,
    pub score: f32,
}

impl Corner {
    pub fn point(&self) -> Point2 {
        Point2::new(self.x as f64, self.y as f64)
    }
}

fn has_arc(flags: u32) -> bool {
    // Duplicate the 16 bits so wrap-around arcs become contiguous runs.
    let f = flags | (flags << 16);
    let mut run = f;
    for _ in 1..ARC {
        run &= run >> 1;
    }
    run != 0
}

fn corner_score(img: &GrayImage, x: usize, y: usize, threshold: f32) -> Option<f32> {
    let c = img.get(x, y);
    let ring = |i: usize| {
        let (dx, dy) = CIRCLE[i];
        img.get((x as isize + dx) as usize, (y as isize + dy) as usize)
    };
    // Any 9-arc contains at least two of the four compass points.
    let compass = [ring(0), ring(4), ring(8), ring(12)];
    let brighter = compass.iter().filter(|&&v| v > c + threshold).count();
    let darker = compass.iter().filter(|&&v| v < c - threshold).count();
    if brighter < 2 && darker < 2 {
        return None;
    }
    let (mut up, mut down) = (0u32, 0u32);
    let mut values = [0f32; 16];
    for (i, v) in values.iter_mut().enumerate() {
        *v = ring(i);
        if *v > c + threshold {
            up |= 1 << i;
        } else if *v < c - threshold {
            down |= 1 << i;
        }
    }
    if !has_arc(up) && !has_arc(down) {
        return None;
    }
    // Sum of absolute differences over the pixels exceeding the threshold.
    let score = values.iter().map(|v| (v - c).abs()).filter(|d| *d > threshold).map(|d| d - threshold).sum();
    Some(score)
}

/// FAST-9 corners restricted to `mask` (when given). Pixels within three of
/// the border are never corners.
pub fn fast_corners(img: &GrayImage, threshold: f32, mask: Option<&Mask>, nonmax: bool) -> Vec<Corner> {
    let (w, h) = (img.width(), img.height());
    if w < 7 || h < 7 {
        return Vec::new();
    }
    let mut scores = vec![0f32; w * h];
    let mut found = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            if let Some(m) = mask {
                if !m.get(x, y) {
                    continue;
                }
            }
            if let Some(s) = corner_score(img, x, y, threshold) {
                scores[y * w + x] = s;
                found.push(Corner { x, y, score: s });
            }
        }
    }
    if !nonmax {
        return found;
    }
    found
        .into_iter()
        .filter(|c| {
            for ny in c.y - 1..=c.y + 1 {
                for nx in c.x - 1..=c.x + 1 {
                    if (nx, ny) == (c.x, c.y) {
                        continue;
                    }
                    let s = scores[ny * w + nx];
                    // Ties keep the first pixel in raster order.
                    if s > c.score || (s == c.score && (ny, nx) < (c.y, c.x)) {
                        return false;
                    }
                }
            }
            true
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_detection_handles_wraparound() {
        assert!(has_arc(0b1111_1111_1000_0000));
        assert!(has_arc(0b1111_0000_0001_1111));
        assert!(!has_arc(0b0111_1111_0000_0000));
        assert!(!has_arc(0b1010_1010_1010_1010));
    }

    #[test]
    fn square_has_four_corners_and_flat_image_none() {
        let img = GrayImage::from_fn(40, 40, |x, y| if (10..30).contains(&x) && (10..30).contains(&y) { 0.0 } else { 255.0 });
        let corners = fast_corners(&img, 20.0, None, true);
        assert_eq!(corners.len(), 4, "{corners:?}");
        for c in &corners {
            assert!((c.x as isize - 10).abs() <= 1 || (c.x as isize - 29).abs() <= 1);
            assert!((c.y as isize - 10).abs() <= 1 || (c.y as isize - 29).abs() <= 1);
        }
        assert!(fast_corners(&GrayImage::new(40, 40, 128.0), 20.0, None, true).is_empty());
    }

    #[test]
    fn mask_restricts_detection() {
        let img = GrayImage::from_fn(40, 40, |x, y| if (10..30).contains(&x) && (10..30).contains(&y) { 0.0 } else { 255.0 });
        let mask = Mask::from_fn(40, 40, |x, _| x < 20);
        let corners = fast_corners(&img, 20.0, Some(&mask), true);
        assert_eq!(corners.len(), 2);
        assert!(corners.iter().all(|c| c.x < 20));
    }
}
