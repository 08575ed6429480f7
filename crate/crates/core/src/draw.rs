//! Minimal raster drawing for overlays and plots.

use crate::font;
use crate::raster::{Rgb, RgbImage};

fn put(img: &mut RgbImage, x: isize, y: isize, c: Rgb) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.set(x as usize, y as usize, c);
    }
}

pub fn line(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgb) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        put(img, (x0 + (x1 - x0) * t).round() as isize, (y0 + (y1 - y0) * t).round() as isize, c);
    }
}

pub fn rect_outline(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgb) {
    line(img, x0, y0, x1, y0, c);
    line(img, x1, y0, x1, y1, c);
    line(img, x1, y1, x0, y1, c);
    line(img, x0, y1, x0, y0, c);
}

pub fn fill_rect(img: &mut RgbImage, x0: isize, y0: isize, x1: isize, y1: isize, c: Rgb) {
    for y in y0.min(y1)..=y0.max(y1) {
        for x in x0.min(x1)..=x0.max(x1) {
            put(img, x, y, c);
        }
    }
}

pub fn cross(img: &mut RgbImage, x: f64, y: f64, arm: f64, c: Rgb) {
    line(img, x - arm, y, x + arm, y, c);
    line(img, x, y - arm, x, y + arm, c);
}

/// Draws text with the embedded font at an integer pixel scale. Characters
/// the font lacks are drawn as blanks.
pub fn text(img: &mut RgbImage, s: &str, x: isize, y: isize, scale: usize, c: Rgb) {
    let scale = scale.max(1) as isize;
    for (ch, at) in font::layout(s) {
        let Some(g) = font::glyph(ch) else { continue };
        for r in 0..font::ROWS {
            for col in 0..font::COLS {
                if g.ink(col, r) {
                    let px = x + (at + col) as isize * scale;
                    let py = y + r as isize * scale;
                    fill_rect(img, px, py, px + scale - 1, py + scale - 1, c);
                }
            }
        }
    }
}
