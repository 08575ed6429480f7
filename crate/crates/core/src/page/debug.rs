//! Per-frame debug dumps: an overlay PNG and a JSON sidecar.

use std::path::Path;

use serde::Serialize;

use super::LineRegion;
use crate::draw;
use crate::geometry::{PixelRect, Point2};
use crate::raster::{Mask, RgbImage};

/// Everything detected in one frame.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DebugOverlay {
    pub timestamp: f64,
    pub tip: Option<Point2>,
    pub corners: Vec<Point2>,
    pub lines: Vec<LineRegion>,
    pub block_angle: f64,
    pub word_box: Option<PixelRect>,
    pub word_text: Option<String>,
    pub flow: Vec<(Point2, Point2)>,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub device_mask: Option<Mask>,
}

/// Writes `<stem>.png` (frame with detections drawn on it) and
/// `<stem>.json` into `dir`.
pub fn write_debug_dump(dir: &Path, stem: &str, frame: &RgbImage, overlay: &DebugOverlay) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut img = frame.clone();
    if let Some(mask) = &overlay.device_mask {
        for y in 0..img.height().min(mask.height()) {
            for x in 0..img.width().min(mask.width()) {
                if mask.get(x, y) {
                    let p = img.get(x, y);
                    img.set(x, y, [p[0] / 2, p[1] / 2, p[2] / 2 + 127]);
                }
            }
        }
    }
    for l in &overlay.lines {
        draw::rect_outline(&mut img, l.bbox.min_x, l.bbox.min_y, l.bbox.max_x, l.bbox.max_y, [0, 160, 0]);
        for w in l.baseline_points.windows(2) {
            draw::line(&mut img, w[0].x, w[0].y, w[1].x, w[1].y, [0, 220, 220]);
        }
    }
    for c in &overlay.corners {
        draw::cross(&mut img, c.x, c.y, 1.0, [255, 0, 0]);
    }
    for (a, b) in &overlay.flow {
        draw::line(&mut img, a.x, a.y, b.x, b.y, [255, 0, 255]);
    }
    if let Some(r) = &overlay.word_box {
        draw::rect_outline(&mut img, r.x as f64, r.y as f64, r.right() as f64 - 1.0, r.bottom() as f64 - 1.0, [255, 140, 0]);
    }
    if let Some(t) = &overlay.tip {
        draw::cross(&mut img, t.x, t.y, 5.0, [255, 255, 0]);
    }
    img.save_png(dir.join(format!("{stem}.png"))).map_err(std::io::Error::other)?;
    let json = serde_json::to_string_pretty(overlay).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(format!("{stem}.json")), json)
}
