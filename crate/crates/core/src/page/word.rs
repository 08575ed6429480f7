//! Cropping the word under the fingertip.

use super::components::label_components;
use super::lines::LineRegion;
use super::{PageConfig, PageError};
use crate::geometry::{PixelRect, Point2};
use crate::raster::{clip_rect, GrayImage, Mask};

#[derive(Debug, Clone, PartialEq)]
pub struct WordCrop {
    pub gray_patch: GrayImage,
    /// Crop rectangle in frame coordinates.
    pub bbox: PixelRect,
    pub line_id: usize,
}

/// The line above and closest to the fingertip, measured from the tip to
/// the line's lower bbox edge. Only lines lying entirely above the tip
/// qualify.
pub fn line_above(lines: &[LineRegion], tip: Point2) -> Option<&LineRegion> {
    lines
        .iter()
        .filter(|l| l.bbox.max_y < tip.y)
        .min_by(|a, b| (tip.y - a.bbox.max_y).total_cmp(&(tip.y - b.bbox.max_y)))
}

/// Crops the word blob nearest the fingertip's x on the line above it.
///
/// Among the line's blobs, those within the tolerance of the smallest
/// horizontal distance to the tip are candidates; the largest candidate wins
/// (smaller x on ties) and every blob whose box overlaps it is merged in.
pub fn extract_focused_word(
    lines: &[LineRegion],
    tip: Point2,
    gray: &GrayImage,
    blobs: &Mask,
    cfg: &PageConfig,
) -> Result<WordCrop, PageError> {
    let line = line_above(lines, tip).ok_or(PageError::NoLineAboveFinger)?;
    let labels = label_components(blobs);
    let mut member = vec![false; labels.components.len() + 1];
    for p in &line.corners {
        let (x, y) = (p.x.round(), p.y.round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < labels.width && (y as usize) < labels.height {
            member[labels.at(x as usize, y as usize) as usize] = true;
        }
    }
    let blobs_on_line: Vec<_> = labels.components.iter().filter(|c| member[c.label as usize]).collect();
    if blobs_on_line.is_empty() {
        return Err(PageError::NoLineAboveFinger);
    }
    let distance = |r: &PixelRect| r.to_bbox().horizontal_distance(tip.x);
    let nearest = blobs_on_line.iter().map(|c| distance(&c.bbox)).fold(f64::INFINITY, f64::min);
    let chosen = blobs_on_line
        .iter()
        .filter(|c| distance(&c.bbox) <= nearest + cfg.word_tip_tolerance_px)
        .max_by(|a, b| a.area.cmp(&b.area).then(b.bbox.x.cmp(&a.bbox.x)))
        .expect("at least one blob is nearest");
    let mut rect = chosen.bbox;
    for c in &blobs_on_line {
        if c.bbox.overlaps(&chosen.bbox) {
            rect = rect.union(&c.bbox);
        }
    }
    let rect = clip_rect(rect, gray.width(), gray.height());
    if rect.area() == 0 {
        return Err(PageError::EmptyCrop);
    }
    Ok(WordCrop { gray_patch: gray.crop(rect), bbox: rect, line_id: line.id })
}
