//! Grouping text corners into line regions.

use serde::{Deserialize, Serialize};

use super::hough::probabilistic_hough;
use super::morphology::{close, dilate};
use super::skew::bottom_edges;
use super::{PageConfig, MORPHOLOGY_REFERENCE_PITCH_PX};
use crate::geometry::{BBox, Point2};
use crate::raster::Mask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRegion {
    pub id: usize,
    /// Lower edge of the line, left to right, in frame coordinates.
    pub baseline_points: Vec<Point2>,
    pub bbox: BBox,
    pub angle: f64,
    pub corner_count: usize,
    /// Corners assigned to the line.
    #[serde(skip)]
    pub corners: Vec<Point2>,
}

/// Result of line clustering, including the blob raster the word stage
/// works on.
#[derive(Debug, Clone)]
pub struct TextLines {
    pub regions: Vec<LineRegion>,
    pub blobs: Mask,
    pub block_angle: f64,
}

/// Groups corner points into text lines ordered top to bottom.
///
/// Corners are rasterized and grown into blobs by a dilation followed by a
/// closing. The longest segment along the blob edges gives the block angle;
/// corners rotated by minus that angle are split into lines wherever
/// consecutive y values differ by more than half the nominal line pitch.
/// The structuring elements are sized for the nominal pitch first; when two
/// or more lines are found and their measured pitch differs, the blobs are
/// rebuilt at the measured pitch.
pub fn cluster_text_lines(corners: &[Point2], width: usize, height: usize, cfg: &PageConfig) -> TextLines {
    let nominal_scale = cfg.nominal_line_pitch_px / MORPHOLOGY_REFERENCE_PITCH_PX;
    let first = cluster_at_scale(corners, width, height, cfg, nominal_scale);
    if first.regions.len() >= 2 {
        if let Some(pitch) = measured_pitch(&first.regions) {
            let scale = pitch / MORPHOLOGY_REFERENCE_PITCH_PX;
            if (scale / nominal_scale - 1.0).abs() > 0.15 {
                return cluster_at_scale(corners, width, height, cfg, scale);
            }
        }
    }
    first
}

fn measured_pitch(regions: &[LineRegion]) -> Option<f64> {
    let mut gaps: Vec<f64> = regions.windows(2).map(|w| w[1].bbox.max_y - w[0].bbox.max_y).filter(|g| *g > 0.0).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    Some(gaps[gaps.len() / 2])
}

fn scaled(size: usize, scale: f64) -> usize {
    ((size as f64 * scale).round() as usize).max(1)
}

fn cluster_at_scale(corners: &[Point2], width: usize, height: usize, cfg: &PageConfig, scale: f64) -> TextLines {
    let mut raster = Mask::new(width, height, false);
    for p in corners {
        let (x, y) = (p.x.round(), p.y.round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height {
            raster.set(x as usize, y as usize, true);
        }
    }
    if corners.is_empty() {
        return TextLines { regions: Vec::new(), blobs: raster, block_angle: 0.0 };
    }
    let grown = dilate(&raster, scaled(cfg.dilate[0], scale), scaled(cfg.dilate[1], scale));
    let blobs = close(&grown, scaled(cfg.close[0], scale), scaled(cfg.close[1], scale));

    let min_len = cfg.block_min_length_fraction * width as f64;
    let segments = probabilistic_hough(&bottom_edges(&blobs), &cfg.hough_params(min_len));
    let block_angle = segments.iter().max_by(|a, b| a.length().total_cmp(&b.length())).map(|s| s.angle).unwrap_or(0.0);

    let center = Point2::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let mut rotated: Vec<(Point2, Point2)> = corners.iter().map(|p| (p.rotated_about(center, -block_angle), *p)).collect();
    rotated.sort_by(|a, b| a.0.y.total_cmp(&b.0.y).then(a.0.x.total_cmp(&b.0.x)));

    let gap = cfg.nominal_line_pitch_px / 2.0;
    let mut clusters: Vec<Vec<(Point2, Point2)>> = Vec::new();
    let mut current: Vec<(Point2, Point2)> = Vec::new();
    for item in rotated {
        if let Some(last) = current.last() {
            if item.0.y - last.0.y > gap {
                clusters.push(std::mem::take(&mut current));
            }
        }
        current.push(item);
    }
    clusters.push(current);

    let mut regions: Vec<LineRegion> = clusters
        .into_iter()
        .filter(|c| c.len() >= cfg.min_line_corners)
        .map(|c| region_from_cluster(&c, center, block_angle))
        .collect();
    regions.sort_by(|a, b| a.bbox.center().y.total_cmp(&b.bbox.center().y));
    for (i, r) in regions.iter_mut().enumerate() {
        r.id = i;
    }
    TextLines { regions, blobs, block_angle }
}

fn region_from_cluster(cluster: &[(Point2, Point2)], center: Point2, angle: f64) -> LineRegion {
    let min_x = cluster.iter().map(|c| c.0.x).fold(f64::INFINITY, f64::min);
    let max_x = cluster.iter().map(|c| c.0.x).fold(f64::NEG_INFINITY, f64::max);
    let bottom = cluster.iter().map(|c| c.0.y).fold(f64::NEG_INFINITY, f64::max);
    let baseline_points: Vec<Point2> =
        (0..=4).map(|i| Point2::new(min_x + (max_x - min_x) * i as f64 / 4.0, bottom).rotated_about(center, angle)).collect();
    let corners: Vec<Point2> = cluster.iter().map(|c| c.1).collect();
    let mut bbox = BBox::from_points(&corners).expect("cluster is non-empty");
    for p in &baseline_points {
        bbox.include(*p);
    }
    LineRegion { id: 0, baseline_points, bbox, angle, corner_count: corners.len(), corners }
}
