//! Static PNG plots of an experiment: trajectories with their envelopes,
//! the offset histogram, speed profiles and the command raster.

use std::path::{Path, PathBuf};

use super::experiment::TrajectoryLog;
use super::metrics::{speed_profile, MetricsReport, CONTAINMENT_BAND_MM};
use crate::draw;
use crate::feedback::CommandKind;
use crate::raster::{Rgb, RgbImage};

const W: usize = 800;
const H: usize = 400;
const MARGIN: f64 = 40.0;
const WHITE: Rgb = [255, 255, 255];
const BLACK: Rgb = [0, 0, 0];
const GRID: Rgb = [210, 210, 210];
const RED: Rgb = [200, 30, 30];
const BLUE: Rgb = [30, 60, 200];
const GREEN: Rgb = [20, 140, 60];

/// Linear map from data ranges to the plot area.
struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 1.0, a + 1.0) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W as f64 - 2.0 * MARGIN)
    }

    /// Data y grows upward on screen.
    fn py(&self, y: f64) -> f64 {
        H as f64 - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H as f64 - 2.0 * MARGIN)
    }

    fn frame(&self, img: &mut RgbImage, title: &str) {
        draw::rect_outline(img, MARGIN, MARGIN, W as f64 - MARGIN, H as f64 - MARGIN, BLACK);
        draw::text(img, title, MARGIN as isize, 12, 2, BLACK);
        draw::text(img, &format!("{:.1}", self.y1), 2, MARGIN as isize, 1, BLACK);
        draw::text(img, &format!("{:.1}", self.y0), 2, (H as f64 - MARGIN) as isize - 7, 1, BLACK);
        draw::text(img, &format!("{:.0}", self.x0), MARGIN as isize, (H as f64 - MARGIN) as isize + 6, 1, BLACK);
        draw::text(img, &format!("{:.0}", self.x1), (W as f64 - MARGIN) as isize - 20, (H as f64 - MARGIN) as isize + 6, 1, BLACK);
    }

    fn hline(&self, img: &mut RgbImage, y: f64, c: Rgb) {
        draw::line(img, self.px(self.x0), self.py(y), self.px(self.x1), self.py(y), c);
    }
}

fn polyline(img: &mut RgbImage, ax: &Axes, pts: impl IntoIterator<Item = (f64, f64)>, c: Rgb) {
    let mut prev: Option<(f64, f64)> = None;
    for (x, y) in pts {
        if let Some((px, py)) = prev {
            draw::line(img, ax.px(px), ax.py(py), ax.px(x), ax.py(y), c);
        }
        prev = Some((x, y));
    }
}

/// Offsets are drawn with up the page as up on screen.
fn trajectories(logs: &[TrajectoryLog], report: &MetricsReport) -> RgbImage {
    let mut img = RgbImage::new(W, H, WHITE);
    let x_end = logs.iter().flat_map(|l| l.samples.iter().map(|s| s.x_mm - l.samples[0].x_mm)).fold(1.0, f64::max);
    let lim = report.max_abs_offset_mm.max(CONTAINMENT_BAND_MM + 1.0);
    let ax = Axes::new(0.0, x_end, -lim, lim);
    ax.hline(&mut img, CONTAINMENT_BAND_MM, GRID);
    ax.hline(&mut img, -CONTAINMENT_BAND_MM, GRID);
    ax.hline(&mut img, 0.0, GRID);
    for l in logs {
        let x0 = l.samples.first().map(|s| s.x_mm).unwrap_or(0.0);
        polyline(&mut img, &ax, l.samples.iter().map(|s| (s.x_mm - x0, -s.y_mm)), [120, 120, 120]);
    }
    let xs = &report.envelope_x_mm;
    polyline(&mut img, &ax, xs.iter().zip(&report.max_envelope_mm).map(|(x, y)| (*x, -*y)), RED);
    polyline(&mut img, &ax, xs.iter().zip(&report.min_envelope_mm).map(|(x, y)| (*x, -*y)), BLUE);
    ax.frame(&mut img, "offset (mm) along the line (mm)");
    img
}

fn histogram(logs: &[TrajectoryLog], report: &MetricsReport) -> RgbImage {
    let mut img = RgbImage::new(W, H, WHITE);
    let lim = report.max_abs_offset_mm.max(CONTAINMENT_BAND_MM + 1.0);
    let bins = 60usize;
    let mut counts = vec![0usize; bins];
    for s in logs.iter().flat_map(|l| &l.samples) {
        let b = (((s.y_mm + lim) / (2.0 * lim)) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0) as usize;
        counts[b] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let ax = Axes::new(-lim, lim, 0.0, top.max(1.0));
    for (i, c) in counts.iter().enumerate() {
        let (a, b) = (-lim + 2.0 * lim * i as f64 / bins as f64, -lim + 2.0 * lim * (i + 1) as f64 / bins as f64);
        draw::fill_rect(&mut img, ax.px(a) as isize + 1, ax.py(*c as f64) as isize, ax.px(b) as isize - 1, ax.py(0.0) as isize, BLUE);
    }
    for x in [-CONTAINMENT_BAND_MM, CONTAINMENT_BAND_MM] {
        draw::line(&mut img, ax.px(x), ax.py(0.0), ax.px(x), ax.py(top), RED);
    }
    ax.frame(&mut img, &format!("offset histogram  mean {:.2}  std {:.2}", report.mean_offset_mm, report.std_offset_mm));
    img
}

fn speeds(logs: &[TrajectoryLog]) -> RgbImage {
    let mut img = RgbImage::new(W, H, WHITE);
    let profiles: Vec<Vec<(f64, f64)>> = logs
        .iter()
        .map(|l| l.samples.iter().zip(speed_profile(&l.samples)).map(|(s, v)| (s.t, v)).collect())
        .collect();
    let t_end = profiles.iter().flatten().map(|p| p.0).fold(1.0, f64::max);
    let v_max = profiles.iter().flatten().map(|p| p.1).fold(1.0, f64::max);
    let v_min = profiles.iter().flatten().map(|p| p.1).fold(0.0, f64::min);
    let ax = Axes::new(0.0, t_end, v_min, v_max);
    ax.hline(&mut img, 0.0, GRID);
    for p in &profiles {
        polyline(&mut img, &ax, p.iter().copied(), GREEN);
    }
    ax.frame(&mut img, "forward speed (mm/s) over time (s)");
    img
}

fn command_raster(logs: &[TrajectoryLog]) -> RgbImage {
    let mut img = RgbImage::new(W, H, WHITE);
    let t_end = logs.iter().flat_map(|l| l.samples.last()).map(|s| s.t).fold(1.0, f64::max);
    let rows = logs.len().max(1) as f64;
    let ax = Axes::new(0.0, t_end, 0.0, rows);
    for (i, l) in logs.iter().enumerate() {
        for w in l.samples.windows(2) {
            let c = match w[0].command {
                CommandKind::Up => RED,
                CommandKind::Down => BLUE,
                CommandKind::NewLine | CommandKind::LineStart => GREEN,
                CommandKind::None => continue,
            };
            let (y0, y1) = (ax.py(i as f64 + 0.9), ax.py(i as f64 + 0.1));
            draw::fill_rect(&mut img, ax.px(w[0].t) as isize, y0 as isize, ax.px(w[1].t) as isize, y1 as isize, c);
        }
    }
    ax.frame(&mut img, "commands per run over time (s)  up red  down blue");
    img
}

/// Writes the four plots into `dir` and returns their paths.
pub fn write_plots(dir: &Path, logs: &[TrajectoryLog], report: &MetricsReport) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let plots = [
        ("trajectories.png", trajectories(logs, report)),
        ("offset_histogram.png", histogram(logs, report)),
        ("speed_profile.png", speeds(logs)),
        ("command_raster.png", command_raster(logs)),
    ];
    let mut out = Vec::new();
    for (name, img) in plots {
        let path = dir.join(name);
        img.save_png(&path).map_err(|e| std::io::Error::other(e.to_string()))?;
        out.push(path);
    }
    Ok(out)
}
