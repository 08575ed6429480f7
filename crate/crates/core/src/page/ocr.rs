//! Word recognition behind a pluggable engine interface.

use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::threshold::otsu_threshold;
use super::word::WordCrop;
use super::PageError;
use crate::font;
use crate::geometry::PixelRect;
use crate::raster::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrResult {
    pub text: String,
    pub confidence: f64,
    /// Glyph boxes in patch coordinates, when the engine reports them.
    pub per_char_boxes: Option<Vec<PixelRect>>,
}

impl OcrResult {
    pub fn empty() -> Self {
        Self { text: String::new(), confidence: 0.0, per_char_boxes: None }
    }
}

pub trait OcrEngine: Send + Sync {
    fn name(&self) -> &str;
    fn recognize(&self, patch: &GrayImage) -> Result<OcrResult, PageError>;
}

pub fn recognize_word(crop: &WordCrop, engine: &dyn OcrEngine) -> Result<OcrResult, PageError> {
    if crop.gray_patch.is_empty() {
        return Err(PageError::EmptyCrop);
    }
    engine.recognize(&crop.gray_patch)
}

struct Template {
    ch: char,
    width: usize,
    /// Row-major 7 x width ink cells (1 ink, 0 paper).
    cells: Vec<f32>,
}

/// Normalized cross-correlation matcher over the embedded bitmap font.
///
/// The patch is binarized with Otsu's method, split into glyphs at columns
/// without ink, and each glyph is resampled onto the font grid and compared
/// with every template. The vertical scale is unknown (a word may or may not
/// reach the cap line), so every plausible ink height is tried and the best
/// mean correlation wins.
pub struct TemplateOcr {
    templates: Vec<Template>,
    /// Minimum gray-level gap between ink and paper classes.
    pub min_contrast: f32,
}

impl Default for TemplateOcr {
    fn default() -> Self {
        Self::new()
    }
}

struct Reading {
    text: String,
    score: f64,
    boxes: Vec<PixelRect>,
}

impl TemplateOcr {
    pub fn new() -> Self {
        let templates = font::glyphs()
            .map(|g| {
                let (c0, c1) = g.column_extent();
                let width = c1 - c0 + 1;
                let mut cells = Vec::with_capacity(font::ROWS * width);
                for r in 0..font::ROWS {
                    for c in c0..=c1 {
                        cells.push(if g.ink(c, r) { 1.0 } else { 0.0 });
                    }
                }
                Template { ch: g.ch, width, cells }
            })
            .collect();
        Self { templates, min_contrast: 40.0 }
    }

    fn read(&self, dark: &GrayImage, segments: &[(usize, usize)], top: usize, ink_h: usize, rows_used: usize) -> Option<Reading> {
        let scale = ink_h as f64 / rows_used as f64;
        if scale < 0.8 {
            return None;
        }
        let row0 = top as f64 - (font::ROWS - rows_used) as f64 * scale;
        let pieces = split_wide(dark, segments, top, ink_h, scale);
        let mut text = String::new();
        let mut boxes = Vec::new();
        let mut total = 0.0;
        let mut prev_end: Option<usize> = None;
        for &(c0, c1) in &pieces {
            if let Some(end) = prev_end {
                if (c0 - end) as f64 / scale > 3.5 {
                    text.push(' ');
                }
            }
            prev_end = Some(c1 + 1);
            let units = (c1 + 1 - c0) as f64 / scale;
            let mut best: Option<(f64, char)> = None;
            for w in 1..=font::COLS {
                let excess = (units - w as f64).abs();
                if excess > 1.6 {
                    continue;
                }
                let sample = sample_cells(dark, c0 as f64, (c1 + 1) as f64, row0, scale, w);
                for t in self.templates.iter().filter(|t| t.width == w) {
                    let score = ncc(&sample, &t.cells) - 0.15 * (excess - 0.75).max(0.0);
                    if best.is_none_or(|b| score > b.0) {
                        best = Some((score, t.ch));
                    }
                }
            }
            let (score, ch) = best?;
            text.push(ch);
            total += score;
            boxes.push(PixelRect::new(c0, top, c1 + 1 - c0, ink_h));
        }
        Some(Reading { text, score: total / pieces.len() as f64, boxes })
    }
}

impl OcrEngine for TemplateOcr {
    fn name(&self) -> &str {
        "template"
    }

    fn recognize(&self, patch: &GrayImage) -> Result<OcrResult, PageError> {
        if patch.is_empty() {
            return Ok(OcrResult::empty());
        }
        let Some(t) = otsu_threshold(patch) else { return Ok(OcrResult::empty()) };
        let (mut sd, mut nd, mut sb, mut nb) = (0.0f64, 0usize, 0.0f64, 0usize);
        for &v in patch.data() {
            if v <= t {
                sd += v as f64;
                nd += 1;
            } else {
                sb += v as f64;
                nb += 1;
            }
        }
        if nd == 0 || nb == 0 {
            return Ok(OcrResult::empty());
        }
        let (dark_mean, bright_mean) = ((sd / nd as f64) as f32, (sb / nb as f64) as f32);
        if bright_mean - dark_mean < self.min_contrast {
            return Ok(OcrResult::empty());
        }
        let dark = patch.map(|v| ((bright_mean - v) / (bright_mean - dark_mean)).clamp(0.0, 1.0));
        let ink = |x: usize, y: usize| patch.get(x, y) <= t;

        let (w, h) = (patch.width(), patch.height());
        let rows: Vec<usize> = (0..h).filter(|&y| (0..w).any(|x| ink(x, y))).collect();
        let (top, bottom) = (rows[0], *rows.last().unwrap());
        let ink_h = bottom + 1 - top;
        let mut segments = Vec::new();
        let mut start = None;
        for x in 0..=w {
            let inked = x < w && (top..=bottom).any(|y| ink(x, y));
            match (inked, start) {
                (true, None) => start = Some(x),
                (false, Some(s)) => {
                    segments.push((s, x - 1));
                    start = None;
                }
                _ => {}
            }
        }

        let best = [font::ROWS, font::ROWS - 1, font::ROWS - 2]
            .into_iter()
            .filter_map(|rows_used| self.read(&dark, &segments, top, ink_h, rows_used))
            .max_by(|a, b| a.score.total_cmp(&b.score));
        Ok(match best {
            Some(r) => {
                OcrResult { text: r.text, confidence: r.score.clamp(0.0, 1.0), per_char_boxes: Some(r.boxes) }
            }
            None => OcrResult::empty(),
        })
    }
}

/// Splits ink runs wider than one glyph at their faintest column.
fn split_wide(dark: &GrayImage, segments: &[(usize, usize)], top: usize, ink_h: usize, scale: f64) -> Vec<(usize, usize)> {
    let column = |x: usize| (top..top + ink_h).map(|y| dark.get(x, y)).sum::<f32>();
    let mut out = Vec::new();
    for &(mut c0, c1) in segments {
        while (c1 + 1 - c0) as f64 / scale > font::COLS as f64 + 0.6 {
            let lo = c0 + (3.5 * scale).round() as usize;
            let hi = (c0 + (6.5 * scale).round() as usize).min(c1.saturating_sub(1));
            if lo > hi {
                break;
            }
            let cut = (lo..=hi).min_by(|&a, &b| column(a).total_cmp(&column(b))).unwrap();
            out.push((c0, cut - 1));
            c0 = cut + 1;
        }
        out.push((c0, c1));
    }
    out
}

/// Mean darkness of each cell of a 7 x `cols` grid spanning columns
/// [x0, x1) and rows starting at `y0` with height `scale` per row.
fn sample_cells(dark: &GrayImage, x0: f64, x1: f64, y0: f64, scale: f64, cols: usize) -> Vec<f32> {
    const SUB: usize = 3;
    let cw = (x1 - x0) / cols as f64;
    let mut out = Vec::with_capacity(font::ROWS * cols);
    for r in 0..font::ROWS {
        for c in 0..cols {
            let mut acc = 0.0;
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let x = x0 + (c as f64 + (sx as f64 + 0.5) / SUB as f64) * cw - 0.5;
                    let y = y0 + (r as f64 + (sy as f64 + 0.5) / SUB as f64) * scale - 0.5;
                    let xc = x.clamp(0.0, dark.width() as f64 - 1.0);
                    let inside_y = y >= -0.5 && y <= dark.height() as f64 - 0.5;
                    if inside_y {
                        acc += dark.sample_or(xc, y.clamp(0.0, dark.height() as f64 - 1.0), 0.0);
                    }
                }
            }
            out.push(acc / (SUB * SUB) as f32);
        }
    }
    out
}

fn ncc(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x as f64 - ma, y as f64 - mb);
        num += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 1e-12 || vb <= 1e-12 {
        return 0.0;
    }
    num / (va * vb).sqrt()
}

/// Runs an external program on each patch. The patch is written as a PNG
/// whose path is appended to the arguments; the first stdout line is the
/// text and an optional second line the confidence. Calls are serialized.
pub struct ExternalOcr {
    program: String,
    args: Vec<String>,
    lock: Mutex<()>,
}

impl ExternalOcr {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self { program: program.into(), args, lock: Mutex::new(()) }
    }
}

static PATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

impl OcrEngine for ExternalOcr {
    fn name(&self) -> &str {
        &self.program
    }

    fn recognize(&self, patch: &GrayImage) -> Result<OcrResult, PageError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let n = PATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!("lineguide-ocr-{}-{n}.png", std::process::id()));
        patch.save_png(&path).map_err(|e| PageError::EngineFailure(e.to_string()))?;
        let output = Command::new(&self.program).args(&self.args).arg(&path).output();
        let _ = std::fs::remove_file(&path);
        let output = output.map_err(|e| PageError::EngineFailure(format!("{}: {e}", self.program)))?;
        if !output.status.success() {
            return Err(PageError::EngineFailure(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let mut lines = stdout.lines();
        let text = lines.next().unwrap_or("").trim().to_string();
        let confidence = lines
            .next()
            .and_then(|l| l.trim().parse::<f64>().ok())
            .unwrap_or(if text.is_empty() { 0.0 } else { 1.0 })
            .clamp(0.0, 1.0);
        Ok(OcrResult { text, confidence, per_char_boxes: None })
    }
}
