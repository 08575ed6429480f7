//! Synthetic reading page.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::font;
use crate::geometry::BBox;
use crate::raster::GrayImage;

const LETTER_WIDTH_MM: f64 = 215.9;
const LETTER_HEIGHT_MM: f64 = 279.4;

const PASSAGE: &str = "The fingertip reader follows a printed line of text while a small camera looks at the words \
just ahead of the finger. Each frame is straightened, the lines are found from corner points, and the \
word above the finger is cut out and read aloud in Braille on the skin. When the finger wanders away from \
the line the display asks the reader to move up or down, and at the end of a line it asks for a new line. \
Readers who kept their finger close to the baseline could follow a whole page without losing their place, \
while readers without guidance slowly drifted into the next line. The same page is used for every trial \
so that the drift of one reader can be compared with another. Good tracking makes reading faster and \
calmer, and it lets the system spend its time on recognition instead of search.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageLayout {
    /// Cap height of the text.
    pub line_height_mm: f64,
    /// Distance between the tops of consecutive lines.
    pub line_pitch_mm: f64,
    /// Nominal type size, recorded for reference; glyph size follows
    /// `line_height_mm`.
    pub font_size_pt: f64,
    pub page_width_mm: f64,
    pub page_height_mm: f64,
    pub margin_left_mm: f64,
    pub margin_top_mm: f64,
    pub text: Vec<String>,
}

impl Default for PageLayout {
    fn default() -> Self {
        let line_length_mm = 170.0;
        let mut layout = Self {
            line_height_mm: 3.0,
            line_pitch_mm: 10.0,
            font_size_pt: 14.0,
            page_width_mm: LETTER_WIDTH_MM,
            page_height_mm: LETTER_HEIGHT_MM,
            margin_left_mm: (LETTER_WIDTH_MM - line_length_mm) / 2.0,
            margin_top_mm: 25.4,
            text: Vec::new(),
        };
        layout.text = wrap_text(PASSAGE, layout.units_for_mm(line_length_mm));
        layout
    }
}

/// Greedy word wrap to at most `max_units` font pixels per line.
pub fn wrap_text(text: &str, max_units: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        let candidate = if current.is_empty() { word.to_string() } else { format!("{current} {word}") };
        if font::text_width_units(&candidate) <= max_units || current.is_empty() {
            current = candidate;
        } else {
            lines.push(std::mem::replace(&mut current, word.to_string()));
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

impl PageLayout {
    pub fn with_text(lines: &[&str]) -> Self {
        Self { text: lines.iter().map(|s| s.to_string()).collect(), ..Self::default() }
    }

    /// Size of one font pixel.
    pub fn font_unit_mm(&self) -> f64 {
        self.line_height_mm / font::ROWS as f64
    }

    fn units_for_mm(&self, mm: f64) -> usize {
        (mm / self.font_unit_mm()).floor() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [self.line_height_mm, self.line_pitch_mm, self.font_size_pt, self.page_width_mm, self.page_height_mm];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::InvalidConfig("page dimensions must be positive".into()));
        }
        if self.line_pitch_mm <= self.line_height_mm {
            return Err(SimError::InvalidConfig("line pitch must exceed line height".into()));
        }
        if self.margin_left_mm < 0.0 || self.margin_top_mm < 0.0 {
            return Err(SimError::InvalidConfig("margins must be non-negative".into()));
        }
        Ok(())
    }

    /// Top of line `i` (cap line).
    pub fn line_top_mm(&self, i: usize) -> f64 {
        self.margin_top_mm + i as f64 * self.line_pitch_mm
    }

    /// Bottom of line `i` (baseline; glyphs have no descenders).
    pub fn line_bottom_mm(&self, i: usize) -> f64 {
        self.line_top_mm(i) + self.line_height_mm
    }

    /// Vertical center of line `i`'s cap box.
    pub fn line_center_mm(&self, i: usize) -> f64 {
        self.line_top_mm(i) + self.line_height_mm / 2.0
    }

    /// Midway between the bottom of line `i` and the top of line `i + 1`;
    /// the path a reader's fingertip follows under line `i`.
    pub fn track_y_mm(&self, i: usize) -> f64 {
        self.line_bottom_mm(i) + (self.line_pitch_mm - self.line_height_mm) / 2.0
    }

    pub fn line_width_mm(&self, i: usize) -> f64 {
        self.text.get(i).map(|t| font::text_width_units(t) as f64 * self.font_unit_mm()).unwrap_or(0.0)
    }

    /// Horizontal extent of the ink of line `i`.
    pub fn line_ink_mm(&self, i: usize) -> Option<(f64, f64)> {
        let (x0, _, x1, _) = font::ink_extent_units(self.text.get(i)?)?;
        let u = self.font_unit_mm();
        Some((self.margin_left_mm + x0 as f64 * u, self.margin_left_mm + x1 as f64 * u))
    }

    /// Ink boxes (mm) of the space-separated words of line `i`.
    pub fn word_boxes_mm(&self, i: usize) -> Vec<(String, BBox)> {
        let Some(text) = self.text.get(i) else { return Vec::new() };
        let u = self.font_unit_mm();
        let mut out = Vec::new();
        let mut col = 0usize;
        for (wi, word) in text.split(' ').enumerate() {
            if wi > 0 {
                col += font::SPACE_ADVANCE;
            }
            if let Some((x0, y0, x1, y1)) = font::ink_extent_units(word) {
                let left = self.margin_left_mm + (col + x0) as f64 * u;
                let top = self.line_top_mm(i) + y0 as f64 * u;
                out.push((word.to_string(), BBox::new(left, top, left + (x1 - x0) as f64 * u, top + (y1 - y0) as f64 * u)));
            }
            col += word.chars().count() * font::ADVANCE;
        }
        out
    }
}

/// Renders the page with black glyphs on white at `dpmm` pixels per mm.
pub fn render_page(layout: &PageLayout, dpmm: f64) -> Result<GrayImage, SimError> {
    layout.validate()?;
    if !(dpmm.is_finite() && dpmm > 0.0) {
        return Err(SimError::InvalidConfig(format!("dpmm must be positive, got {dpmm}")));
    }
    let printable = layout.page_width_mm - layout.margin_left_mm;
    for (i, line) in layout.text.iter().enumerate() {
        if layout.margin_left_mm + layout.line_width_mm(i) > printable + 1e-9 {
            return Err(SimError::TextOverflow { line: i });
        }
        if let Some(c) = line.chars().find(|c| !font::supports(*c)) {
            return Err(SimError::InvalidConfig(format!("line {i}: unsupported character {c:?}")));
        }
    }
    let w = (layout.page_width_mm * dpmm).round() as usize;
    let h = (layout.page_height_mm * dpmm).round() as usize;
    let mut img = GrayImage::new(w, h, 255.0);
    let scale = layout.font_unit_mm() * dpmm;
    for (i, line) in layout.text.iter().enumerate() {
        font::draw_text(&mut img, line, layout.margin_left_mm * dpmm, layout.line_top_mm(i) * dpmm, scale, 0.0);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lines_fit_the_line_length() {
        let l = PageLayout::default();
        assert!(l.text.len() >= 8);
        for i in 0..l.text.len() - 1 {
            let w = l.line_width_mm(i);
            assert!(w <= 170.0 && w > 150.0, "line {i} width {w}");
        }
        assert!(render_page(&l, 2.0).is_ok());
    }

    #[test]
    fn baselines_are_one_pitch_apart() {
        let l = PageLayout::default();
        let img = render_page(&l, 4.0).unwrap();
        let ink_rows: Vec<usize> = (0..img.height()).filter(|&y| (0..img.width()).any(|x| img.get(x, y) < 128.0)).collect();
        let bottoms: Vec<usize> = ink_rows.iter().copied().filter(|y| !ink_rows.contains(&(y + 1))).collect();
        assert!(bottoms.len() >= 3);
        for w in bottoms.windows(2).take(l.text.len() - 1) {
            assert_eq!(w[1] - w[0], 40);
        }
    }

    #[test]
    fn empty_text_renders_blank_and_overflow_is_reported() {
        let blank = render_page(&PageLayout::with_text(&[]), 2.0).unwrap();
        assert!(blank.data().iter().all(|&v| v == 255.0));
        let long = "word ".repeat(100);
        assert!(matches!(render_page(&PageLayout::with_text(&[&long]), 2.0), Err(SimError::TextOverflow { line: 0 })));
    }
}
