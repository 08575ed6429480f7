//! Embedded 5x7 bitmap font.
//!
//! Every glyph sits on the bottom row of its 7-row cell (there are no
//! descenders), so the cap height equals the full cell height. Glyph ink
//! never contains an empty column between its outermost columns, which lets
//! word images be split into glyphs by vertical projection.

use crate::raster::GrayImage;

pub const ROWS: usize = 7;
pub const COLS: usize = 5;
/// Horizontal advance of a glyph, in font pixels.
pub const ADVANCE: usize = 6;
/// Advance of the space character; wide enough that word gaps stay open
/// after the text-line morphology.
pub const SPACE_ADVANCE: usize = 9;

type Glyph = [&'static str; ROWS];

#[rustfmt::skip]
const GLYPHS: &[(char, Glyph)] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    ('a', [".....", ".....", ".###.", "....#", ".####", "#...#", ".####"]),
    ('b', ["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "####."]),
    ('c', [".....", ".....", ".###.", "#....", "#....", "#...#", ".###."]),
    ('d', ["....#", "....#", ".##.#", "#..##", "#...#", "#...#", ".####"]),
    ('e', [".....", ".....", ".###.", "#...#", "#####", "#....", ".###."]),
    ('f', ["..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."]),
    ('g', [".....", ".####", "#...#", "#...#", ".####", "....#", ".###."]),
    ('h', ["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"]),
    ('i', ["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."]),
    ('j', ["...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."]),
    ('k', ["#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."]),
    ('l', [".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('m', [".....", ".....", "##.#.", "#.#.#", "#.#.#", "#...#", "#...#"]),
    ('n', [".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"]),
    ('o', [".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."]),
    ('p', [".....", "####.", "#...#", "#...#", "####.", "#....", "#...."]),
    ('q', [".....", ".####", "#...#", "#...#", ".####", "....#", "....#"]),
    ('r', [".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."]),
    ('s', [".....", ".....", ".####", "#....", ".###.", "....#", "####."]),
    ('t', [".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."]),
    ('u', [".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"]),
    ('v', [".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('w', [".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."]),
    ('x', [".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"]),
    ('y', [".....", "#...#", "#...#", ".####", "....#", "#...#", ".###."]),
    ('z', [".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"]),
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('.', [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."]),
    (',', [".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."]),
    (';', [".....", ".##..", ".##..", ".....", ".##..", "..#..", ".#..."]),
    (':', [".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."]),
    ('!', ["..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."]),
    ('?', [".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."]),
    ('\'', ["..#..", "..#..", ".#...", ".....", ".....", ".....", "....."]),
    ('-', [".....", ".....", ".....", "#####", ".....", ".....", "....."]),
    ('(', ["...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#."]),
    (')', [".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#..."]),
    ('/', [".....", "....#", "...#.", "..#..", ".#...", "#....", "....."]),
];

/// A glyph bitmap with its ink extents.
#[derive(Debug, Clone, Copy)]
pub struct GlyphBitmap {
    pub ch: char,
    rows: &'static Glyph,
}

impl GlyphBitmap {
    #[inline]
    pub fn ink(&self, col: usize, row: usize) -> bool {
        self.rows[row].as_bytes()[col] == b'#'
    }

    /// Inclusive (first, last) ink columns.
    pub fn column_extent(&self) -> (usize, usize) {
        let cols: Vec<usize> = (0..COLS).filter(|&c| (0..ROWS).any(|r| self.ink(c, r))).collect();
        (cols[0], *cols.last().unwrap())
    }

    /// Inclusive (first, last) ink rows.
    pub fn row_extent(&self) -> (usize, usize) {
        let rows: Vec<usize> = (0..ROWS).filter(|&r| (0..COLS).any(|c| self.ink(c, r))).collect();
        (rows[0], *rows.last().unwrap())
    }
}

pub fn glyph(ch: char) -> Option<GlyphBitmap> {
    GLYPHS.iter().find(|(c, _)| *c == ch).map(|(c, rows)| GlyphBitmap { ch: *c, rows })
}

pub fn glyphs() -> impl Iterator<Item = GlyphBitmap> {
    GLYPHS.iter().map(|(c, rows)| GlyphBitmap { ch: *c, rows })
}

pub fn supports(ch: char) -> bool {
    ch == ' ' || glyph(ch).is_some()
}

fn advance(ch: char) -> usize {
    if ch == ' ' {
        SPACE_ADVANCE
    } else {
        ADVANCE
    }
}

/// Width of `text` in font pixels (trailing inter-glyph gap excluded).
pub fn text_width_units(text: &str) -> usize {
    let total: usize = text.chars().map(advance).sum();
    total.saturating_sub(ADVANCE - COLS)
}

/// Column offset (font pixels) of every character of `text`.
pub fn layout(text: &str) -> Vec<(char, usize)> {
    let mut col = 0;
    text.chars()
        .map(|ch| {
            let at = col;
            col += advance(ch);
            (ch, at)
        })
        .collect()
}

/// Ink bounding box, in font pixels, of `text` as `(x0, y0, x1, y1)`
/// exclusive on the far side. `None` when the text has no ink.
pub fn ink_extent_units(text: &str) -> Option<(usize, usize, usize, usize)> {
    let mut ext: Option<(usize, usize, usize, usize)> = None;
    for (ch, at) in layout(text) {
        let Some(g) = glyph(ch) else { continue };
        let (c0, c1) = g.column_extent();
        let (r0, r1) = g.row_extent();
        let b = (at + c0, r0, at + c1 + 1, r1 + 1);
        ext = Some(match ext {
            None => b,
            Some(e) => (e.0.min(b.0), e.1.min(b.1), e.2.max(b.2), e.3.max(b.3)),
        });
    }
    ext
}

/// Draws `text` with black ink (value `ink`) into `img`. The cell's top-left
/// corner is at continuous pixel position (`left`, `top`) and one font pixel
/// spans `scale` image pixels. A pixel is inked when its center falls in an
/// inked font cell. Unsupported characters are skipped.
pub fn draw_text(img: &mut GrayImage, text: &str, left: f64, top: f64, scale: f64, ink: f32) {
    for (ch, at) in layout(text) {
        let Some(g) = glyph(ch) else { continue };
        let gx = left + at as f64 * scale;
        let x0 = (gx - 0.5).floor().max(0.0) as usize;
        let x1 = ((gx + COLS as f64 * scale).ceil() as usize).min(img.width());
        let y0 = (top - 0.5).floor().max(0.0) as usize;
        let y1 = ((top + ROWS as f64 * scale).ceil() as usize).min(img.height());
        for py in y0..y1 {
            let fy = (py as f64 + 0.5 - top) / scale;
            if fy < 0.0 || fy >= ROWS as f64 {
                continue;
            }
            for px in x0..x1 {
                let fx = (px as f64 + 0.5 - gx) / scale;
                if fx < 0.0 || fx >= COLS as f64 {
                    continue;
                }
                if g.ink(fx as usize, fy as usize) {
                    img.set(px, py, ink);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_glyph_is_well_formed_and_column_connected() {
        for g in glyphs() {
            for row in g.rows.iter() {
                assert_eq!(row.len(), COLS, "glyph {:?}", g.ch);
            }
            let (c0, c1) = g.column_extent();
            for c in c0..=c1 {
                assert!((0..ROWS).any(|r| g.ink(c, r)), "glyph {:?} has an empty column {c}", g.ch);
            }
            if !matches!(g.ch, '\'' | '-' | ':' | '/') {
                assert_eq!(g.row_extent().1, ROWS - 1, "glyph {:?} does not sit on the baseline", g.ch);
            }
        }
    }

    #[test]
    fn glyph_bitmaps_are_unique() {
        let all: Vec<_> = glyphs().collect();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a.rows, b.rows, "{:?} and {:?} share a bitmap", a.ch, b.ch);
            }
        }
    }

    #[test]
    fn capital_i_is_twelve_pixels_tall_at_twelve_pixel_cap_height() {
        let mut img = GrayImage::new(40, 40, 255.0);
        draw_text(&mut img, "I", 3.2, 5.6, 12.0 / 7.0, 0.0);
        let rows: Vec<usize> = (0..40).filter(|&y| (0..40).any(|x| img.get(x, y) == 0.0)).collect();
        assert_eq!(rows.len(), 12);
    }

    #[test]
    fn text_width_counts_space_advance() {
        assert_eq!(text_width_units("a"), 5);
        assert_eq!(text_width_units("ab"), 11);
        assert_eq!(text_width_units("a b"), 6 + 9 + 5);
    }
}
