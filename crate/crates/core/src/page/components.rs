//! Connected-component labelling of binary masks.

use crate::geometry::PixelRect;
use crate::raster::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: u32,
    pub area: usize,
    pub bbox: PixelRect,
    /// First pixel in raster order: the topmost, leftmost pixel.
    pub top_pixel: (usize, usize),
}

/// Labelled image: 0 is background, components are numbered from 1 in
/// raster order of their first pixel.
#[derive(Debug, Clone)]
pub struct Labels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labels {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn mask_of(&self, label: u32) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| self.at(x, y) == label)
    }

    pub fn largest(&self) -> Option<&Component> {
        self.components.iter().max_by(|a, b| a.area.cmp(&b.area).then(b.label.cmp(&a.label)))
    }
}

/// 8-connected component labelling by flood fill.
pub fn label_components(m: &Mask) -> Labels {
    let (w, h) = (m.width(), m.height());
    let mut labels = vec![0u32; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for y0 in 0..h {
        for x0 in 0..w {
            if !m.get(x0, y0) || labels[y0 * w + x0] != 0 {
                continue;
            }
            let label = components.len() as u32 + 1;
            let (mut minx, mut miny, mut maxx, mut maxy) = (x0, y0, x0, y0);
            let mut area = 0;
            labels[y0 * w + x0] = label;
            stack.push((x0, y0));
            while let Some((x, y)) = stack.pop() {
                area += 1;
                minx = minx.min(x);
                maxx = maxx.max(x);
                miny = miny.min(y);
                maxy = maxy.max(y);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let i = ny * w + nx;
                        if m.get(nx, ny) && labels[i] == 0 {
                            labels[i] = label;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            components.push(Component {
                label,
                area,
                bbox: PixelRect::new(minx, miny, maxx - minx + 1, maxy - miny + 1),
                top_pixel: (x0, y0),
            });
        }
    }
    Labels { width: w, height: h, labels, components }
}
