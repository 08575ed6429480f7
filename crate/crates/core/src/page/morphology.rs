//! Binary morphology with rectangular structuring elements.

use crate::raster::Mask;

/// Dilation with a `w` x `h` rectangle anchored at its center. Pixels
/// outside the image count as unset.
pub fn dilate(m: &Mask, w: usize, h: usize) -> Mask {
    let rows = sweep(m, w.max(1), true, true);
    sweep(&rows, h.max(1), false, true)
}

/// Erosion with a `w` x `h` rectangle. Pixels outside the image count as
/// set, so erosion does not eat in from the border.
pub fn erode(m: &Mask, w: usize, h: usize) -> Mask {
    let rows = sweep(m, w.max(1), true, false);
    sweep(&rows, h.max(1), false, false)
}

pub fn close(m: &Mask, w: usize, h: usize) -> Mask {
    erode(&dilate(m, w, h), w, h)
}

pub fn open(m: &Mask, w: usize, h: usize) -> Mask {
    dilate(&erode(m, w, h), w, h)
}

/// One-dimensional running OR (`any = true`) or AND along rows or columns.
fn sweep(m: &Mask, len: usize, horizontal: bool, any: bool) -> Mask {
    let (w, h) = (m.width(), m.height());
    let before = (len - 1) / 2;
    let after = len - 1 - before;
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    let mut out = Mask::new(w, h, false);
    let mut prefix = vec![0usize; inner + 1];
    for o in 0..outer {
        let at = |i: usize| if horizontal { m.get(i, o) } else { m.get(o, i) };
        for i in 0..inner {
            prefix[i + 1] = prefix[i] + at(i) as usize;
        }
        for i in 0..inner {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(inner - 1);
            let set = prefix[hi + 1] - prefix[lo];
            let v = if any {
                set > 0
            } else {
                // Out-of-image positions count as set for erosion.
                set == hi + 1 - lo
            };
            if horizontal {
                out.set(i, o, v);
            } else {
                out.set(o, i, v);
            }
        }
    }
    out
}
