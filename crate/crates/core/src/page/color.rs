//! sRGB to CIE L*a*b* (D65 white point).

use crate::raster::{GrayImage, RgbImage};

const XN: f64 = 0.950_47;
const YN: f64 = 1.0;
const ZN: f64 = 1.088_83;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    if t > EPS {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// Converts one 8-bit sRGB pixel to (L*, a*, b*).
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0] as f64 / 255.0);
    let g = srgb_to_linear(rgb[1] as f64 / 255.0);
    let b = srgb_to_linear(rgb[2] as f64 / 255.0);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (lab_f(x / XN), lab_f(y / YN), lab_f(z / ZN));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Channel index into the (L*, a*, b*) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabChannel {
    L,
    A,
    B,
}

/// Extracts one Lab channel as a float image.
pub fn lab_channel(img: &RgbImage, channel: LabChannel) -> GrayImage {
    let idx = match channel {
        LabChannel::L => 0,
        LabChannel::A => 1,
        LabChannel::B => 2,
    };
    let mut cache = std::collections::HashMap::<[u8; 3], f32>::new();
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get(x, y);
        *cache.entry(p).or_insert_with(|| srgb_to_lab(p)[idx] as f32)
    })
}
