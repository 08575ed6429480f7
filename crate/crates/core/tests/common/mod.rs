#![allow(dead_code)]

use lineguide::geometry::BBox;
use lineguide::raster::{GrayImage, RgbImage};
use lineguide::sim::{render_page, PageLayout};

/// A small page of `lines` sized `width` x `height` pixels at `dpmm`.
pub fn small_page(lines: &[&str], dpmm: f64, width: usize, height: usize, margin_mm: f64) -> (PageLayout, GrayImage) {
    let layout = PageLayout {
        page_width_mm: width as f64 / dpmm,
        page_height_mm: height as f64 / dpmm,
        margin_left_mm: margin_mm,
        margin_top_mm: margin_mm,
        text: lines.iter().map(|s| s.to_string()).collect(),
        ..PageLayout::default()
    };
    let img = render_page(&layout, dpmm).unwrap();
    (layout, img)
}

pub fn three_line_page() -> (PageLayout, GrayImage) {
    small_page(
        &["read along the line now", "keep the finger steady", "words are read aloud"],
        8.0,
        640,
        480,
        6.0,
    )
}

pub fn mm_box_to_px(b: &BBox, dpmm: f64) -> BBox {
    BBox::new(b.min_x * dpmm, b.min_y * dpmm, b.max_x * dpmm, b.max_y * dpmm)
}

/// Paints a solid blue isosceles wedge with its apex at (`ax`, `ay`),
/// opening downward to the bottom of the image.
pub fn paint_wedge(img: &mut RgbImage, ax: f64, ay: f64, half_angle: f64) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (dx, dy) = (x as f64 - ax, y as f64 - ay);
            if dy >= 0.0 && dx.abs() <= dy * half_angle.tan() + 0.5 {
                img.set(x, y, [20, 40, 200]);
            }
        }
    }
}
