//! Raster containers shared by every stage of the pipeline.
//!
//! Gray intensities are `f32` on the 0..=255 scale so resampled values keep
//! their sub-level precision; RGB frames stay 8-bit like the camera delivers.

use std::path::Path;

use thiserror::Error;

use crate::geometry::PixelRect;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image i/o failed: {0}")]
    Io(#[from] image::ImageError),
    #[error("raster dimensions {width}x{height} do not match buffer length {len}")]
    BadDimensions { width: usize, height: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: f32) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::BadDimensions { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Clamped-coordinate read.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integers). Returns `None` outside `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f32> {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    pub fn sample_or(&self, x: f64, y: f64, fill: f32) -> f32 {
        self.sample_bilinear(x, y).unwrap_or(fill)
    }

    pub fn crop(&self, rect: PixelRect) -> GrayImage {
        let rect = clip_rect(rect, self.width, self.height);
        GrayImage::from_fn(rect.width, rect.height, |x, y| self.get(rect.x + x, rect.y + y))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> GrayImage {
        GrayImage { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Half-resolution image by 2x2 box averaging (after a light binomial blur).
    pub fn downsample_half(&self) -> GrayImage {
        let blurred = self.gaussian_blur(0.8);
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        GrayImage::from_fn(w, h, |x, y| {
            let sx = (2 * x).min(self.width - 1);
            let sy = (2 * y).min(self.height - 1);
            let sx1 = (sx + 1).min(self.width - 1);
            let sy1 = (sy + 1).min(self.height - 1);
            0.25 * (blurred.get(sx, sy) + blurred.get(sx1, sy) + blurred.get(sx, sy1) + blurred.get(sx1, sy1))
        })
    }

    /// Separable Gaussian blur with clamped borders.
    pub fn gaussian_blur(&self, sigma: f64) -> GrayImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel: Vec<f32> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32).collect();
        let sum: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);

        let mut tmp = GrayImage::new(self.width, self.height, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for (i, k) in kernel.iter().enumerate() {
                    acc += k * self.get_clamped(x as isize + i as isize - radius, y as isize);
                }
                tmp.set(x, y, acc);
            }
        }
        let mut out = GrayImage::new(self.width, self.height, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for (i, k) in kernel.iter().enumerate() {
                    acc += k * tmp.get_clamped(x as isize, y as isize + i as isize - radius);
                }
                out.set(x, y, acc);
            }
        }
        out
    }

    /// Rotation about the image center by `angle` radians (y-down sense),
    /// bilinear sampling, out-of-range pixels filled with `fill`.
    pub fn rotate_about_center(&self, angle: f64, fill: f32) -> GrayImage {
        let cx = (self.width as f64 - 1.0) * 0.5;
        let cy = (self.height as f64 - 1.0) * 0.5;
        // Backward map: output pixel p comes from R(-angle) p.
        let (s, c) = (-angle).sin_cos();
        GrayImage::from_fn(self.width, self.height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = cx + c * dx - s * dy;
            let sy = cy + s * dx + c * dy;
            self.sample_or(sx, sy, fill)
        })
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([self.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8])
        })
    }

    pub fn from_luma8(img: &image::GrayImage) -> GrayImage {
        GrayImage::from_fn(img.width() as usize, img.height() as usize, |x, y| img.get_pixel(x as u32, y as u32)[0] as f32)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        self.to_luma8().save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GrayImage, RasterError> {
        Ok(GrayImage::from_luma8(&image::open(path)?.to_luma8()))
    }
}

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_gray(gray: &GrayImage) -> RgbImage {
        RgbImage::from_fn(gray.width(), gray.height(), |x, y| {
            let v = gray.get(x, y).round().clamp(0.0, 255.0) as u8;
            [v, v, v]
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Rgb) {
        self.data[y * self.width + x] = v;
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    /// Rec. 601 luma.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .data
            .iter()
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect();
        GrayImage { width: self.width, height: self.height, data }
    }

    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<Rgb> {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
        let mut out = [0u8; 3];
        for ch in 0..3 {
            let top = a[ch] as f32 * (1.0 - fx) + b[ch] as f32 * fx;
            let bottom = c[ch] as f32 * (1.0 - fx) + d[ch] as f32 * fx;
            out[ch] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        Some(out)
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| image::Rgb(self.get(x as usize, y as usize)))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        self.to_rgb8().save(path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RgbImage, RasterError> {
        let img = image::open(path)?.to_rgb8();
        Ok(RgbImage::from_fn(img.width() as usize, img.height() as usize, |x, y| img.get_pixel(x as u32, y as u32).0))
    }
}

/// Binary raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, fill: bool) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn invert(&self) -> Mask {
        Mask { width: self.width, height: self.height, data: self.data.iter().map(|b| !b).collect() }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        }
    }
}

/// Pixel content of a [`Frame`].
#[derive(Debug, Clone, PartialEq)]
pub enum FrameImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

/// A raster with its capture time, the unit that flows through the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub image: FrameImage,
}

impl Frame {
    pub fn rgb(timestamp: f64, image: RgbImage) -> Self {
        Self { timestamp, image: FrameImage::Rgb(image) }
    }

    pub fn gray(timestamp: f64, image: GrayImage) -> Self {
        Self { timestamp, image: FrameImage::Gray(image) }
    }

    pub fn width(&self) -> usize {
        match &self.image {
            FrameImage::Gray(g) => g.width(),
            FrameImage::Rgb(c) => c.width(),
        }
    }

    pub fn height(&self) -> usize {
        match &self.image {
            FrameImage::Gray(g) => g.height(),
            FrameImage::Rgb(c) => c.height(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        match &self.image {
            FrameImage::Gray(g) => g.clone(),
            FrameImage::Rgb(c) => c.to_gray(),
        }
    }

    pub fn to_rgb(&self) -> RgbImage {
        match &self.image {
            FrameImage::Gray(g) => RgbImage::from_gray(g),
            FrameImage::Rgb(c) => c.clone(),
        }
    }
}

pub(crate) fn clip_rect(rect: PixelRect, width: usize, height: usize) -> PixelRect {
    let x = rect.x.min(width);
    let y = rect.y.min(height);
    let r = rect.right().min(width);
    let b = rect.bottom().min(height);
    PixelRect::new(x, y, r - x, b - y)
}

/// Peak signal-to-noise ratio in dB for 0..=255 images.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> f64 {
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (255.0 * 255.0 / mse).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_pixel_values_at_integers() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x + 10 * y) as f32);
        assert_eq!(img.sample_bilinear(2.0, 1.0), Some(12.0));
        assert_eq!(img.sample_bilinear(1.5, 0.0), Some(1.5));
        assert_eq!(img.sample_bilinear(3.0, 2.0), Some(23.0));
        assert_eq!(img.sample_bilinear(3.01, 2.0), None);
        assert_eq!(img.sample_bilinear(-0.01, 0.0), None);
    }

    #[test]
    fn rotation_by_zero_is_identity() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x * 31 + y * 17) % 255) as f32);
        assert_eq!(img.rotate_about_center(0.0, 255.0), img);
    }

    #[test]
    fn psnr_of_identical_is_infinite() {
        let img = GrayImage::new(3, 3, 7.0);
        assert!(psnr(&img, &img).is_infinite());
    }
}
