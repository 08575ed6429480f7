//! Synthetic camera frames shared by the benchmarks.

use lineguide::harness::{Pipeline, PipelineConfig};
use lineguide::raster::{GrayImage, RgbImage};
use lineguide::sim::{default_tracked_line, render_page, CameraRig, CameraSim, FingerPose, PageLayout};
use rand::SeedableRng;

pub struct Scene {
    pub rig: CameraRig,
    pub page: GrayImage,
    pub pipeline: Pipeline,
    /// Frames with the fingertip under successive words of the tracked line.
    pub frames: Vec<RgbImage>,
}

/// A fisheye camera of `width` x `height` pixels looking at the default page.
pub fn scene(width: usize, height: usize, focal_px: f64, frames: usize) -> Scene {
    let cfg = PipelineConfig::default();
    let rig = CameraRig { width, height, focal_px, px_per_mm: cfg.px_per_mm, ..CameraRig::default() };
    let layout = PageLayout::default();
    let page = render_page(&layout, cfg.px_per_mm).expect("default page renders");
    let camera = CameraSim::new(rig.clone());
    let line = default_tracked_line(&layout);
    let words = layout.word_boxes_mm(line);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let frames = (0..frames)
        .map(|i| {
            let pose = FingerPose::new(words[i % words.len()].1.center().x, layout.track_y_mm(line));
            camera.capture(&page, cfg.px_per_mm, &pose, true, &mut rng)
        })
        .collect();
    let pipeline = Pipeline::with_calibration(cfg, rig.calibration()).expect("default config is valid");
    Scene { rig, page, pipeline, frames }
}

/// The 640x480 camera the throughput figures refer to.
pub fn vga_scene(frames: usize) -> Scene {
    scene(640, 480, 400.0, frames)
}
