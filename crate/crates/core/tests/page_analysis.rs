mod common;

use common::*;
use lineguide::geometry::{PixelRect, Point2};
use lineguide::page::*;
use lineguide::raster::{GrayImage, Mask, RgbImage};
use lineguide::sim::{render_page, PageLayout};

fn page_cfg(pitch_px: f64) -> PageConfig {
    PageConfig { nominal_line_pitch_px: pitch_px, ..PageConfig::default() }
}

#[test]
fn skew_of_unrotated_page_is_zero() {
    let img = render_page(&PageLayout::default(), 4.0).unwrap();
    let a = detect_skew(&img, &PageConfig::default()).unwrap();
    assert!(a.to_degrees().abs() <= 0.2, "{}", a.to_degrees());
}

#[test]
fn skew_tracks_rotation_over_plus_minus_ten_degrees() {
    let img = render_page(&PageLayout::default(), 4.0).unwrap();
    let cfg = PageConfig::default();
    for step in -4..=4 {
        let deg = step as f64 * 2.5;
        let rotated = img.rotate_about_center(deg.to_radians(), 255.0);
        let a = detect_skew(&rotated, &cfg).unwrap();
        assert!((a.to_degrees() - deg).abs() <= 0.5, "rotated {deg}, detected {}", a.to_degrees());
        let residual = detect_skew(&deskew(&rotated, a), &cfg).unwrap();
        assert!(residual.to_degrees().abs() <= 0.5, "residual {} at {deg}", residual.to_degrees());
    }
}

#[test]
fn blank_page_has_no_lines() {
    let img = GrayImage::new(300, 200, 255.0);
    assert_eq!(detect_skew(&img, &PageConfig::default()), Err(PageError::NoLinesFound));
}

#[test]
fn deskew_undoes_rotation() {
    let img = GrayImage::from_fn(200, 160, |x, y| if (60..140).contains(&x) && (50..110).contains(&y) { 0.0 } else { 255.0 });
    assert_eq!(deskew(&img, 0.0), img);
    let angle = 5f64.to_radians();
    let back = deskew(&img.rotate_about_center(angle, 255.0), angle);
    let before = fast::fast_corners(&img, 20.0, None, true);
    let after = fast::fast_corners(&back, 20.0, None, true);
    assert_eq!(before.len(), 4);
    for c in &before {
        let moved = after
            .iter()
            .map(|d| (c.x as f64 - d.x as f64).abs().max((c.y as f64 - d.y as f64).abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(moved <= 1.0, "corner {c:?} moved {moved} px");
    }
}

#[test]
fn deskew_keeps_center_pixel() {
    let mut img = GrayImage::new(41, 31, 255.0);
    img.set(20, 15, 0.0);
    for deg in [-30.0f64, 3.0, 17.0, 45.0] {
        assert_eq!(deskew(&img, deg.to_radians()).get(20, 15), 0.0);
    }
}

fn wedge_frame(apex: (f64, f64)) -> RgbImage {
    let (_, page) = three_line_page();
    let mut rgb = RgbImage::from_gray(&page);
    paint_wedge(&mut rgb, apex.0, apex.1, 0.35);
    rgb
}

#[test]
fn fingertip_is_wedge_apex() {
    for apex in [(320.0, 300.0), (101.0, 250.0), (500.0, 410.0)] {
        let tip = detect_fingertip(&wedge_frame(apex), &PageConfig::default()).unwrap();
        assert!((tip.position.x - apex.0).abs() <= 1.0 && (tip.position.y - apex.1).abs() <= 1.0, "{:?}", tip.position);
        assert!(tip.confidence > 0.0 && tip.confidence <= 1.0);
        let (x, y) = (tip.position.x as usize, tip.position.y as usize);
        assert!(tip.device_mask.get(x, y), "tip lies on the device mask");
        assert!(y == 0 || !tip.device_mask.get(x, y - 1), "tip is on the mask contour");
    }
}

#[test]
fn fingertip_survives_brightness_shifts() {
    let base = wedge_frame((320.0, 300.0));
    let p0 = detect_fingertip(&base, &PageConfig::default()).unwrap().position;
    for gain in [0.8, 1.2] {
        let shifted = RgbImage::from_fn(base.width(), base.height(), |x, y| {
            base.get(x, y).map(|v| (v as f64 * gain).round().clamp(0.0, 255.0) as u8)
        });
        let p = detect_fingertip(&shifted, &PageConfig::default()).unwrap().position;
        assert!(p.distance(&p0) <= 1.0, "gain {gain}: {p:?} vs {p0:?}");
    }
}

#[test]
fn white_frame_has_no_device() {
    let white = RgbImage::new(640, 480, [255, 255, 255]);
    assert_eq!(detect_fingertip(&white, &PageConfig::default()).unwrap_err(), PageError::NoDeviceFound);
    let (_, page) = three_line_page();
    assert_eq!(detect_fingertip(&RgbImage::from_gray(&page), &PageConfig::default()).unwrap_err(), PageError::NoDeviceFound);
}

#[test]
fn fingertip_prefers_the_largest_blob() {
    let mut img = RgbImage::new(200, 200, [250, 250, 250]);
    // 1000 px blob (40 x 25) lower right, 300 px blob (20 x 15) upper left.
    for y in 120..145 {
        for x in 140..180 {
            img.set(x, y, [10, 20, 230]);
        }
    }
    for y in 10..25 {
        for x in 10..30 {
            img.set(x, y, [10, 20, 230]);
        }
    }
    let tip = detect_fingertip(&img, &PageConfig::default()).unwrap();
    assert_eq!(tip.position, Point2::new(140.0, 120.0));
    assert_eq!(tip.device_mask.count(), 1000);
}

#[test]
fn corners_respect_the_mask() {
    let blank = GrayImage::new(100, 80, 200.0);
    assert!(detect_corners(&blank, &Mask::new(100, 80, true), &PageConfig::default()).is_empty());
    let (_, page) = three_line_page();
    let full = detect_corners(&page, &Mask::new(640, 480, true), &PageConfig::default());
    assert!(!full.is_empty());
    assert!(detect_corners(&page, &Mask::new(640, 480, false), &PageConfig::default()).is_empty());
}

#[test]
fn every_word_of_three_or_more_glyphs_has_four_corners() {
    let (layout, page) = three_line_page();
    let corners = detect_corners(&page, &Mask::new(640, 480, true), &PageConfig::default());
    for line in 0..3 {
        for (word, b) in layout.word_boxes_mm(line) {
            if word.chars().count() < 3 {
                continue;
            }
            let b = mm_box_to_px(&b, 8.0);
            let n = corners
                .iter()
                .filter(|c| c.x >= b.min_x - 1.0 && c.x <= b.max_x + 1.0 && c.y >= b.min_y - 1.0 && c.y <= b.max_y + 1.0)
                .count();
            assert!(n >= 4, "word {word:?} has {n} corners");
        }
    }
}

fn lines_of(img: &GrayImage, cfg: &PageConfig) -> TextLines {
    let corners = detect_corners(img, &Mask::new(img.width(), img.height(), true), cfg);
    cluster_text_lines(&corners, img.width(), img.height(), cfg)
}

#[test]
fn three_line_page_gives_three_ordered_regions() {
    let (layout, page) = three_line_page();
    let cfg = page_cfg(80.0);
    let lines = lines_of(&page, &cfg);
    assert_eq!(lines.regions.len(), 3);
    for (i, r) in lines.regions.iter().enumerate() {
        assert_eq!(r.id, i);
        let bottom = layout.line_bottom_mm(i) * 8.0;
        assert!((r.bbox.max_y - bottom).abs() <= 2.0, "line {i}: {} vs {bottom}", r.bbox.max_y);
        assert!(r.corner_count >= cfg.min_line_corners);
        for p in &r.baseline_points {
            assert!(r.bbox.contains(p));
        }
    }
    assert!(lines.block_angle.to_degrees().abs() <= 0.5);
}

#[test]
fn line_count_is_stable_under_rotation() {
    let (_, page) = three_line_page();
    let cfg = page_cfg(80.0);
    for deg in [-10.0f64, -7.0, -3.0, 3.0, 7.0, 10.0] {
        let rotated = page.rotate_about_center(deg.to_radians(), 255.0);
        let lines = lines_of(&rotated, &cfg);
        assert_eq!(lines.regions.len(), 3, "at {deg} degrees");
        for w in lines.regions.windows(2) {
            assert!(w[0].bbox.center().y < w[1].bbox.center().y);
        }
        if deg.abs() == 7.0 {
            assert!((lines.block_angle.to_degrees() - deg).abs() <= 0.5, "angle {} at {deg}", lines.block_angle.to_degrees());
        }
    }
}

#[test]
fn empty_corner_list_gives_no_regions() {
    assert!(cluster_text_lines(&[], 640, 480, &PageConfig::default()).regions.is_empty());
}

#[test]
fn morphology_adapts_to_the_measured_pitch() {
    // Pitch 80 px while the configuration expects 40 px.
    let (_, page) = three_line_page();
    let lines = lines_of(&page, &PageConfig::default());
    assert_eq!(lines.regions.len(), 3);
}

#[test]
fn focused_word_is_the_word_above_the_tip() {
    let dpmm = 4.0;
    let (layout, page) = small_page(&["the fingertip reads", "second line of text"], dpmm, 320, 240, 6.0);
    let cfg = page_cfg(40.0);
    let lines = lines_of(&page, &cfg);
    let (_, b) = layout.word_boxes_mm(0).into_iter().find(|(w, _)| w == "fingertip").unwrap();
    let b = mm_box_to_px(&b, dpmm);
    // Ink occupies pixel columns min_x..max_x-1 (the box edge is exclusive).
    let (ink_x0, ink_y0, ink_x1, ink_y1) = (b.min_x.round(), b.min_y.round(), b.max_x.round() - 1.0, b.max_y.round() - 1.0);
    let tip = Point2::new(b.center().x, b.max_y + 10.0);
    let crop = extract_focused_word(&lines.regions, tip, &page, &lines.blobs, &cfg).unwrap();
    assert_eq!(crop.line_id, 0);
    // The 9 x 3 dilation grows blobs by 4 px horizontally and 1 px vertically.
    let r = crop.bbox;
    let got = [r.x as f64, r.y as f64, (r.right() - 1) as f64, (r.bottom() - 1) as f64];
    let want = [ink_x0 - 4.0, ink_y0 - 1.0, ink_x1 + 4.0, ink_y1 + 1.0];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 2.0, "crop {got:?} vs expected {want:?}");
    }
    assert_eq!((crop.gray_patch.width(), crop.gray_patch.height()), (r.width, r.height));
    assert!(r.to_bbox().intersects(&lines.regions[0].bbox));
    let text = recognize_word(&crop, &TemplateOcr::new()).unwrap().text;
    assert_eq!(text, "fingertip");
}

#[test]
fn tip_above_every_line_has_no_word() {
    let (_, page) = three_line_page();
    let cfg = page_cfg(80.0);
    let lines = lines_of(&page, &cfg);
    let err = extract_focused_word(&lines.regions, Point2::new(300.0, 20.0), &page, &lines.blobs, &cfg).unwrap_err();
    assert_eq!(err, PageError::NoLineAboveFinger);
}

#[test]
fn tip_under_a_gap_between_identical_words_picks_the_left_one() {
    // At 7 px/mm a font pixel is exactly 3 px, so both words rasterize identically.
    let dpmm = 7.0;
    let (layout, page) = small_page(&["abcde abcde"], dpmm, 640, 240, 6.0);
    let cfg = page_cfg(70.0);
    let corners = detect_corners(&page, &Mask::new(640, 240, true), &cfg);
    let lines = cluster_text_lines(&corners, 640, 240, &cfg);
    assert_eq!(lines.regions.len(), 1);
    let words = layout.word_boxes_mm(0);
    let (left, right) = (mm_box_to_px(&words[0].1, dpmm), mm_box_to_px(&words[1].1, dpmm));
    let tip = Point2::new((left.max_x + right.min_x) / 2.0, left.max_y + 30.0);
    let crop = extract_focused_word(&lines.regions, tip, &page, &lines.blobs, &cfg).unwrap();
    assert!((crop.bbox.to_bbox().center().x - left.center().x).abs() < 4.0, "{:?} vs {left:?}", crop.bbox);
    let tip_right = Point2::new(right.center().x, tip.y);
    let crop = extract_focused_word(&lines.regions, tip_right, &page, &lines.blobs, &cfg).unwrap();
    assert!((crop.bbox.to_bbox().center().x - right.center().x).abs() < 4.0);
}

fn word_patch(word: &str, sigma: f64, seed: u64) -> GrayImage {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let (_, page) = small_page(&[word], 8.0, 40 + word.len() * 22, 60, 2.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma * 255.0).unwrap();
    let data = page.data().iter().map(|&v| (v as f64 + noise.sample(&mut rng)).clamp(0.0, 255.0) as f32).collect();
    GrayImage::from_vec(page.width(), page.height(), data).unwrap()
}

fn crop_of(patch: GrayImage) -> WordCrop {
    let bbox = PixelRect::new(0, 0, patch.width(), patch.height());
    WordCrop { gray_patch: patch, bbox, line_id: 0 }
}

#[test]
fn ocr_reads_clean_rendered_words() {
    let ocr = TemplateOcr::new();
    let r = recognize_word(&crop_of(word_patch("the", 0.0, 0)), &ocr).unwrap();
    assert_eq!(r.text, "the");
    assert!(r.confidence >= 0.95, "{}", r.confidence);
    for w in ["fingertip", "Braille", "line.", "42", "up-down"] {
        assert_eq!(recognize_word(&crop_of(word_patch(w, 0.0, 0)), &ocr).unwrap().text, w);
    }
}

#[test]
fn ocr_reads_noisy_fingertip() {
    let ocr = TemplateOcr::new();
    for seed in 0..5 {
        let r = recognize_word(&crop_of(word_patch("fingertip", 8.0 / 255.0, seed)), &ocr).unwrap();
        assert_eq!(r.text, "fingertip", "seed {seed}");
    }
}

#[test]
fn ocr_noise_failure_level_stays_above_baseline() {
    // Recorded regression baseline: reading first fails between sigma 0.20 and 0.30.
    let ocr = TemplateOcr::new();
    let mut fail_sigma = None;
    for step in 1..=12 {
        let sigma = step as f64 * 0.05;
        if recognize_word(&crop_of(word_patch("fingertip", sigma, 3)), &ocr).unwrap().text != "fingertip" {
            fail_sigma = Some(sigma);
            break;
        }
    }
    println!("template OCR first fails at sigma {fail_sigma:?}");
    assert!(fail_sigma.is_none_or(|s| s >= 0.15));
}

#[test]
fn ocr_rejects_unreadable_patches() {
    let ocr = TemplateOcr::new();
    let r = recognize_word(&crop_of(GrayImage::new(40, 20, 0.0)), &ocr).unwrap();
    assert_eq!((r.text.as_str(), r.confidence), ("", 0.0));
    let empty = WordCrop { gray_patch: GrayImage::new(0, 0, 0.0), bbox: PixelRect::new(0, 0, 0, 0), line_id: 0 };
    assert_eq!(recognize_word(&empty, &ocr).unwrap_err(), PageError::EmptyCrop);
}

#[test]
fn ocr_is_deterministic() {
    let ocr = TemplateOcr::new();
    let crop = crop_of(word_patch("tracking", 4.0 / 255.0, 9));
    assert_eq!(recognize_word(&crop, &ocr).unwrap(), recognize_word(&crop, &ocr).unwrap());
}

#[test]
fn external_engine_reports_stdout_and_failures() {
    let ok = ExternalOcr::new("sh", vec!["-c".into(), "printf 'hello\\n0.75\\n'".into()]);
    let r = ok.recognize(&GrayImage::new(4, 4, 255.0)).unwrap();
    assert_eq!((r.text.as_str(), r.confidence), ("hello", 0.75));
    let bad = ExternalOcr::new("sh", vec!["-c".into(), "exit 3".into()]);
    assert!(matches!(bad.recognize(&GrayImage::new(4, 4, 255.0)), Err(PageError::EngineFailure(_))));
    let missing = ExternalOcr::new("/nonexistent/ocr-binary", vec![]);
    assert!(matches!(missing.recognize(&GrayImage::new(4, 4, 255.0)), Err(PageError::EngineFailure(_))));
}

#[test]
fn debug_dump_writes_png_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (_, page) = three_line_page();
    let lines = lines_of(&page, &page_cfg(80.0));
    let overlay = DebugOverlay { lines: lines.regions, tip: Some(Point2::new(10.0, 10.0)), ..Default::default() };
    write_debug_dump(dir.path(), "frame-0001", &RgbImage::from_gray(&page), &overlay).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("frame-0001.json")).unwrap()).unwrap();
    assert_eq!(json["lines"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("frame-0001.png").exists());
}
