use lineguide::feedback::CommandKind;
use lineguide::harness::{Pipeline, PipelineConfig};
use lineguide::page::{detect_fingertip, PageConfig};
use lineguide::sim::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

fn ink_rows(img: &lineguide::raster::GrayImage) -> Vec<usize> {
    (0..img.height()).filter(|&y| (0..img.width()).any(|x| img.get(x, y) < 128.0)).collect()
}

#[test]
fn page_line_pitch_is_forty_pixels_at_four_per_mm() {
    let layout = PageLayout::with_text(&["HELLO", "WORLD"]);
    let img = render_page(&layout, 4.0).unwrap();
    let rows = ink_rows(&img);
    let last_of_first = rows.iter().copied().take_while(|&y| y < rows[0] + 20).max().unwrap();
    let last = *rows.last().unwrap();
    assert_eq!(last - last_of_first, 40);
}

#[test]
fn single_capital_i_is_twelve_pixels_tall() {
    let img = render_page(&PageLayout::with_text(&["I"]), 4.0).unwrap();
    let rows = ink_rows(&img);
    assert_eq!(rows.last().unwrap() - rows[0] + 1, 12);
}

#[test]
fn empty_text_gives_a_white_page() {
    let img = render_page(&PageLayout::with_text(&[]), 2.0).unwrap();
    assert!(img.data().iter().all(|&v| v == 255.0));
}

#[test]
fn overlong_line_is_rejected() {
    let long = "w".repeat(400);
    let err = render_page(&PageLayout::with_text(&[long.as_str()]), 2.0).unwrap_err();
    assert!(matches!(err, SimError::TextOverflow { line: 0 }));
}

#[test]
fn pinhole_view_without_noise_is_a_page_crop() {
    let layout = PageLayout::default();
    let dpmm = 8.0;
    let page = render_page(&layout, dpmm).unwrap();
    let rig = CameraRig { fisheye: false, noise_sigma: 0.0, ..CameraRig::default() };
    let cam = CameraSim::new(rig.clone());
    // Pixel centres line up with page pixels when x * dpmm - 0.5 is whole.
    let (n, m) = (400usize, 900usize);
    let pose = FingerPose::new((n as f64 + 0.5) / dpmm, (m as f64 + 0.5) / dpmm);
    let view = cam.capture(&page, dpmm, &pose, false, &mut ChaCha8Rng::seed_from_u64(1));
    let tip = rig.tip_pixel();
    for y in 0..rig.height {
        for x in 0..rig.width {
            let px = n + x - tip.x as usize;
            let py = m + y - tip.y as usize;
            let expected = page.get(px, py).round() as u8;
            assert_eq!(view.get(x, y), [expected; 3], "pixel ({x}, {y})");
        }
    }
}

#[test]
fn fingertip_apex_survives_the_lens_and_rectification() {
    let layout = PageLayout::default();
    let page = render_page(&layout, 8.0).unwrap();
    let rig = CameraRig::default();
    let cam = CameraSim::new(rig.clone());
    let pipeline = Pipeline::with_calibration(PipelineConfig::default(), rig.calibration()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let line = default_tracked_line(&layout);
    for (i, dx) in [0.0, 12.5, 40.0, 77.0, 120.0].iter().enumerate() {
        let pose = FingerPose::new(layout.margin_left_mm + dx, layout.track_y_mm(line) + i as f64 * 0.7 - 1.4);
        let frame = cam.capture(&page, 8.0, &pose, true, &mut rng);
        let tip = detect_fingertip(&pipeline.rectify(&frame), &PageConfig::default()).unwrap();
        let d = tip.position.distance(&rig.tip_pixel());
        assert!(d <= 2.0, "pose {pose:?}: apex off by {d:.2} px");
    }
}

#[test]
fn pixel_and_page_coordinates_invert() {
    let rig = CameraRig::default();
    let pose = FingerPose { x_mm: 50.0, y_mm: 80.0, yaw_rad: 0.2 };
    let p = lineguide::geometry::Point2::new(37.0, 190.0);
    let back = rig.page_mm_to_pixel(&pose, rig.pixel_to_page_mm(&pose, p));
    assert!(back.distance(&p) < 1e-9);
    assert!(rig.pixel_to_page_mm(&pose, rig.tip_pixel()).distance(&lineguide::geometry::Point2::new(50.0, 80.0)) < 1e-12);
}

#[test]
fn builtin_ocr_reads_focused_words_through_a_noisy_camera() {
    let layout = PageLayout::default();
    let page = render_page(&layout, 8.0).unwrap();
    let rig = CameraRig { noise_sigma: 8.0 / 255.0, ..CameraRig::default() };
    let cam = CameraSim::new(rig.clone());
    let pipeline = Pipeline::with_calibration(PipelineConfig::default(), rig.calibration()).unwrap();
    let line = default_tracked_line(&layout);
    let words = layout.word_boxes_mm(line);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for (word, bbox) in words.iter().skip(1).step_by(2).take(4) {
        let pose = FingerPose::new(bbox.center().x, layout.track_y_mm(line));
        let frame = cam.capture(&page, 8.0, &pose, true, &mut rng);
        let mut state = pipeline.new_session().unwrap();
        let out = pipeline.step(&frame, 0.0, &mut state);
        let expected: String = word.chars().filter(|c| c.is_alphanumeric()).collect();
        let got: String = out.diagnostics.word.clone().unwrap_or_default().chars().filter(|c| c.is_alphanumeric()).collect();
        assert_eq!(got.to_lowercase(), expected.to_lowercase(), "word under x = {:.1} mm", bbox.center().x);
        checked += 1;
    }
    assert_eq!(checked, 4);
}

fn still_finger() -> FingerModelParams {
    FingerModelParams { drift_bias_mm_per_s: 0.0, drift_sigma_mm: 0.0, scan_speed_spread: 0.0, ..FingerModelParams::default() }
}

#[test]
fn finger_without_drift_stays_on_the_line() {
    let params = still_finger();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let traits = RunTraits::sample(&params, &mut rng);
    let mut state = FingerState::new(0.0, 12.0, traits);
    for _ in 0..1000 {
        step_finger(&mut state, CommandKind::None, &params, 0.01, &mut rng);
    }
    assert_eq!(state.y_mm, 12.0);
    assert!((state.x_mm - 10.0 * params.scan_speed_mm_per_s).abs() < 1e-6);
}

#[test]
fn finger_corrects_after_its_reaction_delay() {
    let params = still_finger();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let traits = RunTraits::sample(&params, &mut rng);
    let mut state = FingerState::new(0.0, 0.0, traits);
    let ev = step_finger(&mut state, CommandKind::Down, &params, 0.01, &mut rng).expect("reaction scheduled");
    assert_eq!(ev.t, 0.0);
    let mut moved_at = None;
    for _ in 0..1000 {
        step_finger(&mut state, CommandKind::Down, &params, 0.01, &mut rng);
        if state.y_mm > 0.0 && moved_at.is_none() {
            moved_at = Some(state.t);
        }
    }
    let moved_at = moved_at.expect("finger moved down");
    assert!((moved_at - ev.delay_s).abs() <= 0.02 + 1e-9, "moved at {moved_at}, delay {}", ev.delay_s);
    // Up commands move the other way.
    let before = state.y_mm;
    for _ in 0..2000 {
        step_finger(&mut state, CommandKind::Up, &params, 0.01, &mut rng);
    }
    assert!(state.y_mm < before);
}

#[test]
fn shipped_finger_model_is_valid() {
    let p = FingerModelParams::calibrated();
    p.validate().unwrap();
    assert!(FingerModelParams::parse("scan_speed_mm_per_s = -1").is_err());
    assert!(FingerModelParams::parse("unknown = 1").is_err());
}

fn short_layout() -> PageLayout {
    PageLayout::with_text(&[
        "the quick brown fox jumps over the lazy dog",
        "pack my box with five dozen liquor jugs",
        "sphinx of black quartz judge my vow",
    ])
}

fn quiet_config(feedback_on: bool, perception: Perception) -> ExperimentConfig {
    ExperimentConfig {
        layout: short_layout(),
        camera: CameraRig { noise_sigma: 0.0, ..CameraRig::default() },
        finger: FingerModelParams { backtrack_probability: 0.0, ..still_finger() },
        feedback_on,
        repetitions: 1,
        perception,
        geometric_noise_mm: 0.0,
        tracked_line: Some(1),
        ..ExperimentConfig::default()
    }
}

#[test]
fn zero_drift_run_is_a_straight_line_with_or_without_feedback() {
    for (fb, perception) in [(false, Perception::Vision), (true, Perception::Vision), (true, Perception::Geometric)] {
        let out = run_experiment(&quiet_config(fb, perception)).unwrap();
        let log = &out.logs[0];
        assert!(log.completed);
        assert!(log.samples.len() > 20);
        assert!(log.samples.iter().all(|s| s.y_mm == 0.0), "feedback {fb}, {perception:?}");
        assert!(log.samples.iter().all(|s| !s.command.is_directional()));
        assert!(log.samples.windows(2).all(|w| w[1].x_mm > w[0].x_mm));
    }
}

#[test]
fn samples_are_evenly_spaced_in_time() {
    let cfg = ExperimentConfig { repetitions: 2, perception: Perception::Geometric, ..ExperimentConfig::default() };
    let out = run_experiment(&cfg).unwrap();
    for log in &out.logs {
        for w in log.samples.windows(2) {
            assert!((w[1].t - w[0].t - 0.05).abs() < 1e-9);
        }
    }
}

fn serialized(out: &ExperimentOutput) -> (Vec<u8>, Vec<u8>, String) {
    let mut traj = Vec::new();
    write_trajectory_jsonl(&mut traj, &out.logs).unwrap();
    let mut cmds = Vec::new();
    write_command_jsonl(&mut cmds, &out.logs).unwrap();
    let metrics = serde_json::to_string(&compute_metrics(&out.logs).unwrap()).unwrap();
    (traj, cmds, metrics)
}

#[test]
fn identical_seeds_give_identical_logs() {
    let cfg = ExperimentConfig { repetitions: 4, perception: Perception::Geometric, seed: 99, ..ExperimentConfig::default() };
    assert_eq!(serialized(&run_experiment(&cfg).unwrap()), serialized(&run_experiment(&cfg).unwrap()));
    let other = ExperimentConfig { seed: 100, ..cfg.clone() };
    assert_ne!(serialized(&run_experiment(&cfg).unwrap()).0, serialized(&run_experiment(&other).unwrap()).0);

    let mut vision = quiet_config(true, Perception::Vision);
    vision.finger = FingerModelParams::calibrated();
    vision.camera = CameraRig::default();
    assert_eq!(serialized(&run_experiment(&vision).unwrap()), serialized(&run_experiment(&vision).unwrap()));
}

#[test]
fn open_and_closed_loop_runs_share_their_traits() {
    let mut cfg = ExperimentConfig { repetitions: 3, perception: Perception::Geometric, ..ExperimentConfig::default() };
    let open = run_experiment(&cfg).unwrap();
    cfg.feedback_on = false;
    let closed = run_experiment(&cfg).unwrap();
    for (a, b) in open.logs.iter().zip(&closed.logs) {
        assert_eq!(a.traits, b.traits);
    }
}

#[test]
fn blind_pipeline_reports_a_stall() {
    let mut cfg = quiet_config(true, Perception::Vision);
    cfg.pipeline.page.min_line_corners = 1_000_000;
    match run_experiment(&cfg) {
        Err(SimError::PipelineStall { run: 0, seconds, .. }) => assert!(seconds > 2.0),
        other => panic!("expected a stall, got {other:?}"),
    }
}

#[test]
fn invalid_experiments_are_rejected() {
    let base = ExperimentConfig { perception: Perception::Geometric, ..ExperimentConfig::default() };
    assert!(run_experiment(&ExperimentConfig { log_hz: 30.0, ..base.clone() }).is_err());
    assert!(run_experiment(&ExperimentConfig { tracked_line: Some(500), ..base.clone() }).is_err());
    let mut bad = base;
    bad.finger.scan_speed_mm_per_s = 0.0;
    assert!(run_experiment(&bad).is_err());
}

#[test]
fn default_tracked_line_is_the_longest_middle_line() {
    let layout = PageLayout::with_text(&["aaaaaaaaaaaaaaaa", "bb", "cccc", "dd", "eeeeeeeeeeeeeeeee", "f"]);
    assert_eq!(default_tracked_line(&layout), 2);
    assert_eq!(default_tracked_line(&PageLayout::with_text(&["x"])), 0);
}

#[test]
fn reaction_delays_are_lognormal_with_the_configured_median() {
    let p = FingerModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut v: Vec<f64> = (0..20_000).map(|_| p.reaction_delay_dist().sample(&mut rng)).collect();
    v.sort_by(f64::total_cmp);
    let median = v[v.len() / 2];
    assert!((median / p.reaction_delay_median_s - 1.0).abs() < 0.03, "median {median}");
    let c: Vec<f64> = (0..20_000).map(|_| p.compliance_duration_dist().sample(&mut rng)).collect();
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    assert!((mean / p.compliance_duration_mean_s - 1.0).abs() < 0.03, "mean {mean}");
}

#[test]
fn calibration_recovers_targets_from_a_perturbed_start() {
    let base = ExperimentConfig { repetitions: 10, perception: Perception::Geometric, ..ExperimentConfig::default() };
    let start = FingerModelParams {
        scan_speed_mm_per_s: 25.0,
        drift_bias_mm_per_s: 0.3,
        correction_speed_mm_per_s: 1.5,
        compliance_slowdown: 0.2,
        ..FingerModelParams::calibrated()
    };
    let report = calibrate_finger_model(&CalibrationTargets::default(), &base, &start).unwrap();
    assert!(report.worst_relative_error <= 0.10);
    assert!((report.measured.open_loop_speed_mm_per_s - 18.21).abs() <= 1.821);
}

#[test]
fn unreachable_targets_fail_with_the_best_parameters() {
    let base = ExperimentConfig { repetitions: 3, perception: Perception::Geometric, ..ExperimentConfig::default() };
    let targets = CalibrationTargets { closed_loop_speed_mm_per_s: 40.0, max_rounds: 3, ..CalibrationTargets::default() };
    match calibrate_finger_model(&targets, &base, &FingerModelParams::calibrated()) {
        Err(SimError::CalibrationFailed(msg)) => assert!(msg.contains("scan_speed_mm_per_s")),
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn plots_are_written() {
    let cfg = ExperimentConfig { repetitions: 3, perception: Perception::Geometric, ..ExperimentConfig::default() };
    let out = run_experiment(&cfg).unwrap();
    let report = compute_metrics(&out.logs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_plots(dir.path(), &out.logs, &report).unwrap();
    assert_eq!(paths.len(), 4);
    for p in paths {
        let img = image::open(&p).unwrap();
        assert_eq!((img.width(), img.height()), (800, 400));
    }
}
