use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lineguide(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lineguide"))
        .args(args)
        .current_dir(dir)
        .env_remove("LINEGUIDE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn braille_prints_one_cell_per_letter() {
    let dir = tempfile::tempdir().unwrap();
    let out = lineguide(dir.path(), &["braille", "--text", "abc"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["cells"], serde_json::json!([{"dots": [1], "unicode": "⠁"}, {"dots": [1, 2], "unicode": "⠃"}, {"dots": [1, 4], "unicode": "⠉"}]));
    assert_eq!(v["roundTrip"], true);
}

#[test]
fn braille_waveform_is_written_under_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = lineguide(dir.path(), &["braille", "--text", "Hi", "--dialect", "eight", "--out", "wave"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("wave/waveform.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,dotIndex,state"));
    assert!(csv.lines().count() > 1);
    let unencodable = lineguide(dir.path(), &["braille", "--text", "€"]);
    assert_eq!(unencodable.status.code(), Some(1));
    assert_eq!(stderr_json(&unencodable)["kind"], "runtime");
}

#[test]
fn usage_errors_exit_with_two_and_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["experiment", "--reps", "many"],
        &["--set", "no_such_key=1", "experiment"],
        &["pipeline", "--input", "missing.png"],
        &["metrics", "--input", "missing.jsonl"],
    ] {
        let out = lineguide(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr_json(&out);
        assert_eq!(err["kind"], "usage", "{args:?}");
        assert!(err["error"].as_str().is_some_and(|s| !s.is_empty()));
    }
}

#[test]
fn pipeline_on_a_blank_frame_reports_no_lines() {
    let dir = tempfile::tempdir().unwrap();
    image::RgbImage::from_pixel(320, 240, image::Rgb([255, 255, 255])).save(dir.path().join("blank.png")).unwrap();
    let out = lineguide(dir.path(), &["pipeline", "--input", "blank.png", "--out", "res", "--overlays"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["issues"]["NoLinesFound"], 1);
    assert_eq!(summary["commands"]["None"], 1);
    let diag: Value = serde_json::from_str(std::fs::read_to_string(dir.path().join("res/diagnostics.jsonl")).unwrap().trim()).unwrap();
    assert!(diag["issues"].as_array().unwrap().iter().any(|i| i["issue"] == "NoLinesFound"));
    assert!(dir.path().join("res/commands.jsonl").exists());
    assert!(dir.path().join("res/overlays/frame000000.png").exists());
}

#[test]
fn experiment_outputs_and_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = lineguide(dir.path(), &["experiment", "--reps", "3", "--perception", "geometric", "--out", "exp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["runCount"], 3);
    let exp = dir.path().join("exp");
    for f in ["trajectories.jsonl", "trajectories.csv", "commands.jsonl", "metrics.json", "metrics.csv", "envelope.csv", "config.toml"] {
        assert!(exp.join(f).exists(), "{f}");
    }
    for f in ["trajectories", "offset_histogram", "speed_profile", "command_raster"] {
        assert!(exp.join(format!("plots/{f}.png")).exists(), "{f}");
    }
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(exp.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
    for log in ["exp/trajectories.csv", "exp/trajectories.jsonl"] {
        let again = lineguide(dir.path(), &["metrics", "--input", log]);
        assert_eq!(again.status.code(), Some(0));
        assert_eq!(stdout_json(&again), report, "{log}");
    }
    let snapshot = lineguide(dir.path(), &["--config", "exp/config.toml", "experiment", "--show-config"]);
    assert_eq!(String::from_utf8(snapshot.stdout).unwrap(), std::fs::read_to_string(exp.join("config.toml")).unwrap());
}

#[test]
fn closed_loop_experiment_keeps_the_finger_on_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = lineguide(dir.path(), &["experiment", "--feedback", "on", "--reps", "25", "--seed", "7", "--no-plots", "--out", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!(report["containment2mmFraction"].as_f64().unwrap() >= 0.95, "{}", report["containment2mmFraction"]);
}

#[test]
fn show_config_layers_file_environment_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let defaults = lineguide(dir.path(), &["pipeline", "--show-config"]);
    assert_eq!(defaults.status.code(), Some(0));
    let text = String::from_utf8(defaults.stdout).unwrap();
    assert!(text.contains("frame_rate_hz = 3.0"));
    std::fs::write(dir.path().join("cfg.toml"), "seed = 3\nrepetitions = 4\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lineguide"))
        .args(["--config", "cfg.toml", "experiment", "--reps", "9", "--show-config"])
        .current_dir(dir.path())
        .env("LINEGUIDE_SEED", "11")
        .output()
        .unwrap();
    let shown: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert_eq!(shown["seed"].as_integer(), Some(11));
    assert_eq!(shown["repetitions"].as_integer(), Some(9));
    let serve = lineguide(dir.path(), &["serve", "--addr", "0.0.0.0:9000", "--show-config"]);
    let shown: toml::Table = String::from_utf8(serve.stdout).unwrap().parse().unwrap();
    assert_eq!(shown["addr"].as_str(), Some("0.0.0.0:9000"));
}

#[test]
fn calibration_writes_parameters_or_fails_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["calibrate", "--perception", "geometric", "--reps", "2", "--max-rounds", "1"];
    let loose: Vec<&str> = base.iter().copied().chain(["--set", "targets.tolerance=10.0", "--out", "ok"]).collect();
    let out = lineguide(dir.path(), &loose);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let params = std::fs::read_to_string(dir.path().join("ok/finger_model.toml")).unwrap();
    lineguide::sim::FingerModelParams::parse(&params).unwrap();
    let strict: Vec<&str> = base.iter().copied().chain(["--set", "targets.tolerance=1e-6", "--out", "bad"]).collect();
    let out = lineguide(dir.path(), &strict);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "runtime");
}

#[test]
fn bench_reports_throughput() {
    let dir = tempfile::tempdir().unwrap();
    let out = lineguide(dir.path(), &["bench", "--frames", "3", "--width", "320", "--height", "240", "--focal", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["frames"], 3);
    assert!(v["framesPerS"].as_f64().unwrap() > 0.0);
}
