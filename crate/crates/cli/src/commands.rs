use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lineguide::ebraille::{compose_frame, decode_text, encode_text, schedule_stimulation, BrailleCell, Dialect, WaveformSchedule};
use lineguide::feedback::{CommandRecord, FeedbackCommand};
use lineguide::harness::{to_toml, Pipeline, PipelineConfig, StepDiagnostics};
use lineguide::raster::RgbImage;
use lineguide::sim::{
    calibrate_finger_model, compute_metrics, default_tracked_line, read_trajectory_csv, read_trajectory_jsonl,
    render_page, run_experiment, write_command_jsonl, write_plots, write_trajectory_csv, write_trajectory_jsonl,
    CalibrationTargets, CameraRig, CameraSim, ExperimentConfig, FingerPose, MetricsReport, PageLayout,
};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::app::{BenchArgs, BrailleArgs, CalibrateArgs, ExperimentArgs, MetricsArgs, PipelineArgs};
use crate::error::{runtime, CliError};

fn create_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("creating {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| runtime(format!("writing {}: {e}", path.display())))
}

/// Prints `value` as JSON on stdout. A closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn png_inputs(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::Usage(format!("{} contains no PNG files", input.display())));
        }
        Ok(files)
    } else if input.is_file() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(CliError::Usage(format!("input {} does not exist", input.display())))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FrameDiagnostics<'a> {
    frame: String,
    t: f64,
    #[serde(flatten)]
    diagnostics: &'a StepDiagnostics,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PipelineSummary {
    frames: usize,
    commands: BTreeMap<String, usize>,
    issues: BTreeMap<String, usize>,
    words: Vec<String>,
    command_log: PathBuf,
    diagnostics_log: PathBuf,
}

pub fn pipeline(args: &PipelineArgs, mut cfg: PipelineConfig) -> Result<(), CliError> {
    let input = args.input.as_deref().ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let inputs = png_inputs(input)?;
    if args.overlays {
        cfg.debug_dump = Some(PathBuf::from("overlays"));
    }
    if let Some(dir) = &cfg.debug_dump {
        if dir.is_absolute() && !dir.starts_with(&args.out) {
            return Err(CliError::Usage(format!("debug_dump {} lies outside --out", dir.display())));
        }
        cfg.debug_dump = Some(args.out.join(dir));
    }
    let pipeline = Pipeline::new(cfg)?;
    create_out(&args.out)?;
    let command_log = args.out.join("commands.jsonl");
    let diagnostics_log = args.out.join("diagnostics.jsonl");
    let mut commands = BufWriter::new(File::create(&command_log)?);
    let mut diagnostics = BufWriter::new(File::create(&diagnostics_log)?);
    let mut state = pipeline.new_session()?;
    let period = 1.0 / pipeline.config().frame_rate_hz;
    let mut summary = PipelineSummary {
        frames: inputs.len(),
        commands: BTreeMap::new(),
        issues: BTreeMap::new(),
        words: Vec::new(),
        command_log: command_log.clone(),
        diagnostics_log: diagnostics_log.clone(),
    };
    for (i, path) in inputs.iter().enumerate() {
        let frame = RgbImage::load(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        let t = i as f64 * period;
        let out = pipeline.step(&frame, t, &mut state);
        let geometry = out.diagnostics.baseline.as_ref().map(|b| b.geometry);
        let record = CommandRecord::new(&out.command, geometry.as_ref(), out.diagnostics.tip);
        serde_json::to_writer(&mut commands, &record).map_err(runtime)?;
        commands.write_all(b"\n")?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        serde_json::to_writer(&mut diagnostics, &FrameDiagnostics { frame: name, t, diagnostics: &out.diagnostics })
            .map_err(runtime)?;
        diagnostics.write_all(b"\n")?;
        *summary.commands.entry(format!("{:?}", out.command.kind)).or_default() += 1;
        for issue in &out.diagnostics.issues {
            let tag = serde_json::to_value(issue).ok().and_then(|v| v["issue"].as_str().map(str::to_string));
            *summary.issues.entry(tag.unwrap_or_default()).or_default() += 1;
        }
        summary.words.extend(out.diagnostics.word.clone());
    }
    commands.flush()?;
    diagnostics.flush()?;
    print_json(&summary)
}

pub fn experiment(args: &ExperimentArgs, cfg: ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    create_out(&args.out)?;
    write_file(&args.out.join("config.toml"), to_toml(&cfg)?)?;
    let out = run_experiment(&cfg)?;
    let report = compute_metrics(&out.logs)?;
    write_trajectory_jsonl(BufWriter::new(File::create(args.out.join("trajectories.jsonl"))?), &out.logs)?;
    write_trajectory_csv(BufWriter::new(File::create(args.out.join("trajectories.csv"))?), &out.logs)?;
    write_command_jsonl(BufWriter::new(File::create(args.out.join("commands.jsonl"))?), &out.logs)?;
    write_metrics(&args.out, &report)?;
    if !args.no_plots {
        write_plots(&args.out.join("plots"), &out.logs, &report)?;
    }
    print_json(&report)
}

fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<(), CliError> {
    write_file(&dir.join("metrics.json"), serde_json::to_string_pretty(report).map_err(runtime)? + "\n")?;
    write_file(&dir.join("metrics.csv"), report.to_csv())?;
    write_file(&dir.join("envelope.csv"), report.envelope_csv())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub targets: CalibrationTargets,
    /// Base experiment; its `finger` parameters are the starting point.
    pub experiment: ExperimentConfig,
}

pub fn calibrate(args: &CalibrateArgs, cfg: CalibrateConfig) -> Result<(), CliError> {
    cfg.experiment.validate()?;
    create_out(&args.out)?;
    let report = calibrate_finger_model(&cfg.targets, &cfg.experiment, &cfg.experiment.finger)?;
    write_file(&args.out.join("finger_model.toml"), to_toml(&report.params)?)?;
    write_file(&args.out.join("calibration.json"), serde_json::to_string_pretty(&report).map_err(runtime)? + "\n")?;
    print_json(&report)
}

#[derive(Serialize)]
struct CellOut {
    dots: Vec<u8>,
    unicode: char,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BrailleOut {
    text: String,
    dialect: Dialect,
    cells: Vec<CellOut>,
    round_trip: bool,
    waveform: Option<PathBuf>,
}

pub fn braille(args: &BrailleArgs, cfg: PipelineConfig) -> Result<(), CliError> {
    if !(args.cell_duration.is_finite() && args.cell_duration > 0.0) {
        return Err(CliError::Usage("--cell-duration must be positive".into()));
    }
    let text = args.text.as_deref().ok_or_else(|| CliError::Usage("--text is required".into()))?;
    let cells = encode_text(text, cfg.dialect).map_err(runtime)?;
    let decoded = decode_text(&cells, cfg.dialect).map_err(runtime)?;
    if decoded != text {
        return Err(runtime(format!("round trip gave {decoded:?} for {text:?}")));
    }
    let mut waveform = None;
    if let Some(dir) = &args.out {
        let mut schedule = WaveformSchedule::default();
        for (i, cell) in cells.iter().enumerate() {
            let frame = compose_frame(*cell, &FeedbackCommand::none(0.0));
            let part = schedule_stimulation(frame, &cfg.stimulation, args.cell_duration, 0.0).map_err(runtime)?;
            schedule.extend_shifted(&part, i as f64 * args.cell_duration);
        }
        create_out(dir)?;
        let path = dir.join("waveform.csv");
        write_file(&path, schedule.to_csv())?;
        waveform = Some(path);
    }
    print_json(&BrailleOut {
        text: text.to_string(),
        dialect: cfg.dialect,
        cells: cells.iter().map(|c: &BrailleCell| CellOut { dots: c.dots(), unicode: c.to_unicode() }).collect(),
        round_trip: true,
        waveform,
    })
}

pub fn metrics(args: &MetricsArgs) -> Result<(), CliError> {
    let file = File::open(&args.input).map_err(|e| CliError::Usage(format!("{}: {e}", args.input.display())))?;
    let reader = BufReader::new(file);
    let is_csv = args.input.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"));
    let logs = if is_csv { read_trajectory_csv(reader) } else { read_trajectory_jsonl(reader) }
        .map_err(|e| runtime(format!("{}: {e}", args.input.display())))?;
    let report = compute_metrics(&logs)?;
    if let Some(dir) = &args.out {
        create_out(dir)?;
        write_metrics(dir, &report)?;
    }
    print_json(&report)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BenchOut {
    width: usize,
    height: usize,
    frames: usize,
    words_read: usize,
    seconds: f64,
    frames_per_s: f64,
    ms_per_frame: f64,
}

pub fn bench(args: &BenchArgs, cfg: PipelineConfig) -> Result<(), CliError> {
    if args.frames == 0 || args.width < 64 || args.height < 64 || args.focal.is_nan() || args.focal <= 0.0 {
        return Err(CliError::Usage("bench needs frames > 0, a sensor of at least 64x64 and a positive focal length".into()));
    }
    let rig = CameraRig { width: args.width, height: args.height, focal_px: args.focal, px_per_mm: cfg.px_per_mm, ..CameraRig::default() };
    let layout = PageLayout::default();
    let page = render_page(&layout, cfg.px_per_mm)?;
    let camera = CameraSim::new(rig.clone());
    let pipeline = Pipeline::with_calibration(cfg, rig.calibration())?;
    let line = default_tracked_line(&layout);
    let words = layout.word_boxes_mm(line);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let frames: Vec<RgbImage> = (0..args.frames)
        .map(|i| {
            let x = words[i % words.len()].1.center().x;
            camera.capture(&page, pipeline.config().px_per_mm, &FingerPose::new(x, layout.track_y_mm(line)), true, &mut rng)
        })
        .collect();
    let mut state = pipeline.new_session()?;
    let period = 1.0 / pipeline.config().frame_rate_hz;
    let start = Instant::now();
    let mut words_read = 0;
    for (i, frame) in frames.iter().enumerate() {
        words_read += usize::from(pipeline.step(frame, i as f64 * period, &mut state).diagnostics.word.is_some());
    }
    let seconds = start.elapsed().as_secs_f64();
    print_json(&BenchOut {
        width: args.width,
        height: args.height,
        frames: args.frames,
        words_read,
        seconds,
        frames_per_s: args.frames as f64 / seconds,
        ms_per_frame: 1e3 * seconds / args.frames as f64,
    })
}
