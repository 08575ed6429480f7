//! Seeded reading runs: the finger scans one line of the page while the
//! camera and the pipeline (or an exact geometric stand-in) issue commands.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::camera::{CameraRig, CameraSim, FingerPose};
use super::finger::{step_finger, FingerModelParams, FingerState, ReactionEvent, RunTraits};
use super::{render_page, PageLayout, SimError};
use crate::feedback::{
    feedback_strength, BaselineGeometry, CommandEvaluator, CommandKind, CommandRecord, LinePosition,
};
use crate::harness::{Issue, Pipeline, PipelineConfig};
use crate::raster::GrayImage;

/// How the simulated device perceives the finger position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perception {
    /// Camera frames through the full pipeline.
    Vision,
    /// Exact page geometry plus Gaussian noise on d3; no images.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub layout: PageLayout,
    pub camera: CameraRig,
    pub finger: FingerModelParams,
    pub pipeline: PipelineConfig,
    pub feedback_on: bool,
    pub repetitions: usize,
    pub seed: u64,
    pub perception: Perception,
    /// Line to read; the longest line in the middle third of the page when
    /// absent.
    pub tracked_line: Option<usize>,
    pub page_dpmm: f64,
    pub physics_hz: f64,
    pub log_hz: f64,
    pub geometric_noise_mm: f64,
    /// A run fails when no text line is seen for longer than this.
    pub stall_timeout_s: f64,
    /// A run that has not reached the end of the line by then is cut off.
    pub max_duration_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            layout: PageLayout::default(),
            camera: CameraRig::default(),
            finger: FingerModelParams::calibrated(),
            pipeline: PipelineConfig::default(),
            feedback_on: true,
            repetitions: 25,
            seed: 7,
            perception: Perception::Vision,
            tracked_line: None,
            page_dpmm: 8.0,
            physics_hz: 100.0,
            log_hz: 20.0,
            geometric_noise_mm: 0.1,
            stall_timeout_s: 2.0,
            max_duration_s: 240.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.layout.validate()?;
        self.finger.validate()?;
        self.pipeline.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let positive = [self.page_dpmm, self.physics_hz, self.log_hz, self.stall_timeout_s, self.max_duration_s];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.geometric_noise_mm < 0.0 {
            return Err(SimError::InvalidConfig("rates, durations and scales must be positive".into()));
        }
        let ratio = self.physics_hz / self.log_hz;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(SimError::InvalidConfig("physics_hz must be a whole multiple of log_hz".into()));
        }
        if self.pipeline.frame_rate_hz > self.physics_hz {
            return Err(SimError::InvalidConfig("frame rate exceeds the physics rate".into()));
        }
        let line = self.line_index();
        if self.layout.line_ink_mm(line).is_none() {
            return Err(SimError::InvalidConfig(format!("tracked line {line} has no text")));
        }
        Ok(())
    }

    pub fn line_index(&self) -> usize {
        self.tracked_line.unwrap_or_else(|| default_tracked_line(&self.layout))
    }
}

/// Longest line in the middle third of the page text.
pub fn default_tracked_line(layout: &PageLayout) -> usize {
    let n = layout.text.len();
    if n < 3 {
        return 0;
    }
    (n / 3..n - n / 3)
        .max_by(|&a, &b| layout.line_width_mm(a).total_cmp(&layout.line_width_mm(b)).then(b.cmp(&a)))
        .unwrap_or(n / 2)
}

/// One logged fingertip position. `y_mm` is the offset from the path the
/// fingertip should follow under the tracked line, positive down the page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectorySample {
    pub t: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub command: CommandKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryLog {
    pub run: usize,
    pub samples: Vec<TrajectorySample>,
    /// Commands issued by the pipeline, one per processed frame.
    #[serde(default)]
    pub commands: Vec<CommandRecord>,
    /// Reaction delays drawn by the finger model.
    #[serde(default)]
    pub reactions: Vec<ReactionEvent>,
    #[serde(default)]
    pub traits: Option<RunTraits>,
    /// Whether the finger reached the end of the line.
    #[serde(default = "yes")]
    pub completed: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub logs: Vec<TrajectoryLog>,
}

/// Shared, per-experiment resources.
struct Bench {
    page: GrayImage,
    camera: CameraSim,
    pipeline: Pipeline,
    line_start: f64,
    line_end: f64,
    track_y: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, SimError> {
    cfg.validate()?;
    let line = cfg.line_index();
    let (line_start, line_end) = cfg.layout.line_ink_mm(line).expect("validated");
    let needs_page = cfg.feedback_on && cfg.perception == Perception::Vision;
    let page = if needs_page { render_page(&cfg.layout, cfg.page_dpmm)? } else { GrayImage::new(1, 1, 255.0) };
    let pipeline = Pipeline::with_calibration(cfg.pipeline.clone(), cfg.camera.calibration())
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let bench = Bench {
        page,
        camera: CameraSim::new(cfg.camera.clone()),
        pipeline,
        line_start,
        line_end,
        track_y: cfg.layout.track_y_mm(line),
    };
    let logs = (0..cfg.repetitions).map(|run| simulate_run(cfg, &bench, run)).collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentOutput { config: cfg.clone(), logs })
}

/// Random streams of one run. The finger stream does not depend on whether
/// feedback is on, so open- and closed-loop runs share their per-run traits.
fn run_rngs(seed: u64, run: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut finger = ChaCha8Rng::seed_from_u64(seed);
    finger.set_stream(2 * run as u64);
    let mut camera = ChaCha8Rng::seed_from_u64(seed);
    camera.set_stream(2 * run as u64 + 1);
    (finger, camera)
}

fn simulate_run(cfg: &ExperimentConfig, bench: &Bench, run: usize) -> Result<TrajectoryLog, SimError> {
    let (mut finger_rng, mut camera_rng) = run_rngs(cfg.seed, run);
    let traits = RunTraits::sample(&cfg.finger, &mut finger_rng);
    let mut finger = FingerState::new(bench.line_start, bench.track_y, traits);
    let mut session = bench.pipeline.new_session().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let mut evaluator = CommandEvaluator::new(cfg.pipeline.deadband).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.geometric_noise_mm.max(f64::MIN_POSITIVE)).expect("finite");

    let dt = 1.0 / cfg.physics_hz;
    let log_every = (cfg.physics_hz / cfg.log_hz).round() as u64;
    let frame_period = 1.0 / cfg.pipeline.frame_rate_hz;
    let mut next_frame = 0.0;
    let mut last_lines_seen = 0.0;
    let mut displayed = CommandKind::None;
    let mut log = TrajectoryLog { run, traits: Some(traits), completed: true, ..Default::default() };

    for step in 0u64.. {
        let t = step as f64 * dt;
        if cfg.feedback_on && t + 1e-9 >= next_frame {
            next_frame += frame_period;
            let record = match cfg.perception {
                Perception::Vision => {
                    let pose = FingerPose::new(finger.x_mm, finger.y_mm);
                    let frame = bench.camera.capture(&bench.page, cfg.page_dpmm, &pose, true, &mut camera_rng);
                    let out = bench.pipeline.step(&frame, t, &mut session);
                    if out.diagnostics.issues.contains(&Issue::NoLinesFound) {
                        if t - last_lines_seen > cfg.stall_timeout_s {
                            return Err(SimError::PipelineStall { run, t, seconds: t - last_lines_seen });
                        }
                    } else {
                        last_lines_seen = t;
                    }
                    let geometry = out.diagnostics.baseline.as_ref().map(|b| b.geometry);
                    CommandRecord::new(&out.command, geometry.as_ref(), out.diagnostics.tip)
                }
                Perception::Geometric => {
                    let half_gap = 0.5 * (cfg.layout.line_pitch_mm - cfg.layout.line_height_mm);
                    let measured = finger.y_mm - bench.track_y + noise.sample(&mut camera_rng);
                    let geometry = BaselineGeometry::new(half_gap, half_gap, measured.abs(), measured < 0.0)
                        .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
                    let s = feedback_strength(&geometry).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
                    let zone = cfg.pipeline.deadband.end_zone_fraction * cfg.camera.width as f64 / cfg.camera.px_per_mm;
                    let position = if bench.line_end - finger.x_mm <= zone {
                        LinePosition::End
                    } else if finger.x_mm - bench.line_start <= zone {
                        LinePosition::Begin
                    } else {
                        LinePosition::Middle
                    };
                    let cmd = evaluator.evaluate(s, position, t);
                    CommandRecord::new(&cmd, Some(&geometry), None)
                }
            };
            displayed = record.kind;
            log.commands.push(record);
        }
        if step % log_every == 0 {
            log.samples.push(TrajectorySample {
                t,
                x_mm: finger.x_mm,
                y_mm: finger.y_mm - bench.track_y,
                command: displayed,
            });
        }
        if let Some(ev) = step_finger(&mut finger, displayed, &cfg.finger, dt, &mut finger_rng) {
            log.reactions.push(ev);
        }
        if finger.x_mm >= bench.line_end {
            break;
        }
        if finger.t > cfg.max_duration_s {
            log.completed = false;
            break;
        }
    }
    Ok(log)
}

/// Writes samples as JSONL, one object per sample tagged with its run.
pub fn write_trajectory_jsonl<W: Write>(mut out: W, logs: &[TrajectoryLog]) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        run: usize,
        #[serde(flatten)]
        sample: &'a TrajectorySample,
    }
    for log in logs {
        for sample in &log.samples {
            serde_json::to_writer(&mut out, &Line { run: log.run, sample })?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

/// Reads JSONL written by [`write_trajectory_jsonl`] back into per-run logs
/// (samples only).
pub fn read_trajectory_jsonl<R: BufRead>(input: R) -> std::io::Result<Vec<TrajectoryLog>> {
    #[derive(Deserialize)]
    struct Line {
        run: usize,
        #[serde(flatten)]
        sample: TrajectorySample,
    }
    let mut rows = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Line = serde_json::from_str(&line).map_err(invalid)?;
        rows.push((row.run, row.sample));
    }
    Ok(group_runs(rows))
}

/// Command logs as JSONL, one record per processed frame tagged with its run.
pub fn write_command_jsonl<W: Write>(mut out: W, logs: &[TrajectoryLog]) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        run: usize,
        #[serde(flatten)]
        record: &'a CommandRecord,
    }
    for log in logs {
        for record in &log.commands {
            serde_json::to_writer(&mut out, &Line { run: log.run, record })?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

pub const TRAJECTORY_CSV_HEADER: &str = "run,t,xMm,yMm,command";

pub fn write_trajectory_csv<W: Write>(mut out: W, logs: &[TrajectoryLog]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for log in logs {
        for s in &log.samples {
            writeln!(out, "{},{},{},{},{:?}", log.run, s.t, s.x_mm, s.y_mm, s.command)?;
        }
    }
    out.flush()
}

pub fn read_trajectory_csv<R: BufRead>(input: R) -> std::io::Result<Vec<TrajectoryLog>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != TRAJECTORY_CSV_HEADER {
                return Err(invalid(format!("expected header {TRAJECTORY_CSV_HEADER:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(invalid(format!("line {}: expected 5 fields", i + 1)));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid(format!("line {}: {e}", i + 1)));
        let command: CommandKind =
            serde_json::from_value(serde_json::Value::String(f[4].trim().to_string())).map_err(invalid)?;
        let run = f[0].trim().parse::<usize>().map_err(|e| invalid(format!("line {}: {e}", i + 1)))?;
        rows.push((run, TrajectorySample { t: num(f[1])?, x_mm: num(f[2])?, y_mm: num(f[3])?, command }));
    }
    Ok(group_runs(rows))
}

fn group_runs(rows: Vec<(usize, TrajectorySample)>) -> Vec<TrajectoryLog> {
    let mut logs: Vec<TrajectoryLog> = Vec::new();
    for (run, sample) in rows {
        match logs.iter_mut().find(|l| l.run == run) {
            Some(l) => l.samples.push(sample),
            None => logs.push(TrajectoryLog { run, samples: vec![sample], completed: true, ..Default::default() }),
        }
    }
    logs
}

fn invalid(e: impl ToString) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())
}
