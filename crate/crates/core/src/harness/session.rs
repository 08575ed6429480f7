//! A live tracking session: pointer samples or camera frames in, commands
//! out, with append-only JSONL logs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pipeline::{Pipeline, SessionState, StepOutput};
use super::wire::{ClientSample, PageGeometryMessage, ServerCommand, WireError};
use super::HarnessError;
use crate::feedback::{CommandKind, CommandRecord};
use crate::raster::{GrayImage, RgbImage};
use crate::sim::{compute_metrics, render_page, CameraRig, CameraSim, FingerPose, MetricsReport, PageLayout, TrajectoryLog, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionMode {
    /// Camera frames are submitted and the fingertip is found in them.
    SimulatedFinger,
    /// A pointer on the rendered page stands in for the fingertip.
    LivePointer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSummary {
    pub session_id: String,
    pub samples: usize,
    pub commands: usize,
    pub metrics: Option<MetricsReport>,
    pub trajectory_log: Option<PathBuf>,
    pub command_log: Option<PathBuf>,
}

struct Logs {
    trajectory: BufWriter<File>,
    commands: BufWriter<File>,
    trajectory_path: PathBuf,
    command_path: PathBuf,
}

pub struct LiveSession {
    id: String,
    mode: SessionMode,
    layout: PageLayout,
    page: GrayImage,
    camera: CameraSim,
    pipeline: Arc<Pipeline>,
    state: SessionState,
    rng: ChaCha8Rng,
    next_frame_t: Option<f64>,
    last_t: Option<f64>,
    displayed: CommandKind,
    samples: Vec<TrajectorySample>,
    commands: Vec<CommandRecord>,
    logs: Option<Logs>,
}

impl std::fmt::Debug for LiveSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveSession").field("id", &self.id).field("mode", &self.mode).finish()
    }
}

impl LiveSession {
    /// Opens a session. Logs go to `<log_dir>/<id>.trajectory.jsonl` and
    /// `<log_dir>/<id>.commands.jsonl` when a directory is given.
    pub fn new(
        id: impl Into<String>,
        mode: SessionMode,
        layout: PageLayout,
        pipeline: Arc<Pipeline>,
        log_dir: Option<&Path>,
    ) -> Result<Self, HarnessError> {
        let id = id.into();
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(HarnessError::Config(format!("session id {id:?} must be alphanumeric")));
        }
        let px_per_mm = pipeline.config().px_per_mm;
        let page = render_page(&layout, px_per_mm)?;
        let rig = CameraRig { px_per_mm, fisheye: false, noise_sigma: 0.0, ..CameraRig::default() };
        let logs = match log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let trajectory_path = dir.join(format!("{id}.trajectory.jsonl"));
                let command_path = dir.join(format!("{id}.commands.jsonl"));
                Some(Logs {
                    trajectory: BufWriter::new(File::create(&trajectory_path)?),
                    commands: BufWriter::new(File::create(&command_path)?),
                    trajectory_path,
                    command_path,
                })
            }
            None => None,
        };
        Ok(Self {
            id,
            mode,
            layout,
            page,
            camera: CameraSim::new(rig),
            state: pipeline.new_session()?,
            pipeline,
            rng: ChaCha8Rng::seed_from_u64(0),
            next_frame_t: None,
            last_t: None,
            displayed: CommandKind::None,
            samples: Vec::new(),
            commands: Vec::new(),
            logs,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> SessionMode {
        self.mode
    }

    pub fn layout(&self) -> &PageLayout {
        &self.layout
    }

    pub fn geometry(&self) -> PageGeometryMessage {
        PageGeometryMessage::from_layout(&self.layout)
    }

    pub fn page(&self) -> &GrayImage {
        &self.page
    }

    pub fn page_png(&self) -> Result<Vec<u8>, HarnessError> {
        let mut buf = std::io::Cursor::new(Vec::new());
        image::DynamicImage::ImageLuma8(self.page.to_luma8())
            .write_to(&mut buf, image::ImageFormat::Png)
            .map_err(|e| HarnessError::Io(std::io::Error::other(e)))?;
        Ok(buf.into_inner())
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn commands(&self) -> &[CommandRecord] {
        &self.commands
    }

    /// Index of the line whose tracking path is nearest to `y_mm`.
    fn nearest_line(&self, y_mm: f64) -> usize {
        (0..self.layout.text.len().max(1))
            .min_by(|&a, &b| {
                (self.layout.track_y_mm(a) - y_mm).abs().total_cmp(&(self.layout.track_y_mm(b) - y_mm).abs())
            })
            .unwrap_or(0)
    }

    fn check_time(&mut self, t: f64) -> Result<(), WireError> {
        if !t.is_finite() || self.last_t.is_some_and(|last| t <= last) {
            return Err(WireError { error: format!("sample time {t} does not increase") });
        }
        self.last_t = Some(t);
        Ok(())
    }

    /// Records a pointer sample and, when a frame is due, runs the pipeline
    /// on the page around the pointer.
    pub fn handle_sample(&mut self, sample: ClientSample) -> Result<Option<ServerCommand>, HarnessError> {
        if self.mode != SessionMode::LivePointer {
            return Err(HarnessError::Config("pointer samples need a LivePointer session".into()));
        }
        self.check_time(sample.t).map_err(|e| HarnessError::Config(e.error))?;
        let line = self.nearest_line(sample.y);
        self.push_sample(TrajectorySample {
            t: sample.t,
            x_mm: sample.x,
            y_mm: sample.y - self.layout.track_y_mm(line),
            command: self.displayed,
        })?;
        if self.next_frame_t.is_some_and(|next| sample.t < next) {
            return Ok(None);
        }
        let period = 1.0 / self.pipeline.config().frame_rate_hz;
        self.next_frame_t = Some(self.next_frame_t.map_or(sample.t, |n| n.max(sample.t - period)) + period);
        let pose = FingerPose::new(sample.x, sample.y);
        let view = self.camera.capture(&self.page, self.pipeline.config().px_per_mm, &pose, false, &mut self.rng);
        let tip = self.camera.rig().tip_pixel();
        let out = self.pipeline.step_with_tip(&view, tip, sample.t, &mut self.state);
        self.record(&out)?;
        Ok(Some(ServerCommand::new(&out.command, out.electrode)))
    }

    /// Runs the pipeline on a camera frame (SimulatedFinger mode).
    pub fn submit_frame(&mut self, frame: &RgbImage, t: f64) -> Result<StepOutput, HarnessError> {
        if self.mode != SessionMode::SimulatedFinger {
            return Err(HarnessError::Config("camera frames need a SimulatedFinger session".into()));
        }
        self.check_time(t).map_err(|e| HarnessError::Config(e.error))?;
        let out = self.pipeline.step(frame, t, &mut self.state);
        self.record(&out)?;
        Ok(out)
    }

    fn push_sample(&mut self, sample: TrajectorySample) -> Result<(), HarnessError> {
        if let Some(logs) = &mut self.logs {
            #[derive(Serialize)]
            struct Line<'a> {
                run: usize,
                #[serde(flatten)]
                sample: &'a TrajectorySample,
            }
            serde_json::to_writer(&mut logs.trajectory, &Line { run: 0, sample: &sample }).map_err(std::io::Error::from)?;
            logs.trajectory.write_all(b"\n")?;
        }
        self.samples.push(sample);
        Ok(())
    }

    fn record(&mut self, out: &StepOutput) -> Result<(), HarnessError> {
        self.displayed = out.command.kind;
        let geometry = out.diagnostics.baseline.as_ref().map(|b| b.geometry);
        let record = CommandRecord::new(&out.command, geometry.as_ref(), out.diagnostics.tip);
        if let Some(logs) = &mut self.logs {
            serde_json::to_writer(&mut logs.commands, &record).map_err(std::io::Error::from)?;
            logs.commands.write_all(b"\n")?;
        }
        self.commands.push(record);
        Ok(())
    }

    /// Flushes the logs and summarizes the session.
    pub fn close(mut self) -> Result<SessionSummary, HarnessError> {
        let (mut trajectory_log, mut command_log) = (None, None);
        if let Some(mut logs) = self.logs.take() {
            logs.trajectory.flush()?;
            logs.commands.flush()?;
            trajectory_log = Some(logs.trajectory_path);
            command_log = Some(logs.command_path);
        }
        let metrics = if self.samples.is_empty() {
            None
        } else {
            let log = TrajectoryLog { run: 0, samples: std::mem::take(&mut self.samples), completed: true, ..Default::default() };
            let m = compute_metrics(std::slice::from_ref(&log))?;
            self.samples = log.samples;
            Some(m)
        };
        Ok(SessionSummary {
            session_id: self.id.clone(),
            samples: self.samples.len(),
            commands: self.commands.len(),
            metrics,
            trajectory_log,
            command_log,
        })
    }
}
