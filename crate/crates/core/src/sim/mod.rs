//! Closed-loop reading simulator: page rendering, the finger camera, a
//! stochastic finger model, experiments and their metrics.

mod calibrate;
mod camera;
mod experiment;
mod finger;
mod metrics;
mod page;
mod plots;

use thiserror::Error;

pub use calibrate::{calibrate_finger_model, measure, CalibrationMeasurement, CalibrationReport, CalibrationTargets};
pub use camera::{CameraRig, CameraSim, FingerPose};
pub use experiment::{
    default_tracked_line, read_trajectory_csv, read_trajectory_jsonl, run_experiment, write_command_jsonl,
    write_trajectory_csv, write_trajectory_jsonl, ExperimentConfig, ExperimentOutput, Perception, TrajectoryLog,
    TrajectorySample, TRAJECTORY_CSV_HEADER,
};
pub use finger::{step_finger, FingerModelParams, FingerPhase, FingerState, ReactionEvent, RunTraits};
pub use metrics::{
    command_episodes, compute_metrics, reaction_time, speed_profile, CommandEpisode, MetricsReport,
    CONTAINMENT_BAND_MM, ENVELOPE_BIN_MM,
};
pub use page::{render_page, wrap_text, PageLayout};
pub use plots::write_plots;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line} does not fit on the page")]
    TextOverflow { line: usize },
    #[error("pipeline found no lines for more than {seconds:.1} s (run {run}, t = {t:.2} s)")]
    PipelineStall { run: usize, t: f64, seconds: f64 },
    #[error("calibration missed its targets: {0}")]
    CalibrationFailed(String),
}
