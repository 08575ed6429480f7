//! Per-frame processing loop, configuration, live sessions and the wire
//! protocol spoken by the browser client.

mod config;
mod pipeline;
mod session;
mod wire;

use thiserror::Error;

pub use config::{layered, to_table, to_toml, ENV_PREFIX};
pub use pipeline::{
    Issue, OcrSelection, Pipeline, PipelineConfig, SessionState, StepDiagnostics, StepOutput,
};
pub use session::{LiveSession, SessionMode, SessionSummary};
pub use wire::{ClientSample, PageGeometryMessage, ServerCommand, WireError, WireLine};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
    #[error(transparent)]
    Feedback(#[from] crate::feedback::FeedbackError),
    #[error(transparent)]
    Braille(#[from] crate::ebraille::BrailleError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
