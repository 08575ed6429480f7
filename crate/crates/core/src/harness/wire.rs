//! JSON messages exchanged with the browser client.
//!
//! Client to server, one per pointer sample: `{"t":s,"x":mm,"y":mm}`.
//! Server to client, one per processed frame:
//! `{"t":s,"kind":"Up|Down|None|NewLine|LineStart","strength":f,"dots16":int}`.
//! On session creation the server sends the page geometry
//! `{"linePitchMm":f,"lineHeightMm":f,"lines":[...]}`. A malformed client
//! message is answered with `{"error":"..."}` and the stream stays open.

use serde::{Deserialize, Serialize};

use crate::ebraille::ElectrodeFrame;
use crate::feedback::{CommandKind, FeedbackCommand};
use crate::sim::PageLayout;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl ClientSample {
    pub fn parse(text: &str) -> Result<ClientSample, WireError> {
        let s: ClientSample = serde_json::from_str(text).map_err(|e| WireError { error: e.to_string() })?;
        if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
            return Err(WireError { error: "t, x and y must be finite".into() });
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerCommand {
    pub t: f64,
    pub kind: CommandKind,
    pub strength: f64,
    pub dots16: u16,
}

impl ServerCommand {
    pub fn new(cmd: &FeedbackCommand, frame: ElectrodeFrame) -> Self {
        Self { t: cmd.timestamp, kind: cmd.kind, strength: cmd.strength, dots16: frame.dots16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub error: String,
}

impl std::fmt::Display for WireError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.error)
    }
}

impl std::error::Error for WireError {}

/// One text line of the page, in page millimetres (y down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireLine {
    pub index: usize,
    pub text: String,
    pub top_mm: f64,
    pub bottom_mm: f64,
    /// Height the fingertip should follow below this line.
    pub track_y_mm: f64,
    /// Horizontal extent of the ink, when the line has any.
    pub start_mm: Option<f64>,
    pub end_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PageGeometryMessage {
    pub line_pitch_mm: f64,
    pub line_height_mm: f64,
    pub page_width_mm: f64,
    pub page_height_mm: f64,
    pub lines: Vec<WireLine>,
}

impl PageGeometryMessage {
    pub fn from_layout(layout: &PageLayout) -> Self {
        let lines = layout
            .text
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let ink = layout.line_ink_mm(i);
                WireLine {
                    index: i,
                    text: text.clone(),
                    top_mm: layout.line_top_mm(i),
                    bottom_mm: layout.line_bottom_mm(i),
                    track_y_mm: layout.track_y_mm(i),
                    start_mm: ink.map(|r| r.0),
                    end_mm: ink.map(|r| r.1),
                }
            })
            .collect();
        Self {
            line_pitch_mm: layout.line_pitch_mm,
            line_height_mm: layout.line_height_mm,
            page_width_mm: layout.page_width_mm,
            page_height_mm: layout.page_height_mm,
            lines,
        }
    }
}
