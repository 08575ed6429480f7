//! Directional feedback: the signed strength of a fingertip relative to the
//! baseline between two text lines, and the discrete commands derived from it.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::page::LineRegion;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("text lines overlap vertically (upper bottom {upper_bottom}, lower top {lower_top})")]
    OverlappingLines { upper_bottom: f64, lower_top: f64 },
    #[error("degenerate geometry: d3 + min(d1, d2) = 0")]
    DegenerateGeometry,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid deadband configuration: {0}")]
    InvalidConfig(String),
    #[error("no text line visible")]
    NoLines,
}

/// Distances from the baseline to the upper line (d1), the lower line (d2)
/// and the fingertip (d3), in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineGeometry {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub above_baseline: bool,
}

impl BaselineGeometry {
    pub fn new(d1: f64, d2: f64, d3: f64, above_baseline: bool) -> Result<Self, FeedbackError> {
        for (name, v) in [("d1", d1), ("d2", d2), ("d3", d3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FeedbackError::InvalidGeometry(format!("{name} = {v}")));
            }
        }
        Ok(Self { d1, d2, d3, above_baseline })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    Up,
    Down,
    None,
    NewLine,
    LineStart,
}

impl CommandKind {
    pub fn is_directional(self) -> bool {
        matches!(self, CommandKind::Up | CommandKind::Down)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCommand {
    pub kind: CommandKind,
    /// |s| for Up/Down, zero otherwise.
    pub strength: f64,
    pub timestamp: f64,
}

impl FeedbackCommand {
    pub fn none(timestamp: f64) -> Self {
        Self { kind: CommandKind::None, strength: 0.0, timestamp }
    }

    fn directional(s: f64, timestamp: f64) -> Self {
        let kind = if s > 0.0 { CommandKind::Down } else { CommandKind::Up };
        Self { kind, strength: s.abs().min(1.0), timestamp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeadbandConfig {
    pub epsilon: f64,
    pub end_zone_fraction: f64,
}

impl Default for DeadbandConfig {
    fn default() -> Self {
        Self { epsilon: 0.15, end_zone_fraction: 0.08 }
    }
}

impl DeadbandConfig {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(FeedbackError::InvalidConfig(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.end_zone_fraction > 0.0 && self.end_zone_fraction < 0.5) {
            return Err(FeedbackError::InvalidConfig(format!(
                "end_zone_fraction must lie in (0, 0.5), got {}",
                self.end_zone_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinePosition {
    Begin,
    Middle,
    End,
}

/// Baseline halfway between the lower edge of `upper` and the upper edge of
/// `lower`.
pub fn compute_baseline(upper: &LineRegion, lower: &LineRegion) -> Result<f64, FeedbackError> {
    let (ub, lt) = (upper.bbox.max_y, lower.bbox.min_y);
    if ub >= lt {
        return Err(FeedbackError::OverlappingLines { upper_bottom: ub, lower_top: lt });
    }
    Ok(0.5 * (ub + lt))
}

/// Baseline below a line with no visible neighbour: `spacing` is the
/// expected distance from its lower edge to the next line's upper edge.
pub fn compute_baseline_single(line: &LineRegion, spacing: f64) -> f64 {
    line.bbox.max_y + 0.5 * spacing
}

/// Signed strength `s = (-1)^k d3 / (d3 + min(d1, d2))`, k = 0 above the
/// baseline. Positive means move down.
pub fn feedback_strength(g: &BaselineGeometry) -> Result<f64, FeedbackError> {
    let denom = g.d3 + g.d1.min(g.d2);
    if denom <= 0.0 {
        return Err(FeedbackError::DegenerateGeometry);
    }
    let mag = g.d3 / denom;
    Ok(if g.above_baseline { mag } else { -mag })
}

pub fn classify_line_position(tip: Point2, line: &LineRegion, cfg: &DeadbandConfig) -> LinePosition {
    let zone = cfg.end_zone_fraction * line.bbox.width();
    if line.bbox.max_x - tip.x <= zone {
        LinePosition::End
    } else if tip.x - line.bbox.min_x <= zone {
        LinePosition::Begin
    } else {
        LinePosition::Middle
    }
}

/// Memoryless command rule.
pub fn command_from_state(s: f64, position: LinePosition, cfg: &DeadbandConfig, timestamp: f64) -> FeedbackCommand {
    if position == LinePosition::End {
        return FeedbackCommand { kind: CommandKind::NewLine, strength: 0.0, timestamp };
    }
    if s.abs() <= cfg.epsilon {
        FeedbackCommand::none(timestamp)
    } else {
        FeedbackCommand::directional(s, timestamp)
    }
}

/// Baseline geometry for a fingertip given the lines visible in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedBaseline {
    pub y: f64,
    pub geometry: BaselineGeometry,
    /// Id of the line above the baseline.
    pub upper_id: usize,
    /// Id of the line below, when it is visible.
    pub lower_id: Option<usize>,
}

/// Picks the baseline nearest to the fingertip among the gaps between
/// consecutive visible lines. Below the last visible line the gap is taken
/// from the visible neighbours, or `fallback_spacing` when only one line
/// is in view.
pub fn locate_baseline(lines: &[LineRegion], tip: Point2, fallback_spacing: f64) -> Result<TrackedBaseline, FeedbackError> {
    if lines.is_empty() {
        return Err(FeedbackError::NoLines);
    }
    let mut sorted: Vec<&LineRegion> = lines.iter().collect();
    sorted.sort_by(|a, b| a.bbox.center().y.total_cmp(&b.bbox.center().y));

    let gaps: Vec<f64> =
        sorted.windows(2).map(|w| w[1].bbox.min_y - w[0].bbox.max_y).filter(|g| *g > 0.0).collect();
    let spacing = if gaps.is_empty() {
        fallback_spacing
    } else {
        let mut g = gaps.clone();
        g.sort_by(f64::total_cmp);
        g[g.len() / 2]
    };

    let mut best: Option<TrackedBaseline> = None;
    for (i, upper) in sorted.iter().enumerate() {
        let lower = sorted.get(i + 1).filter(|l| l.bbox.min_y > upper.bbox.max_y);
        let (y, d1, d2) = match lower {
            Some(l) => {
                let y = compute_baseline(upper, l)?;
                (y, y - upper.bbox.max_y, l.bbox.min_y - y)
            }
            None => {
                let y = compute_baseline_single(upper, spacing);
                (y, 0.5 * spacing, 0.5 * spacing)
            }
        };
        let d3 = (tip.y - y).abs();
        if best.as_ref().is_none_or(|b| d3 < b.geometry.d3) {
            best = Some(TrackedBaseline {
                y,
                geometry: BaselineGeometry::new(d1, d2, d3, tip.y < y)?,
                upper_id: upper.id,
                lower_id: lower.map(|l| l.id),
            });
        }
    }
    Ok(best.expect("at least one line"))
}

/// Per-session command state machine.
///
/// A directional command persists while `|s|` stays at or above
/// `epsilon / 2` with the same sign. `LineStart` is emitted once on the
/// first Begin position after a `NewLine`.
#[derive(Debug, Clone)]
pub struct CommandEvaluator {
    cfg: DeadbandConfig,
    active: CommandKind,
    awaiting_line_start: bool,
}

impl CommandEvaluator {
    pub fn new(cfg: DeadbandConfig) -> Result<Self, FeedbackError> {
        cfg.validate()?;
        Ok(Self { cfg, active: CommandKind::None, awaiting_line_start: false })
    }

    pub fn config(&self) -> &DeadbandConfig {
        &self.cfg
    }

    pub fn active(&self) -> CommandKind {
        self.active
    }

    pub fn evaluate(&mut self, s: f64, position: LinePosition, timestamp: f64) -> FeedbackCommand {
        match position {
            LinePosition::End => {
                self.active = CommandKind::None;
                self.awaiting_line_start = true;
                return FeedbackCommand { kind: CommandKind::NewLine, strength: 0.0, timestamp };
            }
            LinePosition::Begin if self.awaiting_line_start => {
                self.awaiting_line_start = false;
                self.active = CommandKind::None;
                return FeedbackCommand { kind: CommandKind::LineStart, strength: 0.0, timestamp };
            }
            _ => {}
        }
        let hold = self.cfg.epsilon / 2.0;
        let held = match self.active {
            CommandKind::Down => s >= hold,
            CommandKind::Up => s <= -hold,
            _ => false,
        };
        let cmd = if held && s != 0.0 {
            FeedbackCommand::directional(s, timestamp)
        } else {
            command_from_state(s, position, &self.cfg, timestamp)
        };
        self.active = cmd.kind;
        cmd
    }

    /// Evaluation for a frame without a usable measurement.
    pub fn lost(&mut self, timestamp: f64) -> FeedbackCommand {
        self.active = CommandKind::None;
        FeedbackCommand::none(timestamp)
    }
}

/// One line of the command log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommandRecord {
    pub t: f64,
    pub kind: CommandKind,
    pub strength: f64,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d3: Option<f64>,
    pub tip_x: Option<f64>,
    pub tip_y: Option<f64>,
}

impl CommandRecord {
    pub fn new(cmd: &FeedbackCommand, geometry: Option<&BaselineGeometry>, tip: Option<Point2>) -> Self {
        Self {
            t: cmd.timestamp,
            kind: cmd.kind,
            strength: cmd.strength,
            d1: geometry.map(|g| g.d1),
            d2: geometry.map(|g| g.d2),
            d3: geometry.map(|g| g.d3),
            tip_x: tip.map(|p| p.x),
            tip_y: tip.map(|p| p.y),
        }
    }
}

pub fn write_command_log<W: Write>(mut out: W, records: &[CommandRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_command_log<R: BufRead>(input: R) -> std::io::Result<Vec<CommandRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}
