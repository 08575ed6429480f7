//! Braille encoding for the 16-electrode display: character tables, command
//! patterns on the side columns, stimulation waveforms and current
//! regulation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feedback::{CommandKind, FeedbackCommand};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrailleError {
    #[error("character {0:?} is not in the table")]
    UnsupportedCharacter(char),
    #[error("cell {0:#010b} is not in the table")]
    UnknownCell(u8),
    #[error("table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("invalid stimulation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    Six,
    Eight,
}

/// Raised dots of one cell; bit `i` is dot `i + 1`. Dots 1-2-3-7 form the
/// left column top to bottom, 4-5-6-8 the right column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BrailleCell(pub u8);

impl BrailleCell {
    pub const EMPTY: BrailleCell = BrailleCell(0);

    pub fn from_dots(dots: &[u8]) -> BrailleCell {
        BrailleCell(dots.iter().filter(|d| (1..=8).contains(*d)).fold(0, |acc, d| acc | 1 << (d - 1)))
    }

    pub fn dots(self) -> Vec<u8> {
        (1..=8).filter(|d| self.0 & (1 << (d - 1)) != 0).collect()
    }

    pub fn has(self, dot: u8) -> bool {
        (1..=8).contains(&dot) && self.0 & (1 << (dot - 1)) != 0
    }

    /// The matching character in the Unicode Braille Patterns block.
    pub fn to_unicode(self) -> char {
        char::from_u32(0x2800 + self.0 as u32).expect("braille block")
    }
}

/// Bidirectional character table.
#[derive(Debug, Clone)]
pub struct BrailleTable {
    dialect: Dialect,
    forward: HashMap<char, BrailleCell>,
    reverse: HashMap<BrailleCell, char>,
}

const SIX_DOT_TABLE: &str = include_str!("../data/braille6.txt");
const EIGHT_DOT_TABLE: &str = include_str!("../data/braille8.txt");
const COMMAND_PATTERNS: &str = include_str!("../data/command_patterns.txt");

/// Cell that marks the next letter as uppercase in six-dot text.
pub const CAPITAL_SIGN: BrailleCell = BrailleCell(1 << 5);

impl BrailleTable {
    /// Parses `<codepoint> <dot-list>` lines such as `U+0061 1`; `-` is the
    /// empty cell and `#` starts a comment.
    pub fn parse(text: &str, dialect: Dialect) -> Result<BrailleTable, BrailleError> {
        let mut forward = HashMap::new();
        let mut reverse = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let err = |message: String| BrailleError::Table { line: idx + 1, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (cp, dots) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(d), None) => (c, d),
                _ => return Err(err(format!("expected <codepoint> <dot-list>, got {line:?}"))),
            };
            let hex = cp.strip_prefix("U+").ok_or_else(|| err(format!("codepoint {cp:?} must start with U+")))?;
            let ch = u32::from_str_radix(hex, 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| err(format!("bad codepoint {cp:?}")))?;
            let mut cell = 0u8;
            if dots != "-" {
                for d in dots.chars() {
                    let n = d.to_digit(10).filter(|n| (1..=8).contains(n)).ok_or_else(|| err(format!("bad dot {d:?}")))?;
                    if dialect == Dialect::Six && n > 6 {
                        return Err(err(format!("dot {n} in a six-dot table")));
                    }
                    cell |= 1 << (n - 1);
                }
            }
            let cell = BrailleCell(cell);
            if forward.insert(ch, cell).is_some() {
                return Err(err(format!("duplicate character {ch:?}")));
            }
            if let Some(prev) = reverse.insert(cell, ch) {
                return Err(err(format!("cell {:?} already used by {prev:?}", cell.dots())));
            }
        }
        Ok(BrailleTable { dialect, forward, reverse })
    }

    pub fn builtin(dialect: Dialect) -> &'static BrailleTable {
        static SIX: OnceLock<BrailleTable> = OnceLock::new();
        static EIGHT: OnceLock<BrailleTable> = OnceLock::new();
        match dialect {
            Dialect::Six => SIX.get_or_init(|| BrailleTable::parse(SIX_DOT_TABLE, Dialect::Six).expect("bundled table")),
            Dialect::Eight => {
                EIGHT.get_or_init(|| BrailleTable::parse(EIGHT_DOT_TABLE, Dialect::Eight).expect("bundled table"))
            }
        }
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    pub fn encode(&self, ch: char) -> Result<BrailleCell, BrailleError> {
        self.forward.get(&ch).copied().ok_or(BrailleError::UnsupportedCharacter(ch))
    }

    pub fn decode(&self, cell: BrailleCell) -> Result<char, BrailleError> {
        self.reverse.get(&cell).copied().ok_or(BrailleError::UnknownCell(cell.0))
    }

    /// Supported characters in codepoint order.
    pub fn charset(&self) -> Vec<char> {
        let mut v: Vec<char> = self.forward.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

pub fn encode_char(ch: char, dialect: Dialect) -> Result<BrailleCell, BrailleError> {
    BrailleTable::builtin(dialect).encode(ch)
}

pub fn decode_cell(cell: BrailleCell, dialect: Dialect) -> Result<char, BrailleError> {
    BrailleTable::builtin(dialect).decode(cell)
}

/// Encodes a word or sentence. Six-dot text marks uppercase letters with a
/// capital sign before the lowercase cell.
pub fn encode_text(text: &str, dialect: Dialect) -> Result<Vec<BrailleCell>, BrailleError> {
    let table = BrailleTable::builtin(dialect);
    let mut out = Vec::with_capacity(text.len());
    for ch in text.chars() {
        match table.encode(ch) {
            Ok(c) => out.push(c),
            Err(e) if dialect == Dialect::Six && ch.is_uppercase() => {
                let lower: Vec<char> = ch.to_lowercase().collect();
                if lower.len() != 1 {
                    return Err(e);
                }
                out.push(CAPITAL_SIGN);
                out.push(table.encode(lower[0]).map_err(|_| e)?);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn decode_text(cells: &[BrailleCell], dialect: Dialect) -> Result<String, BrailleError> {
    let table = BrailleTable::builtin(dialect);
    let mut out = String::new();
    let mut capital = false;
    for &cell in cells {
        if dialect == Dialect::Six && cell == CAPITAL_SIGN {
            capital = true;
            continue;
        }
        let ch = table.decode(cell)?;
        if std::mem::take(&mut capital) {
            out.extend(ch.to_uppercase());
        } else {
            out.push(ch);
        }
    }
    Ok(out)
}

/// Horizontal and vertical electrode pitch in millimetres.
pub const DOT_PITCH_X_MM: f64 = 2.29;
pub const DOT_PITCH_Y_MM: f64 = 2.54;

/// Side-column electrodes: L1..L4 then R1..R4, top to bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SideDot {
    L1,
    L2,
    L3,
    L4,
    R1,
    R2,
    R3,
    R4,
}

impl SideDot {
    pub const ALL: [SideDot; 8] =
        [SideDot::L1, SideDot::L2, SideDot::L3, SideDot::L4, SideDot::R1, SideDot::R2, SideDot::R3, SideDot::R4];

    /// Bit index within [`ElectrodeFrame::dots16`].
    pub fn bit(self) -> u32 {
        8 + self as u32
    }

    fn parse(s: &str) -> Option<SideDot> {
        SideDot::ALL.iter().copied().find(|d| format!("{d:?}") == s)
    }
}

/// State of all 16 electrodes: bits 0-7 are Braille dots 1-8, bits 8-11 are
/// L1-L4 and bits 12-15 are R1-R4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ElectrodeFrame {
    pub dots16: u16,
}

impl ElectrodeFrame {
    pub const CENTER_MASK: u16 = 0x00ff;
    pub const SIDE_MASK: u16 = 0xff00;

    pub fn cell(self) -> BrailleCell {
        BrailleCell((self.dots16 & Self::CENTER_MASK) as u8)
    }

    pub fn side_bits(self) -> u16 {
        self.dots16 & Self::SIDE_MASK
    }

    pub fn side_dots(self) -> Vec<SideDot> {
        SideDot::ALL.iter().copied().filter(|d| self.dots16 & (1 << d.bit()) != 0).collect()
    }

    pub fn is_active(self, index: u32) -> bool {
        index < 16 && self.dots16 & (1 << index) != 0
    }
}

/// Position of electrode `index` (bit index of `dots16`) relative to the
/// top-left electrode, in millimetres. Columns are L, Braille left,
/// Braille right, R; rows run top to bottom.
pub fn electrode_position_mm(index: u32) -> Option<(f64, f64)> {
    let (col, row) = match index {
        0..=2 => (1, index),
        3..=5 => (2, index - 3),
        6 => (1, 3),
        7 => (2, 3),
        8..=11 => (0, index - 8),
        12..=15 => (3, index - 12),
        _ => return None,
    };
    Some((col as f64 * DOT_PITCH_X_MM, row as f64 * DOT_PITCH_Y_MM))
}

/// Side-column patterns for each command kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandPatterns {
    patterns: HashMap<CommandKind, u16>,
}

impl CommandPatterns {
    /// Parses lines `<Kind> <side dots...>` (`-` for none).
    pub fn parse(text: &str) -> Result<CommandPatterns, BrailleError> {
        let mut patterns = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let err = |message: String| BrailleError::Table { line: idx + 1, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let kind = match parts.next() {
                Some("Up") => CommandKind::Up,
                Some("Down") => CommandKind::Down,
                Some("None") => CommandKind::None,
                Some("NewLine") => CommandKind::NewLine,
                Some("LineStart") => CommandKind::LineStart,
                other => return Err(err(format!("unknown command {other:?}"))),
            };
            let mut bits = 0u16;
            for tok in parts.filter(|t| *t != "-") {
                let d = SideDot::parse(tok).ok_or_else(|| err(format!("unknown side dot {tok:?}")))?;
                bits |= 1 << d.bit();
            }
            if patterns.insert(kind, bits).is_some() {
                return Err(err(format!("duplicate command {kind:?}")));
            }
        }
        for kind in [CommandKind::Up, CommandKind::Down, CommandKind::None, CommandKind::NewLine, CommandKind::LineStart] {
            if !patterns.contains_key(&kind) {
                return Err(BrailleError::Table { line: 0, message: format!("missing command {kind:?}") });
            }
        }
        Ok(CommandPatterns { patterns })
    }

    pub fn builtin() -> &'static CommandPatterns {
        static P: OnceLock<CommandPatterns> = OnceLock::new();
        P.get_or_init(|| CommandPatterns::parse(COMMAND_PATTERNS).expect("bundled patterns"))
    }

    pub fn side_bits(&self, kind: CommandKind) -> u16 {
        self.patterns[&kind]
    }
}

pub fn compose_frame(cell: BrailleCell, cmd: &FeedbackCommand) -> ElectrodeFrame {
    compose_frame_with(cell, cmd.kind, CommandPatterns::builtin())
}

pub fn compose_frame_with(cell: BrailleCell, kind: CommandKind, patterns: &CommandPatterns) -> ElectrodeFrame {
    ElectrodeFrame { dots16: cell.0 as u16 | (patterns.side_bits(kind) & ElectrodeFrame::SIDE_MASK) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulationParams {
    pub frequency_hz: f64,
    pub duty_cycle: f64,
    pub target_current_ua: f64,
    pub voltage_v: f64,
    /// Proportional gain of the regulation loop, volts per microampere.
    pub kp: f64,
}

pub const MIN_VOLTAGE_V: f64 = 60.0;
pub const MAX_VOLTAGE_V: f64 = 100.0;

impl Default for StimulationParams {
    fn default() -> Self {
        Self { frequency_hz: 30.0, duty_cycle: 0.10, target_current_ua: 30.0, voltage_v: 80.0, kp: 0.5 }
    }
}

impl StimulationParams {
    pub fn validate(&self) -> Result<(), BrailleError> {
        let bad = |m: String| Err(BrailleError::InvalidParams(m));
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return bad(format!("frequency must be positive, got {}", self.frequency_hz));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return bad(format!("duty cycle must lie in (0, 1), got {}", self.duty_cycle));
        }
        if !(MIN_VOLTAGE_V..=MAX_VOLTAGE_V).contains(&self.voltage_v) {
            return bad(format!("voltage must lie in [60, 100] V, got {}", self.voltage_v));
        }
        if !(self.target_current_ua >= 0.0 && self.kp >= 0.0) {
            return bad("target current and gain must be non-negative".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveEvent {
    pub t_on: f64,
    pub t_off: f64,
    pub active_dots: u16,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveformSchedule {
    pub events: Vec<WaveEvent>,
}

impl WaveformSchedule {
    /// Number of events in which electrode `index` is active.
    pub fn pulses_for(&self, index: u32) -> usize {
        self.events.iter().filter(|e| e.active_dots & (1 << index) != 0).count()
    }

    /// Appends `other` delayed by `offset` seconds.
    pub fn extend_shifted(&mut self, other: &WaveformSchedule, offset: f64) {
        self.events.extend(other.events.iter().map(|e| WaveEvent { t_on: e.t_on + offset, t_off: e.t_off + offset, ..*e }));
    }

    /// One row per electrode transition: `t,dotIndex,state`.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(f64, u32, u8)> = Vec::new();
        for e in &self.events {
            for i in 0..16 {
                if e.active_dots & (1 << i) != 0 {
                    rows.push((e.t_on, i, 1));
                    rows.push((e.t_off, i, 0));
                }
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out = String::from("t,dotIndex,state\n");
        for (t, i, s) in rows {
            writeln!(out, "{t:.6},{i},{s}").expect("string write");
        }
        out
    }
}

/// Periods in one side-dot burst cycle: `ceil(strength * 4)` on, one off.
/// Zero strength with an active pattern (new-line cue) uses full bursts.
pub fn burst_length(strength: f64) -> usize {
    if strength <= 0.0 {
        4
    } else {
        ((strength.min(1.0) * 4.0).ceil() as usize).clamp(1, 4)
    }
}

/// Pulses every active electrode at `frequency_hz` with `duty_cycle`.
/// Braille dots fire every period; side dots fire in bursts whose length
/// grows with `strength`.
pub fn schedule_stimulation(
    frame: ElectrodeFrame,
    params: &StimulationParams,
    duration: f64,
    strength: f64,
) -> Result<WaveformSchedule, BrailleError> {
    params.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(BrailleError::InvalidParams(format!("duration must be positive, got {duration}")));
    }
    let period = params.period();
    let periods = (duration * params.frequency_hz + 1e-9).floor() as usize;
    let burst = burst_length(strength);
    let center = frame.dots16 & ElectrodeFrame::CENTER_MASK;
    let side = frame.side_bits();
    let mut events = Vec::with_capacity(periods);
    for i in 0..periods {
        let mut active = center;
        if i % (burst + 1) < burst {
            active |= side;
        }
        if active != 0 {
            let t_on = i as f64 * period;
            events.push(WaveEvent { t_on, t_off: t_on + params.duty_cycle * period, active_dots: active });
        }
    }
    Ok(WaveformSchedule { events })
}

/// One proportional step of the constant-current loop.
pub fn regulate_current(measured_ua: f64, params: &StimulationParams) -> StimulationParams {
    let v = params.voltage_v + params.kp * (params.target_current_ua - measured_ua);
    StimulationParams { voltage_v: v.clamp(MIN_VOLTAGE_V, MAX_VOLTAGE_V), ..*params }
}

pub const TRAINING_CUE_S: f64 = 0.5;
pub const TRAINING_GAP_S: f64 = 0.5;

/// Start time and command of each training slot: Up, Down, Up, Down, ...
/// `count` Up/Down pairs, each cue lasting 0.5 s followed by a 0.5 s gap.
pub fn training_slots(count: usize) -> Vec<(f64, CommandKind)> {
    (0..2 * count)
        .map(|i| {
            let kind = if i % 2 == 0 { CommandKind::Up } else { CommandKind::Down };
            (i as f64 * (TRAINING_CUE_S + TRAINING_GAP_S), kind)
        })
        .collect()
}

pub fn training_sequence(count: usize, params: &StimulationParams) -> Result<WaveformSchedule, BrailleError> {
    let mut out = WaveformSchedule::default();
    for (start, kind) in training_slots(count) {
        let frame = compose_frame_with(BrailleCell::EMPTY, kind, CommandPatterns::builtin());
        out.extend_shifted(&schedule_stimulation(frame, params, TRAINING_CUE_S, 1.0)?, start);
    }
    Ok(out)
}
