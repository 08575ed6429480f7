//! One iteration of the frame loop: rectify, locate the fingertip and the
//! text lines, derive the movement command, and read the word under the
//! finger into Braille frames.

use std::collections::VecDeque;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::ebraille::{compose_frame, regulate_current, BrailleCell, Dialect, ElectrodeFrame, StimulationParams};
use crate::feedback::{
    classify_line_position, feedback_strength, locate_baseline, CommandEvaluator, CommandKind, DeadbandConfig,
    FeedbackCommand, LinePosition, TrackedBaseline,
};
use crate::geometry::Point2;
use crate::imaging::{blind_deconvolve, CameraCalibration, DeconvConfig, RemapGrid};
use crate::page::{
    cluster_text_lines, detect_corners, detect_fingertip, extract_focused_word, page_mask, recognize_word,
    write_debug_dump, DebugOverlay, ExternalOcr, LineRegion, OcrEngine, PageConfig, PageError, TemplateOcr,
};
use crate::raster::{GrayImage, RgbImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum OcrSelection {
    Builtin,
    /// Program reading a PGM patch on stdin and printing the word.
    External { program: String, #[serde(default)] args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Fisheye calibration file; frames are used as-is when absent.
    pub camera_calibration: Option<PathBuf>,
    pub ocr: OcrSelection,
    pub deadband: DeadbandConfig,
    pub stimulation: StimulationParams,
    pub page: PageConfig,
    pub dialect: Dialect,
    /// Directory for per-frame overlays; nothing is written when absent.
    pub debug_dump: Option<PathBuf>,
    pub frame_rate_hz: f64,
    pub deblur: bool,
    pub deconv: DeconvConfig,
    pub recognize_words: bool,
    /// Gap between a line's lower edge and the next line's upper edge,
    /// assumed when only one line is in view.
    pub fallback_spacing_px: f64,
    /// Rectified image scale, used to report distances in millimetres.
    pub px_per_mm: f64,
    /// Ohmic skin load the simulated current measurement assumes.
    pub skin_load_mohm: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            camera_calibration: None,
            ocr: OcrSelection::Builtin,
            deadband: DeadbandConfig::default(),
            stimulation: StimulationParams::default(),
            page: PageConfig { nominal_line_pitch_px: 80.0, ..PageConfig::default() },
            dialect: Dialect::Six,
            debug_dump: None,
            frame_rate_hz: 3.0,
            deblur: false,
            deconv: DeconvConfig::default(),
            recognize_words: true,
            fallback_spacing_px: 56.0,
            px_per_mm: 8.0,
            skin_load_mohm: 2.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return bad("frame_rate_hz must be positive");
        }
        if !(self.fallback_spacing_px > 0.0 && self.px_per_mm > 0.0 && self.skin_load_mohm > 0.0) {
            return bad("fallback_spacing_px, px_per_mm and skin_load_mohm must be positive");
        }
        if let OcrSelection::External { program, .. } = &self.ocr {
            if program.trim().is_empty() {
                return bad("external OCR program is empty");
            }
        }
        self.deadband.validate()?;
        self.stimulation.validate()?;
        self.deconv.validate()?;
        Ok(())
    }
}

/// Something that went wrong in one frame. The session carries on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", content = "detail")]
pub enum Issue {
    NoDeviceFound,
    NoLinesFound,
    NoLineAboveFinger,
    Geometry(String),
    Ocr(String),
    Unencodable(char),
    Deblur(String),
    DebugDump(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepDiagnostics {
    pub frame_index: u64,
    pub tip: Option<Point2>,
    pub line_count: usize,
    pub baseline: Option<TrackedBaseline>,
    pub strength: Option<f64>,
    pub position: Option<LinePosition>,
    pub word: Option<String>,
    pub voltage_v: f64,
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub command: FeedbackCommand,
    pub electrode: ElectrodeFrame,
    pub diagnostics: StepDiagnostics,
}

/// State carried between frames of one session.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub evaluator: CommandEvaluator,
    pub braille_queue: VecDeque<BrailleCell>,
    pub last_word: Option<String>,
    pub stimulation: StimulationParams,
    pub lines: Vec<LineRegion>,
    pub frame_index: u64,
}

impl SessionState {
    pub fn new(cfg: &PipelineConfig) -> Result<Self, HarnessError> {
        Ok(Self {
            evaluator: CommandEvaluator::new(cfg.deadband)?,
            braille_queue: VecDeque::new(),
            last_word: None,
            stimulation: cfg.stimulation,
            lines: Vec::new(),
            frame_index: 0,
        })
    }
}

/// Immutable per-configuration resources: the rectification map and the
/// OCR engine. Shared by every session using the configuration.
pub struct Pipeline {
    cfg: PipelineConfig,
    calibration: Option<CameraCalibration>,
    rectifier: Option<RemapGrid>,
    ocr: Box<dyn OcrEngine>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("cfg", &self.cfg).field("ocr", &self.ocr.name()).finish()
    }
}

impl Pipeline {
    /// Loads the calibration file named in the config, if any.
    pub fn new(cfg: PipelineConfig) -> Result<Self, HarnessError> {
        let calibration = match &cfg.camera_calibration {
            Some(path) => Some(CameraCalibration::load(path)?),
            None => None,
        };
        Self::with_calibration(cfg, calibration)
    }

    pub fn with_calibration(cfg: PipelineConfig, calibration: Option<CameraCalibration>) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let rectifier =
            calibration.map(|c| RemapGrid::undistort(c.width, c.height, &c.intrinsics, &c.distortion));
        let ocr: Box<dyn OcrEngine> = match &cfg.ocr {
            OcrSelection::Builtin => Box::new(TemplateOcr::new()),
            OcrSelection::External { program, args } => Box::new(ExternalOcr::new(program.clone(), args.clone())),
        };
        Ok(Self { cfg, calibration, rectifier, ocr })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn calibration(&self) -> Option<&CameraCalibration> {
        self.calibration.as_ref()
    }

    pub fn new_session(&self) -> Result<SessionState, HarnessError> {
        SessionState::new(&self.cfg)
    }

    /// Undistorts a camera frame; frames of another size than the
    /// calibration pass through unchanged.
    pub fn rectify(&self, frame: &RgbImage) -> RgbImage {
        match &self.rectifier {
            Some(g) if g.width() == frame.width() && g.height() == frame.height() => {
                g.apply_rgb(frame, [255, 255, 255])
            }
            _ => frame.clone(),
        }
    }

    /// Processes a camera frame taken at time `t`.
    pub fn step(&self, frame: &RgbImage, t: f64, state: &mut SessionState) -> StepOutput {
        let rectified = self.rectify(frame);
        let mut diag = StepDiagnostics::default();
        let tip = match detect_fingertip(&rectified, &self.cfg.page) {
            Ok(tip) => Some(tip),
            Err(_) => {
                diag.issues.push(Issue::NoDeviceFound);
                None
            }
        };
        let mask = page_mask(tip.as_ref(), rectified.width(), rectified.height(), self.cfg.page.device_margin_px);
        let gray = self.prepare_gray(&rectified, &mut diag);
        let corners = detect_corners(&gray, &mask, &self.cfg.page);
        let lines = cluster_text_lines(&corners, gray.width(), gray.height(), &self.cfg.page);
        let device_mask = tip.as_ref().map(|t| t.device_mask.clone());
        let mut out = self.finish(tip.map(|t| t.position), &lines.regions, &gray, &lines.blobs, t, state, diag);
        if let Some(dir) = &self.cfg.debug_dump {
            let overlay = DebugOverlay {
                timestamp: t,
                tip: out.diagnostics.tip,
                corners,
                lines: lines.regions,
                block_angle: lines.block_angle,
                word_text: out.diagnostics.word.clone(),
                diagnostics: out.diagnostics.issues.iter().map(|i| format!("{i:?}")).collect(),
                device_mask,
                ..DebugOverlay::default()
            };
            let stem = format!("frame{:06}", out.diagnostics.frame_index);
            if let Err(e) = write_debug_dump(dir, &stem, &rectified, &overlay) {
                out.diagnostics.issues.push(Issue::DebugDump(e.to_string()));
            }
        }
        out
    }

    /// Processes an already rectified view whose fingertip position is
    /// known, as when a pointer stands in for the finger. No device is
    /// expected in view.
    pub fn step_with_tip(&self, rectified: &RgbImage, tip: Point2, t: f64, state: &mut SessionState) -> StepOutput {
        let mut diag = StepDiagnostics::default();
        let mask = page_mask(None, rectified.width(), rectified.height(), 0);
        let gray = self.prepare_gray(rectified, &mut diag);
        let corners = detect_corners(&gray, &mask, &self.cfg.page);
        let lines = cluster_text_lines(&corners, gray.width(), gray.height(), &self.cfg.page);
        self.finish(Some(tip), &lines.regions, &gray, &lines.blobs, t, state, diag)
    }

    fn prepare_gray(&self, rgb: &RgbImage, diag: &mut StepDiagnostics) -> GrayImage {
        let gray = rgb.to_gray();
        if !self.cfg.deblur {
            return gray;
        }
        let unit = gray.map(|v| v / 255.0);
        match blind_deconvolve(&unit, &self.cfg.deconv) {
            Ok(r) => r.image.map(|v| (v * 255.0).clamp(0.0, 255.0)),
            Err(e) => {
                diag.issues.push(Issue::Deblur(e.to_string()));
                gray
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        tip: Option<Point2>,
        lines: &[LineRegion],
        gray: &GrayImage,
        blobs: &crate::raster::Mask,
        t: f64,
        state: &mut SessionState,
        mut diag: StepDiagnostics,
    ) -> StepOutput {
        diag.frame_index = state.frame_index;
        state.frame_index += 1;
        diag.tip = tip;
        diag.line_count = lines.len();
        state.lines = lines.to_vec();
        if lines.is_empty() {
            diag.issues.push(Issue::NoLinesFound);
        }

        let command = match (tip, lines.is_empty()) {
            (Some(tip), false) => match self.measure(lines, tip) {
                Ok((baseline, s, position)) => {
                    diag.baseline = Some(baseline);
                    diag.strength = Some(s);
                    diag.position = Some(position);
                    state.evaluator.evaluate(s, position, t)
                }
                Err(e) => {
                    diag.issues.push(Issue::Geometry(e.to_string()));
                    state.evaluator.lost(t)
                }
            },
            _ => state.evaluator.lost(t),
        };

        if command.kind == CommandKind::None && self.cfg.recognize_words {
            if let Some(tip) = tip {
                self.read_word(lines, tip, gray, blobs, state, &mut diag);
            }
        }

        // Movement commands take the display; queued characters wait.
        let cell = if command.kind == CommandKind::None {
            state.braille_queue.pop_front().unwrap_or(BrailleCell::EMPTY)
        } else {
            BrailleCell::EMPTY
        };
        let electrode = compose_frame(cell, &command);
        if electrode.dots16 != 0 {
            let measured_ua = state.stimulation.voltage_v / self.cfg.skin_load_mohm;
            state.stimulation = regulate_current(measured_ua, &state.stimulation);
        }
        diag.voltage_v = state.stimulation.voltage_v;
        StepOutput { command, electrode, diagnostics: diag }
    }

    fn measure(
        &self,
        lines: &[LineRegion],
        tip: Point2,
    ) -> Result<(TrackedBaseline, f64, LinePosition), crate::feedback::FeedbackError> {
        let baseline = locate_baseline(lines, tip, self.cfg.fallback_spacing_px)?;
        let s = feedback_strength(&baseline.geometry)?;
        let upper = lines.iter().find(|l| l.id == baseline.upper_id).expect("baseline refers to a visible line");
        let position = classify_line_position(tip, upper, &self.cfg.deadband);
        Ok((baseline, s, position))
    }

    fn read_word(
        &self,
        lines: &[LineRegion],
        tip: Point2,
        gray: &GrayImage,
        blobs: &crate::raster::Mask,
        state: &mut SessionState,
        diag: &mut StepDiagnostics,
    ) {
        let crop = match extract_focused_word(lines, tip, gray, blobs, &self.cfg.page) {
            Ok(c) => c,
            Err(PageError::NoLineAboveFinger) => {
                diag.issues.push(Issue::NoLineAboveFinger);
                return;
            }
            Err(e) => {
                diag.issues.push(Issue::Ocr(e.to_string()));
                return;
            }
        };
        let word = match recognize_word(&crop, self.ocr.as_ref()) {
            Ok(r) if !r.text.is_empty() => r.text,
            Ok(_) => return,
            Err(e) => {
                diag.issues.push(Issue::Ocr(e.to_string()));
                return;
            }
        };
        diag.word = Some(word.clone());
        if state.last_word.as_deref() == Some(word.as_str()) {
            return;
        }
        for ch in word.chars() {
            match crate::ebraille::encode_char(ch, self.cfg.dialect) {
                Ok(cell) => state.braille_queue.push_back(cell),
                Err(_) => diag.issues.push(Issue::Unencodable(ch)),
            }
        }
        state.last_word = Some(word);
    }
}
