//! Stochastic fingertip: forward scanning with a slow vertical drift, and a
//! delayed bang-bang correction when a movement command arrives.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::feedback::CommandKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerModelParams {
    /// Median forward speed.
    pub scan_speed_mm_per_s: f64,
    /// Relative spread of the per-run forward speed.
    pub scan_speed_spread: f64,
    /// Median magnitude of the per-run vertical drift, per second of
    /// full-speed scanning. The sign is drawn per run.
    pub drift_bias_mm_per_s: f64,
    /// Log-scale spread of the per-run drift magnitude.
    pub drift_bias_log_sigma: f64,
    /// Random-walk standard deviation per physics step at full speed.
    pub drift_sigma_mm: f64,
    pub reaction_delay_median_s: f64,
    pub reaction_delay_log_sigma: f64,
    /// Mean of the longest time a correction is sustained.
    pub compliance_duration_mean_s: f64,
    pub compliance_duration_log_sigma: f64,
    pub correction_speed_mm_per_s: f64,
    /// Forward speed factor while reacting to or complying with a command.
    pub compliance_slowdown: f64,
    /// Time constant with which the forward speed returns to normal after
    /// a correction.
    pub speed_recovery_s: f64,
    /// Chance that a correction is made while sliding backwards.
    pub backtrack_probability: f64,
}

impl Default for FingerModelParams {
    fn default() -> Self {
        Self {
            scan_speed_mm_per_s: 18.21,
            scan_speed_spread: 0.08,
            drift_bias_mm_per_s: 0.68,
            drift_bias_log_sigma: 0.6,
            drift_sigma_mm: 0.02,
            reaction_delay_median_s: 0.75,
            reaction_delay_log_sigma: 0.6,
            compliance_duration_mean_s: 2.0,
            compliance_duration_log_sigma: 0.4,
            correction_speed_mm_per_s: 0.5,
            compliance_slowdown: 0.05,
            speed_recovery_s: 1.0,
            backtrack_probability: 0.1,
        }
    }
}

impl FingerModelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("scan_speed_mm_per_s", self.scan_speed_mm_per_s),
            ("reaction_delay_median_s", self.reaction_delay_median_s),
            ("compliance_duration_mean_s", self.compliance_duration_mean_s),
            ("correction_speed_mm_per_s", self.correction_speed_mm_per_s),
            ("compliance_slowdown", self.compliance_slowdown),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("scan_speed_spread", self.scan_speed_spread),
            ("drift_bias_mm_per_s", self.drift_bias_mm_per_s),
            ("drift_bias_log_sigma", self.drift_bias_log_sigma),
            ("drift_sigma_mm", self.drift_sigma_mm),
            ("reaction_delay_log_sigma", self.reaction_delay_log_sigma),
            ("compliance_duration_log_sigma", self.compliance_duration_log_sigma),
            ("speed_recovery_s", self.speed_recovery_s),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.scan_speed_spread >= 0.5 {
            return Err(SimError::InvalidConfig("scan_speed_spread must be below 0.5".into()));
        }
        if self.compliance_slowdown > 1.0 || !(0.0..=1.0).contains(&self.backtrack_probability) {
            return Err(SimError::InvalidConfig(
                "compliance_slowdown must lie in (0, 1] and backtrack_probability in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn reaction_delay_dist(&self) -> LogNormal<f64> {
        LogNormal::new(self.reaction_delay_median_s.ln(), self.reaction_delay_log_sigma).expect("validated")
    }

    /// Lognormal with the configured mean.
    pub fn compliance_duration_dist(&self) -> LogNormal<f64> {
        let s = self.compliance_duration_log_sigma;
        LogNormal::new(self.compliance_duration_mean_s.ln() - 0.5 * s * s, s).expect("validated")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidConfig(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let p: Self = toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// The calibrated parameters shipped with the library.
    pub fn calibrated() -> Self {
        Self::parse(include_str!("../../data/finger_model.toml")).expect("shipped finger model is valid")
    }
}

/// Per-run traits drawn once at the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunTraits {
    pub speed_mm_per_s: f64,
    /// Signed vertical drift per second of full-speed scanning; positive
    /// drifts down the page.
    pub drift_bias_mm_per_s: f64,
}

impl RunTraits {
    pub fn sample(params: &FingerModelParams, rng: &mut impl Rng) -> Self {
        let z_speed: f64 = rng.sample(StandardNormal);
        let z_bias: f64 = rng.sample(StandardNormal);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let speed = params.scan_speed_mm_per_s * (1.0 + params.scan_speed_spread * z_speed.clamp(-3.0, 3.0));
        let bias = sign * params.drift_bias_mm_per_s * (params.drift_bias_log_sigma * z_bias).exp();
        Self { speed_mm_per_s: speed, drift_bias_mm_per_s: bias }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FingerPhase {
    Free,
    /// A command was felt; the correction starts at `until`.
    Reacting { command: CommandKind, until: f64 },
    /// Moving toward the baseline until the command clears or `until`.
    Complying { command: CommandKind, until: f64, backtrack: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub t: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub phase: FingerPhase,
    /// Current fraction of the run's forward speed.
    pub pace: f64,
    pub traits: RunTraits,
}

/// A reaction delay drawn when a correction was scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionEvent {
    pub t: f64,
    pub delay_s: f64,
}

impl FingerState {
    pub fn new(x_mm: f64, y_mm: f64, traits: RunTraits) -> Self {
        Self { t: 0.0, x_mm, y_mm, phase: FingerPhase::Free, pace: 1.0, traits }
    }

    /// Signed forward speed factor; negative when sliding back.
    pub fn speed_factor(&self) -> f64 {
        match self.phase {
            FingerPhase::Complying { backtrack: true, .. } => -self.pace,
            _ => self.pace,
        }
    }
}

fn direction(kind: CommandKind) -> f64 {
    match kind {
        CommandKind::Down => 1.0,
        CommandKind::Up => -1.0,
        _ => 0.0,
    }
}

/// Advances the finger by `dt` under the currently displayed command.
/// Returns the reaction delay drawn when a new reaction starts.
pub fn step_finger(
    state: &mut FingerState,
    command: CommandKind,
    params: &FingerModelParams,
    dt: f64,
    rng: &mut impl Rng,
) -> Option<ReactionEvent> {
    let active = command.is_directional().then_some(command);
    let mut event = None;
    let mut react = |state: &mut FingerState, kind: CommandKind, rng: &mut dyn rand::RngCore| {
        let delay = params.reaction_delay_dist().sample(rng);
        event = Some(ReactionEvent { t: state.t, delay_s: delay });
        FingerPhase::Reacting { command: kind, until: state.t + delay }
    };
    state.phase = match (state.phase, active) {
        (FingerPhase::Free, Some(kind)) => react(state, kind, rng),
        (FingerPhase::Free, None) => FingerPhase::Free,
        (FingerPhase::Reacting { command: c, .. }, Some(kind)) if c != kind => react(state, kind, rng),
        (FingerPhase::Reacting { .. }, None) => FingerPhase::Free,
        (FingerPhase::Reacting { command: c, until }, Some(_)) if state.t >= until => FingerPhase::Complying {
            command: c,
            until: state.t + params.compliance_duration_dist().sample(rng),
            backtrack: rng.random_bool(params.backtrack_probability),
        },
        (phase @ FingerPhase::Reacting { .. }, Some(_)) => phase,
        (FingerPhase::Complying { command: c, until, .. }, a) if a != Some(c) || state.t >= until => {
            match a {
                Some(kind) if kind != c => react(state, kind, rng),
                _ => FingerPhase::Free,
            }
        }
        (phase @ FingerPhase::Complying { .. }, _) => phase,
    };

    state.pace = match state.phase {
        FingerPhase::Free if params.speed_recovery_s > 0.0 => {
            state.pace + (1.0 - state.pace) * (dt / params.speed_recovery_s).min(1.0)
        }
        FingerPhase::Free => 1.0,
        _ => params.compliance_slowdown,
    };
    let f = state.speed_factor();
    state.x_mm += state.traits.speed_mm_per_s * f * dt;
    let wander = if params.drift_sigma_mm > 0.0 {
        Normal::new(0.0, params.drift_sigma_mm).expect("validated").sample(rng)
    } else {
        0.0
    };
    state.y_mm += f.abs() * (state.traits.drift_bias_mm_per_s * dt + wander);
    if let FingerPhase::Complying { command, .. } = state.phase {
        state.y_mm += direction(command) * params.correction_speed_mm_per_s * dt;
    }
    state.t += dt;
    event
}
