//! Fitting the finger model to observed reading statistics.

use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, ExperimentConfig};
use super::finger::FingerModelParams;
use super::metrics::compute_metrics;
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationTargets {
    pub open_loop_speed_mm_per_s: f64,
    pub closed_loop_speed_mm_per_s: f64,
    /// Mean |end-of-line drift| without feedback.
    pub mean_drift_mm: f64,
    pub reaction_median_s: f64,
    /// Mean time from command onset to the command clearing.
    pub compliance_mean_s: f64,
    /// Accepted relative error per target.
    pub tolerance: f64,
    /// The search stops early once every target is within this relative error.
    pub stop_tolerance: f64,
    pub max_rounds: usize,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            open_loop_speed_mm_per_s: 18.21,
            closed_loop_speed_mm_per_s: 4.87,
            mean_drift_mm: 7.5,
            reaction_median_s: 0.75,
            compliance_mean_s: 2.0,
            tolerance: 0.10,
            stop_tolerance: 0.02,
            max_rounds: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationMeasurement {
    pub open_loop_speed_mm_per_s: f64,
    pub closed_loop_speed_mm_per_s: f64,
    pub mean_drift_mm: f64,
    pub reaction_median_s: f64,
    pub compliance_mean_s: f64,
}

impl CalibrationMeasurement {
    /// Largest relative error against the targets.
    pub fn worst_error(&self, t: &CalibrationTargets) -> f64 {
        [
            (self.open_loop_speed_mm_per_s, t.open_loop_speed_mm_per_s),
            (self.closed_loop_speed_mm_per_s, t.closed_loop_speed_mm_per_s),
            (self.mean_drift_mm, t.mean_drift_mm),
            (self.reaction_median_s, t.reaction_median_s),
            (self.compliance_mean_s, t.compliance_mean_s),
        ]
        .iter()
        .map(|(m, target)| ((m - target) / target).abs())
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationReport {
    pub params: FingerModelParams,
    pub measured: CalibrationMeasurement,
    pub worst_relative_error: f64,
    pub rounds: usize,
}

/// Measures the calibration statistics of `params` with the experiment
/// settings of `base` (perception, page, seed, repetitions).
pub fn measure(base: &ExperimentConfig, params: &FingerModelParams) -> Result<CalibrationMeasurement, SimError> {
    let mut cfg = base.clone();
    cfg.finger = params.clone();
    cfg.feedback_on = false;
    let open = compute_metrics(&run_experiment(&cfg)?.logs)?;
    cfg.feedback_on = true;
    let closed = compute_metrics(&run_experiment(&cfg)?.logs)?;
    Ok(CalibrationMeasurement {
        open_loop_speed_mm_per_s: open.avg_speed_mm_per_s,
        closed_loop_speed_mm_per_s: closed.avg_speed_mm_per_s,
        mean_drift_mm: open.mean_abs_end_drift_mm,
        reaction_median_s: closed.median_reaction_s.unwrap_or(f64::NAN),
        compliance_mean_s: closed.mean_compliance_s.unwrap_or(f64::NAN),
    })
}

fn step_ratio(r: f64) -> f64 {
    if r.is_finite() {
        r.clamp(0.5, 2.0)
    } else {
        1.0
    }
}

/// Fixed-point search over scan speed, drift bias, reaction median,
/// correction speed and the compliance slowdown. Each statistic is driven
/// mainly by one parameter, so each round rescales every parameter by the
/// ratio that would fix its statistic on its own. Returns the best
/// parameters seen, or `CalibrationFailed` when they miss `tolerance`.
pub fn calibrate_finger_model(
    targets: &CalibrationTargets,
    base: &ExperimentConfig,
    initial: &FingerModelParams,
) -> Result<CalibrationReport, SimError> {
    let mut params = initial.clone();
    let mut best: Option<CalibrationReport> = None;
    for round in 1..=targets.max_rounds.max(1) {
        let m = measure(base, &params)?;
        let err = m.worst_error(targets);
        if best.as_ref().is_none_or(|b| err < b.worst_relative_error) {
            best = Some(CalibrationReport { params: params.clone(), measured: m, worst_relative_error: err, rounds: round });
        }
        if err <= targets.stop_tolerance {
            break;
        }
        params.scan_speed_mm_per_s *= step_ratio(targets.open_loop_speed_mm_per_s / m.open_loop_speed_mm_per_s);
        params.drift_bias_mm_per_s *= step_ratio(targets.mean_drift_mm / m.mean_drift_mm);
        params.reaction_delay_median_s *= step_ratio(targets.reaction_median_s / m.reaction_median_s);
        // Compliance is the reaction plus a travel time inversely
        // proportional to the correction speed.
        let travel_now = m.compliance_mean_s - m.reaction_median_s;
        let travel_goal = targets.compliance_mean_s - targets.reaction_median_s;
        params.correction_speed_mm_per_s *= step_ratio(travel_now / travel_goal);
        // The closed-loop speed responds less than proportionally to the
        // slowdown factor.
        let r = targets.closed_loop_speed_mm_per_s / m.closed_loop_speed_mm_per_s;
        params.compliance_slowdown = (params.compliance_slowdown * step_ratio(r.powf(1.5))).min(1.0);
    }
    let best = best.expect("at least one round");
    if best.worst_relative_error > targets.tolerance {
        return Err(SimError::CalibrationFailed(format!(
            "worst relative error {:.3} with {}",
            best.worst_relative_error,
            serde_json::to_string(&best).unwrap_or_default()
        )));
    }
    Ok(best)
}
