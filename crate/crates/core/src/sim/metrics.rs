//! Tracking metrics over a batch of trajectory logs.

use serde::{Deserialize, Serialize};

use super::experiment::{TrajectoryLog, TrajectorySample};
use super::SimError;
use crate::feedback::CommandKind;

/// Width of the x bins the envelopes are taken over.
pub const ENVELOPE_BIN_MM: f64 = 1.0;
/// Half width of the band counted as on track.
pub const CONTAINMENT_BAND_MM: f64 = 2.0;
/// Window of the moving average applied before looking for speed minima.
pub const SPEED_SMOOTHING_S: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub run_count: usize,
    pub sample_count: usize,
    pub mean_offset_mm: f64,
    pub std_offset_mm: f64,
    pub containment_2mm_fraction: f64,
    /// Left edges of the x bins with samples, relative to the start of the
    /// line.
    pub envelope_x_mm: Vec<f64>,
    pub max_envelope_mm: Vec<f64>,
    pub min_envelope_mm: Vec<f64>,
    /// Largest |offset| over all samples.
    pub max_abs_offset_mm: f64,
    pub end_drift_mm: Vec<f64>,
    pub mean_abs_end_drift_mm: f64,
    pub run_speeds_mm_per_s: Vec<f64>,
    pub avg_speed_mm_per_s: f64,
    pub reaction_times_s: Vec<f64>,
    pub compliance_durations_s: Vec<f64>,
    pub median_reaction_s: Option<f64>,
    pub mean_compliance_s: Option<f64>,
    pub command_bursts: usize,
    /// Bursts followed by a local speed minimum within one mean compliance
    /// duration.
    pub bursts_with_speed_minimum: usize,
}

/// One uninterrupted display of an Up or Down command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandEpisode {
    pub kind: CommandKind,
    /// Sample index of the onset.
    pub start: usize,
    /// Sample index where another command took over; `None` when the run
    /// ended first.
    pub end: Option<usize>,
}

pub fn command_episodes(samples: &[TrajectorySample]) -> Vec<CommandEpisode> {
    let mut out: Vec<CommandEpisode> = Vec::new();
    let mut open: Option<(CommandKind, usize)> = None;
    for (i, s) in samples.iter().enumerate() {
        if open.is_some_and(|(k, _)| k == s.command) {
            continue;
        }
        if let Some((kind, start)) = open.take() {
            out.push(CommandEpisode { kind, start, end: Some(i) });
        }
        if s.command.is_directional() {
            open = Some((s.command, i));
        }
    }
    if let Some((kind, start)) = open {
        out.push(CommandEpisode { kind, start, end: None });
    }
    out
}

/// Time from onset to the furthest excursion against the commanded
/// direction, when the finger turns around before the command clears.
pub fn reaction_time(samples: &[TrajectorySample], ep: &CommandEpisode) -> Option<f64> {
    let end = ep.end?;
    let toward = if ep.kind == CommandKind::Down { 1.0 } else { -1.0 };
    let window = &samples[ep.start..end];
    let (idx, _) = window
        .iter()
        .enumerate()
        .min_by(|a, b| (toward * a.1.y_mm).total_cmp(&(toward * b.1.y_mm)).then(a.0.cmp(&b.0)))?;
    // A minimum on the last sample means the turn was not observed.
    if ep.start + idx + 1 >= end {
        return None;
    }
    Some(window[idx].t - window[0].t)
}

/// Forward speed per sample from central differences, smoothed with a
/// centered moving average of `SPEED_SMOOTHING_S`.
pub fn speed_profile(samples: &[TrajectorySample]) -> Vec<f64> {
    let n = samples.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (samples[b].x_mm - samples[a].x_mm) / (samples[b].t - samples[a].t)
        })
        .collect();
    let period = (samples[n - 1].t - samples[0].t) / (n - 1) as f64;
    let half = (SPEED_SMOOTHING_S / period / 2.0).round() as usize;
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(half), (i + half).min(n - 1));
            raw[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect()
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn compute_metrics(logs: &[TrajectoryLog]) -> Result<MetricsReport, SimError> {
    let runs: Vec<&TrajectoryLog> = logs.iter().filter(|l| !l.samples.is_empty()).collect();
    if runs.is_empty() {
        return Err(SimError::InvalidConfig("no trajectory samples".into()));
    }
    let offsets: Vec<f64> = runs.iter().flat_map(|l| l.samples.iter().map(|s| s.y_mm)).collect();
    let n = offsets.len() as f64;
    let mean_offset = offsets.iter().sum::<f64>() / n;
    let std_offset = (offsets.iter().map(|y| (y - mean_offset).powi(2)).sum::<f64>() / n).sqrt();
    let contained = offsets.iter().filter(|y| y.abs() <= CONTAINMENT_BAND_MM).count() as f64 / n;
    let max_abs = offsets.iter().fold(0.0f64, |m, y| m.max(y.abs()));

    let mut bins: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    for l in &runs {
        let x0 = l.samples[0].x_mm;
        for s in &l.samples {
            let key = ((s.x_mm - x0) / ENVELOPE_BIN_MM).floor() as i64;
            let e = bins.entry(key).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(s.y_mm);
            e.1 = e.1.max(s.y_mm);
        }
    }
    let envelope_x_mm = bins.keys().map(|k| *k as f64 * ENVELOPE_BIN_MM).collect();
    let min_envelope_mm = bins.values().map(|v| v.0).collect();
    let max_envelope_mm = bins.values().map(|v| v.1).collect();

    let end_drift_mm: Vec<f64> = runs.iter().map(|l| l.samples.last().expect("non-empty").y_mm).collect();
    let run_speeds: Vec<f64> = runs
        .iter()
        .map(|l| {
            let (a, b) = (l.samples[0], *l.samples.last().expect("non-empty"));
            if b.t > a.t {
                (b.x_mm - a.x_mm) / (b.t - a.t)
            } else {
                0.0
            }
        })
        .collect();

    let mut reactions = Vec::new();
    let mut compliance = Vec::new();
    let per_run: Vec<Vec<CommandEpisode>> = runs.iter().map(|l| command_episodes(&l.samples)).collect();
    for (l, eps) in runs.iter().zip(&per_run) {
        for ep in eps {
            if let Some(r) = reaction_time(&l.samples, ep) {
                reactions.push(r);
            }
            if let Some(end) = ep.end {
                compliance.push(l.samples[end].t - l.samples[ep.start].t);
            }
        }
    }
    let mean_compliance = mean(&compliance);

    let mut bursts = 0;
    let mut with_minimum = 0;
    if let Some(window) = mean_compliance {
        for ((l, eps), speed_avg) in runs.iter().zip(&per_run).zip(&run_speeds) {
            let speed = speed_profile(&l.samples);
            for ep in eps {
                bursts += 1;
                let t0 = l.samples[ep.start].t;
                let last = l.samples.partition_point(|s| s.t <= t0 + window);
                let found = (ep.start.max(1)..last.min(speed.len() - 1))
                    .any(|i| speed[i] <= speed[i - 1] && speed[i] <= speed[i + 1] && speed[i] < *speed_avg);
                if found {
                    with_minimum += 1;
                }
            }
        }
    }

    Ok(MetricsReport {
        run_count: runs.len(),
        sample_count: offsets.len(),
        mean_offset_mm: mean_offset,
        std_offset_mm: std_offset,
        containment_2mm_fraction: contained,
        envelope_x_mm,
        max_envelope_mm,
        min_envelope_mm,
        max_abs_offset_mm: max_abs,
        mean_abs_end_drift_mm: end_drift_mm.iter().map(|d| d.abs()).sum::<f64>() / end_drift_mm.len() as f64,
        end_drift_mm,
        avg_speed_mm_per_s: run_speeds.iter().sum::<f64>() / run_speeds.len() as f64,
        run_speeds_mm_per_s: run_speeds,
        median_reaction_s: median(&reactions),
        reaction_times_s: reactions,
        compliance_durations_s: compliance,
        mean_compliance_s: mean_compliance,
        command_bursts: bursts,
        bursts_with_speed_minimum: with_minimum,
    })
}

impl MetricsReport {
    /// Scalar metrics as `name,value` CSV rows.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let rows = [
            ("runCount", self.run_count.to_string()),
            ("sampleCount", self.sample_count.to_string()),
            ("meanOffsetMm", self.mean_offset_mm.to_string()),
            ("stdOffsetMm", self.std_offset_mm.to_string()),
            ("containment2mmFraction", self.containment_2mm_fraction.to_string()),
            ("maxAbsOffsetMm", self.max_abs_offset_mm.to_string()),
            ("meanAbsEndDriftMm", self.mean_abs_end_drift_mm.to_string()),
            ("avgSpeedMmPerS", self.avg_speed_mm_per_s.to_string()),
            ("medianReactionS", opt(self.median_reaction_s)),
            ("meanComplianceS", opt(self.mean_compliance_s)),
            ("commandBursts", self.command_bursts.to_string()),
            ("burstsWithSpeedMinimum", self.bursts_with_speed_minimum.to_string()),
        ];
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }

    /// Envelopes as `xMm,minMm,maxMm` CSV rows.
    pub fn envelope_csv(&self) -> String {
        let mut out = String::from("xMm,minMm,maxMm\n");
        for ((x, lo), hi) in self.envelope_x_mm.iter().zip(&self.min_envelope_mm).zip(&self.max_envelope_mm) {
            out.push_str(&format!("{x},{lo},{hi}\n"));
        }
        out
    }
}
