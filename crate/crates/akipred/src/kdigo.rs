//! AKI labeling from 72-hour serum creatinine series under the KDIGO
//! serum-creatinine criteria: a rise of >= 0.3 mg/dL within 48 hours, or a
//! value >= 1.5x the admission-day baseline. Events on day 1 exclude the
//! stay; onset in (24, 72] hours labels it positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};

/// Time-ordered (hour offset, mg/dL) creatinine measurements within
/// [0, 72] hours of ICU admission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreatinineSeries {
    points: Vec<(f64, f64)>,
}

impl CreatinineSeries {
    /// Points must have strictly increasing times in [0, 72] and positive
    /// values.
    pub fn new(points: Vec<(f64, f64)>) -> Result<CreatinineSeries> {
        for window in points.windows(2) {
            if window[1].0 <= window[0].0 {
                return Err(Error::InvalidParam("creatinine times must be strictly increasing".into()));
            }
        }
        for &(t, v) in &points {
            if !(0.0..=72.0).contains(&t) || !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParam(format!("bad creatinine point ({t}, {v})")));
            }
        }
        Ok(CreatinineSeries { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Thresholds of the serum-creatinine criteria.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct KdigoConfig {
    /// Absolute rise threshold in mg/dL.
    pub absolute_rise: f64,
    /// Relative rise factor over baseline.
    pub relative_factor: f64,
    /// Window for the absolute rise, hours.
    pub rise_window_hours: f64,
    /// End of the admission day, hours.
    pub day1_hours: f64,
    /// Treat stays without post-day-1 measurements as negative instead of
    /// insufficient data.
    pub insufficient_as_negative: bool,
}

impl Default for KdigoConfig {
    fn default() -> Self {
        KdigoConfig {
            absolute_rise: 0.3,
            relative_factor: 1.5,
            rise_window_hours: 48.0,
            day1_hours: 24.0,
            insufficient_as_negative: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AkiStatus {
    Positive,
    Negative,
    ExcludedDay1Aki,
    InsufficientData,
}

impl AkiStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            AkiStatus::Positive => "positive",
            AkiStatus::Negative => "negative",
            AkiStatus::ExcludedDay1Aki => "excluded_day1_aki",
            AkiStatus::InsufficientData => "insufficient_data",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    AbsoluteRise,
    RelativeRise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AkiAssessment {
    pub status: AkiStatus,
    /// Event time; present iff status is Positive, always in (24, 72].
    pub onset_hours: Option<f64>,
    /// Which criterion fired at the event time; AbsoluteRise wins ties.
    pub criterion: Option<Criterion>,
    /// Minimum creatinine over the first day, mg/dL. NaN when unavailable.
    pub baseline_mg_dl: f64,
}

/// Baseline creatinine: the minimum value over points with t in [0, 24].
pub fn baseline_creatinine(series: &CreatinineSeries, cfg: &KdigoConfig) -> Result<f64> {
    series
        .points
        .iter()
        .filter(|&&(t, _)| t <= cfg.day1_hours)
        .map(|&(_, v)| v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(Error::InvalidParam("no creatinine measurement in the first day".into()))
}

/// Classify a series. The earliest time t2 at which either criterion fires is
/// the event time: at or before 24 h the stay is excluded as day-1 AKI, in
/// (24, 72] it is positive with that onset, otherwise negative. Without a
/// day-1 measurement (no baseline), or without any post-day-1 measurement and
/// no event, the series carries insufficient data.
pub fn assess(series: &CreatinineSeries, cfg: &KdigoConfig) -> AkiAssessment {
    let baseline = match baseline_creatinine(series, cfg) {
        Ok(b) => b,
        Err(_) => {
            return AkiAssessment {
                status: AkiStatus::InsufficientData,
                onset_hours: None,
                criterion: None,
                baseline_mg_dl: f64::NAN,
            }
        }
    };

    let points = series.points();
    let mut event: Option<(f64, Criterion)> = None;
    'scan: for (j, &(t2, v2)) in points.iter().enumerate() {
        for &(t1, v1) in &points[..j] {
            if t2 - t1 <= cfg.rise_window_hours && v2 - v1 >= cfg.absolute_rise {
                event = Some((t2, Criterion::AbsoluteRise));
                break 'scan;
            }
        }
        if v2 >= cfg.relative_factor * baseline {
            event = Some((t2, Criterion::RelativeRise));
            break 'scan;
        }
    }

    match event {
        Some((t2, _)) if t2 <= cfg.day1_hours => AkiAssessment {
            status: AkiStatus::ExcludedDay1Aki,
            onset_hours: None,
            criterion: None,
            baseline_mg_dl: baseline,
        },
        Some((t2, criterion)) => AkiAssessment {
            status: AkiStatus::Positive,
            onset_hours: Some(t2),
            criterion: Some(criterion),
            baseline_mg_dl: baseline,
        },
        None => {
            let has_post_day1 = points.iter().any(|&(t, _)| t > cfg.day1_hours);
            let status = if has_post_day1 || cfg.insufficient_as_negative {
                AkiStatus::Negative
            } else {
                AkiStatus::InsufficientData
            };
            AkiAssessment {
                status,
                onset_hours: None,
                criterion: None,
                baseline_mg_dl: baseline,
            }
        }
    }
}

/// Assess many series; output order matches input order for any mode.
pub fn assess_batch(
    mode: ExecMode,
    series: &[CreatinineSeries],
    cfg: &KdigoConfig,
) -> Vec<AkiAssessment> {
    exec::map_slice(mode, series, |s| assess(s, cfg))
}
