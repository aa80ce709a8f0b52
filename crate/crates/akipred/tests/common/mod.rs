//! Shared test oracles, kept as straight-line enumerations independent of
//! the library's implementation paths.

use akipred::kdigo::{AkiStatus, Criterion, KdigoConfig};

#[derive(Debug, PartialEq)]
pub struct OracleAssessment {
    pub status: AkiStatus,
    pub onset_hours: Option<f64>,
    pub criterion: Option<Criterion>,
}

/// All-pairs KDIGO oracle: enumerate every ordered measurement pair for the
/// absolute criterion and every measurement for the relative criterion, take
/// the earliest event time (absolute wins ties), classify by that time.
pub fn kdigo_oracle(points: &[(f64, f64)], cfg: &KdigoConfig) -> OracleAssessment {
    let mut baseline: Option<f64> = None;
    for &(t, v) in points {
        if t <= cfg.day1_hours {
            baseline = Some(baseline.map_or(v, |b: f64| b.min(v)));
        }
    }
    let Some(baseline) = baseline else {
        return OracleAssessment {
            status: AkiStatus::InsufficientData,
            onset_hours: None,
            criterion: None,
        };
    };

    // (time, 0) for absolute events, (time, 1) for relative
    let mut candidates: Vec<(f64, u8)> = Vec::new();
    for j in 0..points.len() {
        let (t2, v2) = points[j];
        for &(t1, v1) in &points[..j] {
            if t2 - t1 > 0.0 && t2 - t1 <= cfg.rise_window_hours && v2 - v1 >= cfg.absolute_rise {
                candidates.push((t2, 0));
            }
        }
        if v2 >= cfg.relative_factor * baseline {
            candidates.push((t2, 1));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    match candidates.first() {
        None => {
            let has_post_day1 = points.iter().any(|&(t, _)| t > cfg.day1_hours);
            let status = if has_post_day1 || cfg.insufficient_as_negative {
                AkiStatus::Negative
            } else {
                AkiStatus::InsufficientData
            };
            OracleAssessment { status, onset_hours: None, criterion: None }
        }
        Some(&(t2, _)) if t2 <= cfg.day1_hours => OracleAssessment {
            status: AkiStatus::ExcludedDay1Aki,
            onset_hours: None,
            criterion: None,
        },
        Some(&(t2, flag)) => OracleAssessment {
            status: AkiStatus::Positive,
            onset_hours: Some(t2),
            criterion: Some(if flag == 0 { Criterion::AbsoluteRise } else { Criterion::RelativeRise }),
        },
    }
}

/// O(P*N) pairwise AUC oracle.
pub fn auc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        if labels[i] != 1 {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Strictly increasing random creatinine-style series from a seeded value
/// stream: times in [0, 72], values positive.
#[allow(dead_code)] // each integration-test target compiles its own copy
pub fn random_series(rng: &mut impl rand::Rng, max_points: usize) -> Vec<(f64, f64)> {
    let n = rng.random_range(1..=max_points);
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..72.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| (t, rng.random_range(0.2..4.0)))
        .collect()
}
