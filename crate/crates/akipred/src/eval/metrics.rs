//! Classification metrics: rank-based ROC AUC and thresholded
//! precision/recall/F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mann-Whitney ROC AUC: over all positive/negative pairs, a positive
/// outranking a negative scores 1 and a tie scores 1/2. Computed from
/// tie-averaged ranks, which equals the pairwise count exactly.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // tie-averaged ranks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += rank;
            }
        }
        i = j + 1;
    }
    let p = n_pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when no score reached the threshold (precision forced to 0).
    pub no_predicted_positives: bool,
    /// Set when the labels held no positive (recall forced to 0).
    pub no_actual_positives: bool,
}

/// Precision, recall and F1 of the positive class at `score >= threshold`.
pub fn prf(scores: &[f64], labels: &[u8], threshold: f64) -> Result<PrfMetrics> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParam("threshold must be in (0, 1)".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted = score >= threshold;
        match (predicted, label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let no_predicted_positives = tp + fp == 0;
    let no_actual_positives = tp + fn_ == 0;
    let precision = if no_predicted_positives { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if no_actual_positives { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrfMetrics { precision, recall, f1, no_predicted_positives, no_actual_positives })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_hand_example() {
        // pos [0.8, 0.4], neg [0.6, 0.2]: wins 3 of 4 pairs
        let scores = [0.8, 0.4, 0.6, 0.2];
        let labels = [1, 1, 0, 0];
        assert!((roc_auc(&scores, &labels).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn perfect_separation_is_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_give_exactly_half() {
        let scores = [0.5; 6];
        let labels = [1, 0, 1, 0, 0, 0];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn prf_hand_example() {
        // TP=2, FP=2, FN=1
        let scores = [0.9, 0.8, 0.7, 0.6, 0.1, 0.2];
        let labels = [1, 1, 0, 0, 1, 0];
        let m = prf(&scores, &labels, 0.5).unwrap();
        assert!((m.precision - 0.5).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 0.5714285714).abs() < 1e-9);
        assert!(!m.no_predicted_positives);
    }

    #[test]
    fn no_predicted_positives_flagged() {
        let m = prf(&[0.1, 0.2, 0.3], &[1, 0, 1], 0.5).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert!(m.no_predicted_positives);
        assert!(!m.no_actual_positives);
    }

    #[test]
    fn perfect_classifier_is_all_ones() {
        let m = prf(&[0.9, 0.8, 0.1], &[1, 1, 0], 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }
}
