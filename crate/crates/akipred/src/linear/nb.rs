//! Multinomial naive Bayes with Laplace smoothing.
//!
//! tf-idf weights are accepted and summed as fractional counts; since the
//! weighting is applied corpus-wide, the model is still a count-ratio
//! baseline, just over scaled counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::sparse::SparseVector;

use super::{squash, PROBA_EPSILON};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NbModel {
    pub alpha: f64,
    pub log_prior_pos: f64,
    pub log_prior_neg: f64,
    /// Per-feature log theta(t | class); exp sums to 1 per class.
    pub log_likelihood_pos: Vec<f64>,
    pub log_likelihood_neg: Vec<f64>,
}

impl NbModel {
    pub fn dimension(&self) -> usize {
        self.log_likelihood_pos.len()
    }

    fn log_joint(&self, x: &SparseVector, positive: bool) -> f64 {
        let (prior, likelihood) = if positive {
            (self.log_prior_pos, &self.log_likelihood_pos)
        } else {
            (self.log_prior_neg, &self.log_likelihood_neg)
        };
        prior + x.iter().map(|(i, w)| w * likelihood[i]).sum::<f64>()
    }

    /// Normalized posterior P(positive | x).
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), found: x.dim() });
        }
        let diff = self.log_joint(x, true) - self.log_joint(x, false);
        Ok(squash(diff))
    }
}

/// Fit class priors and smoothed per-feature likelihoods:
/// `theta(t|c) = (count(t,c) + alpha) / (sum_t count(t,c) + alpha * V)`.
pub fn train_nb(matrix: &FeatureMatrix, alpha: f64) -> Result<NbModel> {
    if alpha <= 0.0 {
        return Err(Error::InvalidParam("alpha must be positive".into()));
    }
    let n_pos = matrix.n_positive();
    let n_neg = matrix.n_negative();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let dim = matrix.dimension;
    let mut count_pos = vec![0.0; dim];
    let mut count_neg = vec![0.0; dim];
    for (row, &label) in matrix.rows.iter().zip(&matrix.labels) {
        let counts = if label == 1 { &mut count_pos } else { &mut count_neg };
        for (i, w) in row.iter() {
            counts[i] += w;
        }
    }
    let v = dim as f64;
    let total_pos: f64 = count_pos.iter().sum();
    let total_neg: f64 = count_neg.iter().sum();
    let log_likelihood_pos =
        count_pos.iter().map(|c| ((c + alpha) / (total_pos + alpha * v)).ln()).collect();
    let log_likelihood_neg =
        count_neg.iter().map(|c| ((c + alpha) / (total_neg + alpha * v)).ln()).collect();
    let n = matrix.n_rows() as f64;
    Ok(NbModel {
        alpha,
        log_prior_pos: ((n_pos as f64 / n).max(PROBA_EPSILON)).ln(),
        log_prior_neg: ((n_neg as f64 / n).max(PROBA_EPSILON)).ln(),
        log_likelihood_pos,
        log_likelihood_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSetKind;

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        let dim = rows[0].len();
        let sparse: Vec<SparseVector> = rows
            .iter()
            .map(|r| {
                SparseVector::from_pairs(dim, r.iter().copied().enumerate().filter(|&(_, w)| w != 0.0))
                    .unwrap()
            })
            .collect();
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(FeatureSetKind::Words, dim, ids, labels, sparse).unwrap()
    }

    #[test]
    fn hand_computed_posterior() {
        // vocabulary {aki, ok}; positive doc "aki aki", negative doc "ok"
        let m = matrix(vec![vec![2.0, 0.0], vec![0.0, 1.0]], vec![1, 0]);
        let model = train_nb(&m, 1.0).unwrap();
        // theta(aki|+) = 3/4, theta(aki|-) = 1/3, equal priors
        // P(+|"aki") = 0.75 / (0.75 + 1/3) = 0.69231
        let x = SparseVector::from_pairs(2, vec![(0, 1.0)]).unwrap();
        let p = model.predict_proba(&x).unwrap();
        assert!((p - 0.69231).abs() < 1e-5, "got {p}");
    }

    #[test]
    fn likelihoods_sum_to_one_per_class() {
        let m = matrix(
            vec![vec![2.0, 0.0, 1.0], vec![0.0, 1.0, 0.5], vec![1.0, 1.0, 0.0]],
            vec![1, 0, 1],
        );
        let model = train_nb(&m, 0.7).unwrap();
        let sum_pos: f64 = model.log_likelihood_pos.iter().map(|l| l.exp()).sum();
        let sum_neg: f64 = model.log_likelihood_neg.iter().map(|l| l.exp()).sum();
        assert!((sum_pos - 1.0).abs() < 1e-9);
        assert!((sum_neg - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_corpus_predicts_half() {
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 0]);
        let model = train_nb(&m, 1.0).unwrap();
        let x = SparseVector::from_pairs(2, vec![(0, 1.0), (1, 1.0)]).unwrap();
        assert!((model.predict_proba(&x).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn huge_alpha_approaches_priors() {
        let m = matrix(vec![vec![3.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0]], vec![1, 0, 0]);
        let model = train_nb(&m, 1e12).unwrap();
        let x = SparseVector::from_pairs(2, vec![(0, 1.0)]).unwrap();
        // prior(+) = 1/3
        assert!((model.predict_proba(&x).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn single_class_rejected() {
        let m = matrix(vec![vec![1.0], vec![2.0]], vec![1, 1]);
        assert!(matches!(train_nb(&m, 1.0), Err(Error::SingleClass)));
    }
}
