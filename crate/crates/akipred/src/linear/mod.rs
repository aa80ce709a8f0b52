//! Linear classifiers: multinomial naive Bayes, and L1/L2-regularized
//! logistic regression and linear SVM with probability scores and
//! coefficient introspection.

mod nb;
mod solver;

pub use nb::{train_nb, NbModel};
pub use solver::{objective, train_linear};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Probability clamp for score squashing.
pub const PROBA_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Logistic,
    Hinge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

/// Convergence and reproducibility knobs for `train_linear`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub max_iter: usize,
    /// Relative objective-decrease tolerance.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { max_iter: 5000, tol: 1e-8, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub loss: Loss,
    pub penalty: Penalty,
    pub lambda: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), found: x.dim() });
        }
        Ok(x.dot_dense(&self.weights) + self.intercept)
    }

    /// Count of exactly-zero coefficients.
    pub fn sparsity(&self) -> usize {
        self.weights.iter().filter(|&&w| w == 0.0).count()
    }

    /// P(positive | x). Logistic models squash the margin through a sigmoid;
    /// SVM margins go through the same fixed sigmoid, which preserves score
    /// ranks (and hence AUC) without fitted calibration.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        Ok(squash(self.decision(x)?))
    }
}

/// Numerically stable sigmoid clamped away from 0 and 1.
pub fn squash(margin: f64) -> f64 {
    let p = if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    };
    p.clamp(PROBA_EPSILON, 1.0 - PROBA_EPSILON)
}

/// The k largest strictly positive weights, descending, ties broken by name.
pub fn top_features<F>(weights: &[f64], name_of: F, k: usize) -> Vec<(String, f64)>
where
    F: Fn(usize) -> String,
{
    let mut positives: Vec<(String, f64)> = weights
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(i, &w)| (name_of(i), w))
        .collect();
    positives.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    positives.truncate(k);
    positives
}
