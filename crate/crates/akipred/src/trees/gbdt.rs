//! Gradient boosting with logistic loss. Each round fits a regression tree
//! to the residuals (negative gradients) and sets leaf values by a Newton
//! step; prediction is `sigmoid(F0 + eta * sum of tree outputs)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::features::FeatureMatrix;
use crate::linear::squash;
use crate::sparse::SparseVector;

use super::cart::{Task, TreeBuilder};
use super::{derive_seed, TreeNode};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Shrinkage in (0, 1].
    pub eta: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { n_rounds: 100, max_depth: 3, min_leaf: 1, eta: 0.1, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GbdtModel {
    pub n_features: usize,
    /// Initial score: log-odds of the training base rate.
    pub f0: f64,
    pub eta: f64,
    pub trees: Vec<TreeNode>,
}

impl GbdtModel {
    pub fn decision(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, found: x.dim() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.f0 + self.eta * sum)
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        Ok(squash(self.decision(x)?))
    }
}

/// Trained model plus the per-round training log-loss curve.
#[derive(Clone, Debug)]
pub struct GbdtFit {
    pub model: GbdtModel,
    pub train_loss: Vec<f64>,
}

fn log_loss(scores: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&f, &y)| {
            let p = squash(f);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / scores.len() as f64
}

pub fn train_gbdt(matrix: &FeatureMatrix, params: &GbdtParams, mode: ExecMode) -> Result<GbdtFit> {
    if params.n_rounds == 0 {
        return Err(Error::InvalidParam("n_rounds must be >= 1".into()));
    }
    if !(params.eta > 0.0 && params.eta <= 1.0) {
        return Err(Error::InvalidParam("eta must be in (0, 1]".into()));
    }
    let n = matrix.n_rows();
    if matrix.n_positive() == 0 || matrix.n_negative() == 0 {
        return Err(Error::SingleClass);
    }

    let base_rate = matrix.n_positive() as f64 / n as f64;
    let f0 = (base_rate / (1.0 - base_rate)).ln();
    let mut scores = vec![f0; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_loss = Vec::with_capacity(params.n_rounds);

    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    for round in 0..params.n_rounds {
        for i in 0..n {
            let p = squash(scores[i]);
            residuals[i] = matrix.labels[i] as f64 - p;
            hessians[i] = p * (1.0 - p);
        }
        let builder = TreeBuilder {
            rows: &matrix.rows,
            dim: matrix.dimension,
            stat_a: &residuals,
            stat_b: &hessians,
            task: Task::NewtonRegression,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            // Rounds are sequential; within a round, feature scoring may run
            // in parallel.
            mode,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, round as u64));
        let tree = builder.grow((0..n).collect(), matrix.dimension, &mut rng);
        for (i, score) in scores.iter_mut().enumerate() {
            *score += params.eta * tree.predict(&matrix.rows[i]);
        }
        trees.push(tree);
        let loss = log_loss(&scores, &matrix.labels);
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: round });
        }
        train_loss.push(loss);
    }

    Ok(GbdtFit {
        model: GbdtModel { n_features: matrix.dimension, f0, eta: params.eta, trees },
        train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSetKind;

    fn matrix_1d(xs: &[f64], labels: &[u8]) -> FeatureMatrix {
        let rows: Vec<SparseVector> = xs
            .iter()
            .map(|&x| SparseVector::from_pairs(1, vec![(0, x)]).unwrap())
            .collect();
        let ids = (0..xs.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(FeatureSetKind::Words, 1, ids, labels.to_vec(), rows).unwrap()
    }

    #[test]
    fn f0_is_log_odds_of_base_rate() {
        let m = matrix_1d(&[0.1, 0.2, 0.3, 0.4], &[1, 1, 1, 0]);
        let params = GbdtParams { n_rounds: 1, ..GbdtParams::default() };
        let fit = train_gbdt(&m, &params, ExecMode::Sequential).unwrap();
        assert!((fit.model.f0 - 3.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn separable_1d_reaches_perfect_training_accuracy() {
        let m = matrix_1d(&[0.1, 0.2, 0.3, 0.7, 0.8, 0.9], &[0, 0, 0, 1, 1, 1]);
        let params = GbdtParams { n_rounds: 50, max_depth: 1, ..GbdtParams::default() };
        let fit = train_gbdt(&m, &params, ExecMode::Sequential).unwrap();
        for (row, &label) in m.rows.iter().zip(&m.labels) {
            let p = fit.model.predict_proba(row).unwrap();
            assert_eq!((p >= 0.5) as u8, label);
        }
    }

    #[test]
    fn train_loss_is_monotone_nonincreasing() {
        let m = matrix_1d(&[0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 0.3, 0.6], &[0, 0, 0, 1, 1, 1, 1, 0]);
        let fit = train_gbdt(&m, &GbdtParams::default(), ExecMode::Sequential).unwrap();
        for pair in fit.train_loss.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "loss increased: {:?}", pair);
        }
    }

    #[test]
    fn tiny_eta_barely_moves_round_one_loss() {
        let m = matrix_1d(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]);
        assert!(train_gbdt(
            &m,
            &GbdtParams { eta: 0.0, ..GbdtParams::default() },
            ExecMode::Sequential
        )
        .is_err());

        let base = log_loss(&[0.0; 4], &[0, 0, 1, 1]);
        let small = train_gbdt(
            &m,
            &GbdtParams { n_rounds: 1, eta: 1e-6, ..GbdtParams::default() },
            ExecMode::Sequential,
        )
        .unwrap();
        let big = train_gbdt(
            &m,
            &GbdtParams { n_rounds: 1, eta: 0.5, ..GbdtParams::default() },
            ExecMode::Sequential,
        )
        .unwrap();
        assert!((small.train_loss[0] - base).abs() < 1e-5);
        assert!(base - big.train_loss[0] > 0.1);
    }

    #[test]
    fn single_class_is_rejected() {
        let m = matrix_1d(&[0.1, 0.2], &[1, 1]);
        assert!(matches!(
            train_gbdt(&m, &GbdtParams::default(), ExecMode::Sequential),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let m = matrix_1d(&[0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 0.3, 0.6], &[0, 0, 0, 1, 1, 1, 1, 0]);
        let params = GbdtParams { n_rounds: 10, ..GbdtParams::default() };
        let a = train_gbdt(&m, &params, ExecMode::Sequential).unwrap();
        let b = train_gbdt(&m, &params, ExecMode::Parallel).unwrap();
        assert_eq!(
            serde_json::to_string(&a.model).unwrap(),
            serde_json::to_string(&b.model).unwrap()
        );
    }
}
