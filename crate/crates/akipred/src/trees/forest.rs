//! Random forest: bagged Gini trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::features::FeatureMatrix;
use crate::sparse::SparseVector;

use super::cart::{Task, TreeBuilder};
use super::{derive_seed, TreeNode};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(dim))`.
    pub mtry: Option<usize>,
    /// Fit each tree on a bootstrap resample of the rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: 12,
            min_leaf: 1,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Leaves carry class fractions; the forest averages them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        if x.dim() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, found: x.dim() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }
}

/// Per-tree seeds derive from the master seed, so parallel and sequential
/// training build the same forest.
pub fn train_random_forest(
    matrix: &FeatureMatrix,
    params: &ForestParams,
    mode: ExecMode,
) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return Err(Error::InvalidParam("n_trees must be >= 1".into()));
    }
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let dim = matrix.dimension;
    let mtry = params.mtry.unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize).max(1);
    let labels: Vec<f64> = matrix.labels.iter().map(|&l| l as f64).collect();
    let zeros = vec![0.0; matrix.n_rows()];

    let trees = exec::map_range(mode, params.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, t as u64));
        let n = matrix.n_rows();
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let builder = TreeBuilder {
            rows: &matrix.rows,
            dim,
            stat_a: &labels,
            stat_b: &zeros,
            task: Task::GiniClassification,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            // Feature scoring inside one tree stays sequential; parallelism
            // is per tree here.
            mode: ExecMode::Sequential,
        };
        builder.grow(indices, mtry, &mut rng)
    });

    Ok(ForestModel { n_features: dim, trees })
}
