//! Tree ensembles over sparse features: random forest and gradient-boosted
//! decision trees.

mod cart;
mod forest;
mod gbdt;

pub use forest::{train_random_forest, ForestModel, ForestParams};
pub use gbdt::{train_gbdt, GbdtFit, GbdtModel, GbdtParams};

use serde::{Deserialize, Serialize};

use crate::sparse::SparseVector;

/// Binary tree; splits send `x[feature] <= threshold` left. Thresholds sit at
/// midpoints of observed feature values and absent sparse entries read as
/// exactly 0.0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &SparseVector) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split { feature, threshold, left, right } => {
                if x.get(*feature) <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Derive a per-worker seed from a master seed (splitmix64 mix).
pub(crate) fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_routes_on_threshold() {
        let tree = TreeNode::Split {
            feature: 1,
            threshold: 0.5,
            left: Box::new(TreeNode::Leaf { value: 0.0 }),
            right: Box::new(TreeNode::Leaf { value: 1.0 }),
        };
        let low = SparseVector::from_pairs(3, vec![(1, 0.5)]).unwrap();
        let high = SparseVector::from_pairs(3, vec![(1, 0.6)]).unwrap();
        let absent = SparseVector::zeros(3);
        assert_eq!(tree.predict(&low), 0.0);
        assert_eq!(tree.predict(&high), 1.0);
        assert_eq!(tree.predict(&absent), 0.0);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.n_leaves(), 2);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }
}
