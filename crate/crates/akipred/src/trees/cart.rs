//! Exact greedy tree growing shared by the forest and the booster.
//!
//! Split search enumerates sorted unique observed values per candidate
//! feature (implicit sparse zeros form one value group) and places thresholds
//! at midpoints of adjacent distinct values. Candidate features are scored in
//! parallel with a total-order tie-break (gain, then feature index, then
//! threshold), so parallel and sequential growth produce identical trees.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::exec::{self, ExecMode};
use crate::sparse::SparseVector;

use super::TreeNode;

const MIN_GAIN: f64 = 1e-12;
/// Newton leaf values are capped to keep near-zero hessians from exploding.
const MAX_LEAF_VALUE: f64 = 15.0;

/// Additive per-node statistics. Classification: `a` = positive count.
/// Regression: `a` = residual sum, `b` = hessian sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Agg {
    pub n: f64,
    pub a: f64,
    pub b: f64,
}

impl Agg {
    fn add(&mut self, n: f64, a: f64, b: f64) {
        self.n += n;
        self.a += a;
        self.b += b;
    }

    fn minus(&self, other: &Agg) -> Agg {
        Agg { n: self.n - other.n, a: self.a - other.a, b: self.b - other.b }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Task {
    /// Gini-impurity splits, leaves carry the positive class fraction.
    GiniClassification,
    /// Squared-error splits on residuals, leaves carry a Newton step.
    NewtonRegression,
}

impl Task {
    /// Un-normalized badness of a candidate partition; lower is better.
    fn child_score(&self, left: &Agg, right: &Agg) -> f64 {
        match self {
            Task::GiniClassification => weighted_gini(left) + weighted_gini(right),
            Task::NewtonRegression => -(left.a * left.a / left.n + right.a * right.a / right.n),
        }
    }

    fn node_score(&self, total: &Agg) -> f64 {
        match self {
            Task::GiniClassification => weighted_gini(total),
            Task::NewtonRegression => -(total.a * total.a / total.n),
        }
    }

    fn leaf_value(&self, total: &Agg) -> f64 {
        match self {
            Task::GiniClassification => total.a / total.n,
            Task::NewtonRegression => {
                (total.a / total.b.max(1e-12)).clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE)
            }
        }
    }

    fn is_pure(&self, total: &Agg) -> bool {
        match self {
            Task::GiniClassification => total.a == 0.0 || total.a == total.n,
            Task::NewtonRegression => false,
        }
    }
}

fn weighted_gini(agg: &Agg) -> f64 {
    if agg.n == 0.0 {
        return 0.0;
    }
    let p = agg.a / agg.n;
    agg.n * 2.0 * p * (1.0 - p)
}

pub(crate) struct TreeBuilder<'a> {
    pub rows: &'a [SparseVector],
    pub dim: usize,
    /// Per-row statistic `a` (label or residual).
    pub stat_a: &'a [f64],
    /// Per-row statistic `b` (hessian; unused for classification).
    pub stat_b: &'a [f64],
    pub task: Task,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mode: ExecMode,
}

impl TreeBuilder<'_> {
    pub fn grow(&self, indices: Vec<usize>, mtry: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        self.grow_node(indices, 0, mtry, rng)
    }

    fn node_agg(&self, indices: &[usize]) -> Agg {
        let mut agg = Agg::default();
        for &i in indices {
            agg.add(1.0, self.stat_a[i], self.stat_b[i]);
        }
        agg
    }

    fn grow_node(
        &self,
        indices: Vec<usize>,
        depth: usize,
        mtry: usize,
        rng: &mut ChaCha8Rng,
    ) -> TreeNode {
        let total = self.node_agg(&indices);
        if depth >= self.max_depth
            || indices.len() < 2 * self.min_leaf
            || indices.len() < 2
            || self.task.is_pure(&total)
        {
            return TreeNode::Leaf { value: self.task.leaf_value(&total) };
        }

        // Values present in the node, inverted from the sparse rows. Features
        // with no explicit entry are all-zero here and cannot split.
        let mut by_feature: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
        for &i in &indices {
            for (feature, value) in self.rows[i].iter() {
                by_feature.entry(feature).or_default().push((value, i));
            }
        }

        let candidates: Vec<(usize, Vec<(f64, usize)>)> = if mtry >= self.dim {
            by_feature.into_iter().collect()
        } else {
            let mut all: Vec<usize> = (0..self.dim).collect();
            all.shuffle(rng);
            let mut sampled: Vec<usize> = all.into_iter().take(mtry).collect();
            sampled.sort_unstable();
            sampled
                .into_iter()
                .filter_map(|f| by_feature.remove(&f).map(|vals| (f, vals)))
                .collect()
        };

        let best = exec::min_by_key(self.mode, candidates.len(), |c| {
            let (feature, values) = &candidates[c];
            match self.best_threshold(values, &total) {
                Some((threshold, child_score)) => (child_score, *feature, threshold),
                None => (f64::INFINITY, *feature, 0.0),
            }
        });

        let (feature, threshold) = match best {
            Some((_, (child_score, feature, threshold)))
                if self.task.node_score(&total) - child_score > MIN_GAIN =>
            {
                (feature, threshold)
            }
            _ => return TreeNode::Leaf { value: self.task.leaf_value(&total) },
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            indices.into_iter().partition(|&i| self.rows[i].get(feature) <= threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            let total = self.node_agg(&[left_idx, right_idx].concat());
            return TreeNode::Leaf { value: self.task.leaf_value(&total) };
        }
        let left = self.grow_node(left_idx, depth + 1, mtry, rng);
        let right = self.grow_node(right_idx, depth + 1, mtry, rng);
        TreeNode::Split { feature, threshold, left: Box::new(left), right: Box::new(right) }
    }

    /// Best midpoint threshold for one feature; returns (threshold,
    /// child_score). `values` holds the node's explicit entries; the rest of
    /// the node sits in an implicit zero group.
    fn best_threshold(&self, values: &[(f64, usize)], total: &Agg) -> Option<(f64, f64)> {
        let mut sorted: Vec<(f64, usize)> = values.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Collapse runs of equal values into groups, splicing the implicit
        // zero group into its sorted position.
        let mut explicit = Agg::default();
        let mut groups: Vec<(f64, Agg)> = Vec::new();
        for &(v, i) in &sorted {
            explicit.add(1.0, self.stat_a[i], self.stat_b[i]);
            match groups.last_mut() {
                Some((gv, agg)) if *gv == v => agg.add(1.0, self.stat_a[i], self.stat_b[i]),
                _ => {
                    let mut agg = Agg::default();
                    agg.add(1.0, self.stat_a[i], self.stat_b[i]);
                    groups.push((v, agg));
                }
            }
        }
        let zero = total.minus(&explicit);
        if zero.n > 0.0 {
            let pos = groups.partition_point(|&(v, _)| v < 0.0);
            groups.insert(pos, (0.0, zero));
        }
        if groups.len() < 2 {
            return None;
        }

        let min_leaf = self.min_leaf as f64;
        let mut left = Agg::default();
        let mut best: Option<(f64, f64)> = None;
        for pair in groups.windows(2) {
            left.add(pair[0].1.n, pair[0].1.a, pair[0].1.b);
            let right = total.minus(&left);
            if left.n < min_leaf || right.n < min_leaf {
                continue;
            }
            let threshold = (pair[0].0 + pair[1].0) / 2.0;
            if threshold >= pair[1].0 {
                // degenerate midpoint from adjacent floats
                continue;
            }
            let score = self.task.child_score(&left, &right);
            let candidate = (threshold, score);
            best = match best {
                Some((bt, bs)) if bs <= score => Some((bt, bs)),
                _ => Some(candidate),
            };
        }
        best
    }
}
