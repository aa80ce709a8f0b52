//! Sparse vectors over a frozen vocabulary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted (index, weight) pairs over a fixed dimension. Absent indices are
/// exactly 0.0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    /// Build from (index, weight) pairs. Pairs are sorted, duplicate indices
    /// summed, and exact zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            if i >= dim {
                return Err(Error::DimensionMismatch { expected: dim, found: i + 1 });
            }
            if !w.is_finite() {
                return Err(Error::InvalidParam(format!("non-finite weight at index {i}")));
            }
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => entries.push((i, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        Ok(SparseVector { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weight at `index`, 0.0 when absent.
    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        debug_assert!(dense.len() >= self.dim);
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    /// Scale to unit L2 norm; the zero vector stays zero.
    pub fn l2_normalized(&self) -> SparseVector {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return self.clone();
        }
        SparseVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, w)| (i, w / norm)).collect(),
        }
    }

    /// Concatenate `other` after `self`, offsetting its indices by `self.dim`.
    pub fn concat(&self, other: &SparseVector) -> SparseVector {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(i, w)| (i + self.dim, w)));
        SparseVector { dim: self.dim + other.dim, entries }
    }

    /// Densify; test and small-scale use only.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }
}
