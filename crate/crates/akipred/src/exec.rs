//! Execution backends for the data-parallel inner loops.
//!
//! Batch operations (per-document vectorization, per-stay labeling, per-tree
//! fitting, grid cells) are pure maps over independent items, so the parallel
//! and sequential backends produce identical results in identical order. The
//! `parallel` feature (on by default) pulls in rayon; without it every mode
//! degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which backend a batch operation runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Rayon work-stealing pool. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Map `f` over a slice, preserving input order in the output.
pub fn map_slice<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                items.par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.iter().map(f).collect()
            }
        }
    }
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_range<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

/// Reduce `0..n` through `f` keeping the item with the smallest key.
///
/// The key must be a total order; ties are broken toward the smaller index so
/// the result is independent of how the range is partitioned across threads.
pub fn min_by_key<K, F>(mode: ExecMode, n: usize, f: F) -> Option<(usize, K)>
where
    K: PartialOrd + Send,
    F: Fn(usize) -> K + Sync + Send,
{
    let pick = |a: (usize, K), b: (usize, K)| -> (usize, K) {
        if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    };
    match mode {
        ExecMode::Sequential => (0..n).map(|i| (i, f(i))).reduce(pick),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..n).into_par_iter().map(|i| (i, f(i))).reduce_with(pick)
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(|i| (i, f(i))).reduce(pick)
            }
        }
    }
}
