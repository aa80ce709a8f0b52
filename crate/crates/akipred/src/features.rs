//! Per-stay feature assembly: word vectors, CUI vectors, or their
//! concatenation, stacked into a label-aligned matrix.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::sparse::SparseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSetKind {
    Words,
    Cuis,
    WordsPlusCuis,
}

impl FeatureSetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSetKind::Words => "words",
            FeatureSetKind::Cuis => "cuis",
            FeatureSetKind::WordsPlusCuis => "words_plus_cuis",
        }
    }
}

impl fmt::Display for FeatureSetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Combine a stay's word and CUI vectors into the requested feature set.
///
/// The hybrid concatenates the CUI coordinates after the word coordinates
/// (indices offset by the word dimension) and renormalizes to unit L2.
pub fn assemble(
    word_vec: &SparseVector,
    cui_vec: &SparseVector,
    kind: FeatureSetKind,
    word_dim: usize,
    cui_dim: usize,
) -> Result<SparseVector> {
    if word_vec.dim() != word_dim {
        return Err(Error::DimensionMismatch { expected: word_dim, found: word_vec.dim() });
    }
    if cui_vec.dim() != cui_dim {
        return Err(Error::DimensionMismatch { expected: cui_dim, found: cui_vec.dim() });
    }
    Ok(match kind {
        FeatureSetKind::Words => word_vec.clone(),
        FeatureSetKind::Cuis => cui_vec.clone(),
        FeatureSetKind::WordsPlusCuis => word_vec.concat(cui_vec).l2_normalized(),
    })
}

/// Rows, ids and labels for one feature set; all rows share one dimension and
/// row order is the cohort order (sorted stay id).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_set: FeatureSetKind,
    pub dimension: usize,
    pub row_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub rows: Vec<SparseVector>,
}

impl FeatureMatrix {
    pub fn new(
        feature_set: FeatureSetKind,
        dimension: usize,
        row_ids: Vec<String>,
        labels: Vec<u8>,
        rows: Vec<SparseVector>,
    ) -> Result<FeatureMatrix> {
        if row_ids.len() != labels.len() || row_ids.len() != rows.len() {
            return Err(Error::InvalidParam("rows, row_ids and labels must have equal length".into()));
        }
        for row in &rows {
            if row.dim() != dimension {
                return Err(Error::DimensionMismatch { expected: dimension, found: row.dim() });
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidParam("labels must be 0 or 1".into()));
        }
        Ok(FeatureMatrix { feature_set, dimension, row_ids, labels, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.n_rows() - self.n_positive()
    }

    /// Matrix restricted to the given row indices, preserving index order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_set: self.feature_set,
            dimension: self.dimension,
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Assemble per-stay hybrid/selected vectors in parallel; row order
    /// follows the input order for any execution mode.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble_rows(
        mode: ExecMode,
        feature_set: FeatureSetKind,
        row_ids: Vec<String>,
        labels: Vec<u8>,
        word_vecs: &[SparseVector],
        cui_vecs: &[SparseVector],
        word_dim: usize,
        cui_dim: usize,
    ) -> Result<FeatureMatrix> {
        if word_vecs.len() != cui_vecs.len() {
            return Err(Error::InvalidParam("word and cui row counts differ".into()));
        }
        let rows: Result<Vec<SparseVector>> = exec::map_range(mode, word_vecs.len(), |i| {
            assemble(&word_vecs[i], &cui_vecs[i], feature_set, word_dim, cui_dim)
        })
        .into_iter()
        .collect();
        let dimension = match feature_set {
            FeatureSetKind::Words => word_dim,
            FeatureSetKind::Cuis => cui_dim,
            FeatureSetKind::WordsPlusCuis => word_dim + cui_dim,
        };
        FeatureMatrix::new(feature_set, dimension, row_ids, labels, rows?)
    }

    /// Plain-text sparse format: a header line
    /// `akipred-matrix 1 <feature_set> <dimension>` followed by one
    /// `row_id label idx:weight ...` line per row.
    pub fn to_text(&self) -> String {
        let mut out = format!("akipred-matrix 1 {} {}\n", self.feature_set.as_str(), self.dimension);
        for i in 0..self.n_rows() {
            out.push_str(&self.row_ids[i]);
            out.push(' ');
            out.push_str(&self.labels[i].to_string());
            for (idx, w) in self.rows[i].iter() {
                out.push_str(&format!(" {idx}:{w:.12e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<FeatureMatrix> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::EmptyCorpus)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "akipred-matrix" || fields[1] != "1" {
            return Err(Error::InvalidParam("bad matrix header".into()));
        }
        let feature_set = match fields[2] {
            "words" => FeatureSetKind::Words,
            "cuis" => FeatureSetKind::Cuis,
            "words_plus_cuis" => FeatureSetKind::WordsPlusCuis,
            other => return Err(Error::InvalidParam(format!("unknown feature set '{other}'"))),
        };
        let dimension: usize = fields[3]
            .parse()
            .map_err(|_| Error::InvalidParam("bad matrix dimension".into()))?;

        let mut row_ids = Vec::new();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id = fields.next().ok_or_else(|| Error::InvalidParam("bad matrix row".into()))?;
            let label: u8 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidParam(format!("bad label in row '{id}'")))?;
            let mut pairs = Vec::new();
            for pair in fields {
                let (idx, w) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidParam(format!("bad entry '{pair}'")))?;
                let idx: usize =
                    idx.parse().map_err(|_| Error::InvalidParam(format!("bad index '{idx}'")))?;
                let w: f64 =
                    w.parse().map_err(|_| Error::InvalidParam(format!("bad weight '{w}'")))?;
                pairs.push((idx, w));
            }
            row_ids.push(id.to_string());
            labels.push(label);
            rows.push(SparseVector::from_pairs(dimension, pairs)?);
        }
        FeatureMatrix::new(feature_set, dimension, row_ids, labels, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FeatureMatrix> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        FeatureMatrix::from_text(&std::fs::read_to_string(path)?)
    }
}
