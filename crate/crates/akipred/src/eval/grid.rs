//! The evaluation grid: one cell per (feature set, algorithm, sampling)
//! combination, each fit on the (optionally undersampled) training side and
//! scored on the held-out side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::features::FeatureMatrix;
use crate::linear::{self, Loss, Penalty, TrainOptions};
use crate::neural::{train_cnn, CnnConfig, CnnDataset, CnnModel};
use crate::trees::{self, ForestParams, GbdtParams};

use super::metrics::{prf, roc_auc};
use super::split::undersample_indices;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFeature {
    Words,
    Cuis,
    WordsPlusCuis,
    WordEmbeddings,
    WordCuiEmbeddings,
}

impl GridFeature {
    pub fn label(&self) -> &'static str {
        match self {
            GridFeature::Words => "Bag of words",
            GridFeature::Cuis => "Bag of CUIs",
            GridFeature::WordsPlusCuis => "Bag of words+CUIs",
            GridFeature::WordEmbeddings => "Word embeddings",
            GridFeature::WordCuiEmbeddings => "Word embeddings + semantic CUIs",
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, GridFeature::Words | GridFeature::Cuis | GridFeature::WordsPlusCuis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAlgorithm {
    NaiveBayes,
    SvmL2,
    SvmL1,
    LogRegL2,
    LogRegL1,
    RandomForest,
    Gbdt,
    Cnn,
}

impl GridAlgorithm {
    pub fn label(&self) -> &'static str {
        match self {
            GridAlgorithm::NaiveBayes => "NB",
            GridAlgorithm::SvmL2 => "L2- SVM",
            GridAlgorithm::SvmL1 => "L1- SVM",
            GridAlgorithm::LogRegL2 => "L2- LR",
            GridAlgorithm::LogRegL1 => "L1- LR",
            GridAlgorithm::RandomForest => "RF",
            GridAlgorithm::Gbdt => "GBDT",
            GridAlgorithm::Cnn => "CNN",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            GridAlgorithm::SvmL2 | GridAlgorithm::SvmL1 | GridAlgorithm::LogRegL2 | GridAlgorithm::LogRegL1
        )
    }
}

/// One grid cell; `sampling` is negatives-per-positive for random
/// under-sampling (`None` keeps the natural class balance).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub feature: GridFeature,
    pub algorithm: GridAlgorithm,
    pub sampling: Option<f64>,
}

impl GridCell {
    pub fn sampling_label(&self) -> String {
        match self.sampling {
            None => "N/A".to_string(),
            Some(r) if r.fract() == 0.0 => format!("1:{} RUS", r as i64),
            Some(r) => format!("1:{r} RUS"),
        }
    }

    fn validate(&self) -> Result<()> {
        let cnn = self.algorithm == GridAlgorithm::Cnn;
        if cnn == self.feature.is_sparse() {
            return Err(Error::InvalidParam(format!(
                "algorithm {:?} cannot run on feature set {:?}",
                self.algorithm, self.feature
            )));
        }
        Ok(())
    }
}

/// The standard row inventory: five sparse classifiers per bag feature
/// set, tree ensembles with and without 1:1 RUS, and (optionally) CNN rows
/// over embedding features at 1:1, 1:2 and 1:3 RUS.
pub fn default_grid(include_cnn: bool) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for feature in [GridFeature::Words, GridFeature::Cuis, GridFeature::WordsPlusCuis] {
        for algorithm in [
            GridAlgorithm::NaiveBayes,
            GridAlgorithm::SvmL2,
            GridAlgorithm::SvmL1,
            GridAlgorithm::LogRegL2,
            GridAlgorithm::LogRegL1,
        ] {
            cells.push(GridCell { feature, algorithm, sampling: None });
        }
        for algorithm in [GridAlgorithm::RandomForest, GridAlgorithm::Gbdt] {
            cells.push(GridCell { feature, algorithm, sampling: None });
            cells.push(GridCell { feature, algorithm, sampling: Some(1.0) });
        }
    }
    if include_cnn {
        for feature in [GridFeature::WordEmbeddings, GridFeature::WordCuiEmbeddings] {
            for sampling in [None, Some(1.0), Some(2.0), Some(3.0)] {
                cells.push(GridCell { feature, algorithm: GridAlgorithm::Cnn, sampling });
            }
        }
    }
    cells
}

/// Model hyperparameters shared across grid cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelsConfig {
    pub nb_alpha: f64,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub linear_opts: TrainOptions,
    pub forest: ForestParams,
    pub gbdt: GbdtParams,
    pub cnn: CnnConfig,
    /// Classification threshold for precision/recall/F1.
    pub threshold: f64,
    /// Length of emitted ranked-feature lists.
    pub top_k_features: usize,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            nb_alpha: 1.0,
            lambda_l1: 1e-4,
            lambda_l2: 1e-4,
            linear_opts: TrainOptions::default(),
            forest: ForestParams::default(),
            gbdt: GbdtParams::default(),
            cnn: CnnConfig::default(),
            threshold: 0.5,
            top_k_features: 30,
        }
    }
}

/// One side (train or test) of the featurized cohort. Row order is identical
/// across the three matrices and the sequence dataset.
#[derive(Clone, Debug)]
pub struct FeatureBundle {
    pub words: FeatureMatrix,
    pub cuis: FeatureMatrix,
    pub hybrid: FeatureMatrix,
    pub sequences: CnnDataset,
}

impl FeatureBundle {
    pub fn labels(&self) -> &[u8] {
        &self.words.labels
    }

    pub fn n_rows(&self) -> usize {
        self.words.n_rows()
    }

    fn matrix(&self, feature: GridFeature) -> &FeatureMatrix {
        match feature {
            GridFeature::Words => &self.words,
            GridFeature::Cuis => &self.cuis,
            GridFeature::WordsPlusCuis => &self.hybrid,
            _ => unreachable!("embedding features have no sparse matrix"),
        }
    }

    fn sequence_subset(&self, indices: &[usize]) -> CnnDataset {
        CnnDataset {
            word_ids: indices.iter().map(|&i| self.sequences.word_ids[i].clone()).collect(),
            cui_ids: indices.iter().map(|&i| self.sequences.cui_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.sequences.labels[i]).collect(),
        }
    }
}

/// Featurized train/test cohort plus the column names of the two frozen
/// vocabularies (words, then CUIs).
#[derive(Clone, Debug)]
pub struct EvalDataset {
    pub word_terms: Vec<String>,
    pub cui_terms: Vec<String>,
    pub train: FeatureBundle,
    pub test: FeatureBundle,
}

impl EvalDataset {
    fn feature_name(&self, feature: GridFeature, index: usize) -> String {
        match feature {
            GridFeature::Words => self.word_terms[index].clone(),
            GridFeature::Cuis => self.cui_terms[index].clone(),
            GridFeature::WordsPlusCuis => {
                if index < self.word_terms.len() {
                    self.word_terms[index].clone()
                } else {
                    self.cui_terms[index - self.word_terms.len()].clone()
                }
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: GridCell,
    pub metrics: Option<CellMetrics>,
    pub error: Option<String>,
    /// Ranked positive coefficients for linear models trained without RUS.
    pub top_features: Option<Vec<(String, f64)>>,
}

/// Evaluate every cell. Cells run independently (in parallel under the
/// `parallel` mode) but outcomes keep grid order; a failing cell records its
/// error and the run continues.
pub fn evaluate_cells(
    dataset: &EvalDataset,
    cells: &[GridCell],
    cfg: &ModelsConfig,
    seed: u64,
    mode: ExecMode,
) -> Vec<CellOutcome> {
    exec::map_range(mode, cells.len(), |index| {
        let cell = cells[index];
        let cell_seed = trees::derive_seed(seed, index as u64);
        match evaluate_one(dataset, &cell, cfg, cell_seed, mode) {
            Ok((metrics, top_features)) => {
                CellOutcome { cell, metrics: Some(metrics), error: None, top_features }
            }
            Err(e) => CellOutcome { cell, metrics: None, error: Some(e.to_string()), top_features: None },
        }
    })
}

type CellResult = (CellMetrics, Option<Vec<(String, f64)>>);

fn evaluate_one(
    dataset: &EvalDataset,
    cell: &GridCell,
    cfg: &ModelsConfig,
    cell_seed: u64,
    mode: ExecMode,
) -> Result<CellResult> {
    cell.validate()?;
    let train_labels = dataset.train.labels();
    let keep: Vec<usize> = match cell.sampling {
        Some(ratio) => undersample_indices(train_labels, ratio, cell_seed)?,
        None => (0..train_labels.len()).collect(),
    };

    let test_labels = dataset.test.labels().to_vec();
    let (scores, top_features) = if cell.feature.is_sparse() {
        let train = dataset.train.matrix(cell.feature).select(&keep);
        let test = dataset.test.matrix(cell.feature);
        score_sparse(cell, cfg, &train, test, cell_seed, mode, dataset)?
    } else {
        let train = dataset.train.sequence_subset(&keep);
        (score_cnn(cell, cfg, dataset, &train, cell_seed, mode)?, None)
    };

    let auc = roc_auc(&scores, &test_labels)?;
    let p = prf(&scores, &test_labels, cfg.threshold)?;
    Ok((
        CellMetrics { auc, precision: p.precision, recall: p.recall, f1: p.f1 },
        top_features,
    ))
}

type ScoredCell = (Vec<f64>, Option<Vec<(String, f64)>>);

fn score_sparse(
    cell: &GridCell,
    cfg: &ModelsConfig,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    cell_seed: u64,
    mode: ExecMode,
    dataset: &EvalDataset,
) -> Result<ScoredCell> {
    fn scores_of<F>(mode: ExecMode, test: &FeatureMatrix, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&crate::sparse::SparseVector) -> Result<f64> + Sync + Send,
    {
        exec::map_slice(mode, &test.rows, f).into_iter().collect()
    }
    match cell.algorithm {
        GridAlgorithm::NaiveBayes => {
            let model = linear::train_nb(train, cfg.nb_alpha)?;
            Ok((scores_of(mode, test, |x| model.predict_proba(x))?, None))
        }
        GridAlgorithm::SvmL2 | GridAlgorithm::SvmL1 | GridAlgorithm::LogRegL2 | GridAlgorithm::LogRegL1 => {
            let (loss, penalty, lambda) = match cell.algorithm {
                GridAlgorithm::SvmL2 => (Loss::Hinge, Penalty::L2, cfg.lambda_l2),
                GridAlgorithm::SvmL1 => (Loss::Hinge, Penalty::L1, cfg.lambda_l1),
                GridAlgorithm::LogRegL2 => (Loss::Logistic, Penalty::L2, cfg.lambda_l2),
                _ => (Loss::Logistic, Penalty::L1, cfg.lambda_l1),
            };
            let opts = TrainOptions { seed: cell_seed, ..cfg.linear_opts };
            let model = linear::train_linear(train, loss, penalty, lambda, &opts)?;
            let top = if cell.sampling.is_none() {
                Some(linear::top_features(
                    &model.weights,
                    |i| dataset.feature_name(cell.feature, i),
                    cfg.top_k_features,
                ))
            } else {
                None
            };
            Ok((scores_of(mode, test, |x| model.predict_proba(x))?, top))
        }
        GridAlgorithm::RandomForest => {
            let params = ForestParams { seed: cell_seed, ..cfg.forest };
            let model = trees::train_random_forest(train, &params, mode)?;
            Ok((scores_of(mode, test, |x| model.predict_proba(x))?, None))
        }
        GridAlgorithm::Gbdt => {
            let params = GbdtParams { seed: cell_seed, ..cfg.gbdt };
            let fit = trees::train_gbdt(train, &params, mode)?;
            Ok((scores_of(mode, test, |x| fit.model.predict_proba(x))?, None))
        }
        GridAlgorithm::Cnn => unreachable!("validated sparse"),
    }
}

fn score_cnn(
    cell: &GridCell,
    cfg: &ModelsConfig,
    dataset: &EvalDataset,
    train: &CnnDataset,
    cell_seed: u64,
    mode: ExecMode,
) -> Result<Vec<f64>> {
    let test = &dataset.test.sequences;
    let config = CnnConfig {
        // id 0 is the pad, so vocabularies shift up by one
        word_vocab_size: dataset.word_terms.len() + 1,
        cui_vocab_size: dataset.cui_terms.len() + 1,
        use_cui_channel: cell.feature == GridFeature::WordCuiEmbeddings,
        seed: cell_seed,
        ..cfg.cnn.clone()
    };
    let mut model = CnnModel::new(config)?;
    train_cnn(&mut model, train)?;
    exec::map_range(mode, test.len(), |i| model.forward(&test.word_ids[i], &test.cui_ids[i]))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_mirrors_table_inventory() {
        let sparse = default_grid(false);
        assert_eq!(sparse.len(), 27); // 3 features x (5 linear + RF x2 + GBDT x2)
        let full = default_grid(true);
        assert_eq!(full.len(), 35); // + 2 embedding features x 4 samplings

        assert!(sparse.iter().all(|c| c.validate().is_ok()));
        assert!(full.iter().all(|c| c.validate().is_ok()));
    }

    #[test]
    fn cell_validation_rejects_mismatched_pairs() {
        let bad = GridCell {
            feature: GridFeature::Words,
            algorithm: GridAlgorithm::Cnn,
            sampling: None,
        };
        assert!(bad.validate().is_err());
        let bad = GridCell {
            feature: GridFeature::WordEmbeddings,
            algorithm: GridAlgorithm::NaiveBayes,
            sampling: None,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn failing_cell_is_recorded_and_run_continues() {
        use crate::sparse::SparseVector;

        let dim = 2;
        let rows = |values: &[(f64, u8)]| -> (Vec<SparseVector>, Vec<u8>, Vec<String>) {
            let rows = values
                .iter()
                .map(|&(x, _)| SparseVector::from_pairs(dim, vec![(0, x)]).unwrap())
                .collect();
            let labels = values.iter().map(|&(_, l)| l).collect();
            let ids = (0..values.len()).map(|i| format!("s{i}")).collect();
            (rows, labels, ids)
        };
        let bundle = |values: &[(f64, u8)]| -> FeatureBundle {
            let (rows, labels, ids) = rows(values);
            let words = FeatureMatrix::new(
                crate::features::FeatureSetKind::Words,
                dim,
                ids.clone(),
                labels.clone(),
                rows,
            )
            .unwrap();
            let cuis = FeatureMatrix::new(
                crate::features::FeatureSetKind::Cuis,
                0,
                ids.clone(),
                labels.clone(),
                vec![SparseVector::zeros(0); values.len()],
            )
            .unwrap();
            let hybrid = words.clone();
            let sequences = CnnDataset {
                word_ids: vec![vec![1]; values.len()],
                cui_ids: vec![vec![]; values.len()],
                labels,
            };
            FeatureBundle { words, cuis, hybrid, sequences }
        };
        let dataset = EvalDataset {
            word_terms: vec!["aa".into(), "bb".into()],
            cui_terms: vec![],
            train: bundle(&[(0.1, 0), (0.2, 0), (0.8, 1), (0.9, 1)]),
            test: bundle(&[(0.15, 0), (0.85, 1)]),
        };
        let cells = [
            // invalid sampling ratio: this cell must fail
            GridCell {
                feature: GridFeature::Words,
                algorithm: GridAlgorithm::NaiveBayes,
                sampling: Some(-1.0),
            },
            GridCell {
                feature: GridFeature::Words,
                algorithm: GridAlgorithm::NaiveBayes,
                sampling: None,
            },
        ];
        let outcomes =
            evaluate_cells(&dataset, &cells, &ModelsConfig::default(), 0, ExecMode::Sequential);
        assert!(outcomes[0].metrics.is_none());
        assert!(outcomes[0].error.as_deref().unwrap_or("").contains("neg_per_pos"));
        assert!(outcomes[1].error.is_none());
        assert!(outcomes[1].metrics.is_some());
    }

    #[test]
    fn sampling_labels_match_table_style() {
        let mk = |sampling| GridCell {
            feature: GridFeature::Words,
            algorithm: GridAlgorithm::Gbdt,
            sampling,
        };
        assert_eq!(mk(None).sampling_label(), "N/A");
        assert_eq!(mk(Some(1.0)).sampling_label(), "1:1 RUS");
        assert_eq!(mk(Some(3.0)).sampling_label(), "1:3 RUS");
    }
}
