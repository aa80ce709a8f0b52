//! End-to-end wiring: cohort assembly, split-aware featurization and the
//! evaluation runs behind the `evaluate` and `cv` commands. Vocabularies and
//! idf weights are always fitted on the training side only and applied frozen
//! to the held-out side.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concepts::{self, ConceptLexicon};
use crate::error::{Error, Result};
use crate::eval::{
    self, default_grid, evaluate_cells, CohortSummary, EvalDataset, EvalReport, FeatureBundle,
    GridCell, ModelsConfig, SplitPlan, StayRef,
};
use crate::exec::{self, ExecMode};
use crate::features::{FeatureMatrix, FeatureSetKind};
use crate::ingest::{self, CohortConfig, ExclusionTally, IcuStayRecord, RejectedRow};
use crate::neural::CnnDataset;
use crate::sparse::SparseVector;
use crate::synth::SynthConfig;
use crate::textprep::{self, Vocabulary};
use crate::trees::derive_seed;

/// One config file drives every subcommand; sections default independently.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Train share of the patient-level split.
    pub split_ratio: f64,
    pub k_folds: usize,
    /// Document-frequency cutoff for the word vocabulary. The shipped default
    /// suits full-scale note corpora; synthetic desk corpora want 2-5.
    pub min_df: usize,
    pub cui_min_df: usize,
    /// Semantic types kept for the CUI embedding channel; empty keeps all.
    pub semantic_allowlist: Vec<String>,
    /// Add the CNN rows to the evaluation grid.
    pub include_cnn_cells: bool,
    /// Override the built-in stopword list.
    pub stopwords_path: Option<String>,
    /// Override the built-in kidney-term exclusion list.
    pub exclusion_terms_path: Option<String>,
    pub cohort: CohortConfig,
    pub synth: SynthConfig,
    pub models: ModelsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            split_ratio: 0.7,
            k_folds: 5,
            min_df: 100,
            cui_min_df: 1,
            semantic_allowlist: Vec::new(),
            include_cnn_cells: false,
            stopwords_path: None,
            exclusion_terms_path: None,
            cohort: CohortConfig::default(),
            synth: SynthConfig::default(),
            models: ModelsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn stopwords(&self) -> Result<HashSet<String>> {
        let text = match &self.stopwords_path {
            Some(path) => std::fs::read_to_string(path)?,
            None => textprep::DEFAULT_STOPWORDS.to_string(),
        };
        Ok(textprep::parse_term_list(&text).into_iter().collect())
    }

    pub fn exclusion_terms(&self) -> Result<Vec<String>> {
        let text = match &self.exclusion_terms_path {
            Some(path) => std::fs::read_to_string(path)?,
            None => ingest::DEFAULT_EXCLUSION_TERMS.to_string(),
        };
        Ok(textprep::parse_term_list(&text))
    }
}

/// Parse the three tables from `data_dir` and assemble the labeled cohort.
pub fn cohort_from_dir(
    data_dir: &Path,
    config: &RunConfig,
) -> Result<(Vec<IcuStayRecord>, ExclusionTally, Vec<RejectedRow>)> {
    let parsed = ingest::parse_tables(
        &data_dir.join("stays.csv"),
        &data_dir.join("notes.csv"),
        &data_dir.join("labs.csv"),
    )?;
    let exclusion_terms = config.exclusion_terms()?;
    let (records, tally) = ingest::build_cohort(
        &parsed.stays,
        &parsed.notes,
        &parsed.labs,
        &exclusion_terms,
        &config.cohort,
    )?;
    Ok((records, tally, parsed.rejects))
}

pub fn stay_refs(records: &[IcuStayRecord]) -> Vec<StayRef> {
    records
        .iter()
        .map(|r| StayRef {
            stay_id: r.meta.stay_id.clone(),
            patient_id: r.meta.patient_id.clone(),
            label: r.is_positive() as u8,
        })
        .collect()
}

/// Frozen vocabularies plus per-stay stemmed tokens and CUI sequences;
/// everything downstream featurization needs.
pub struct Featurized {
    pub word_vocab: Vocabulary,
    pub cui_vocab: Vocabulary,
    pub dataset: EvalDataset,
}

fn build_bundle(
    records: &[&IcuStayRecord],
    stemmed: &[Vec<String>],
    cui_sequences: &[Vec<String>],
    word_vocab: &Vocabulary,
    cui_vocab: &Vocabulary,
    max_seq_len: usize,
    mode: ExecMode,
) -> Result<FeatureBundle> {
    let row_ids: Vec<String> = records.iter().map(|r| r.meta.stay_id.clone()).collect();
    let labels: Vec<u8> = records.iter().map(|r| r.is_positive() as u8).collect();

    let word_vecs: Vec<SparseVector> =
        exec::map_slice(mode, stemmed, |doc| textprep::tfidf_vectorize(doc, word_vocab));
    let cui_vecs: Vec<SparseVector> =
        exec::map_slice(mode, cui_sequences, |seq| textprep::tfidf_vectorize(seq, cui_vocab));

    let words = FeatureMatrix::new(
        FeatureSetKind::Words,
        word_vocab.len(),
        row_ids.clone(),
        labels.clone(),
        word_vecs.clone(),
    )?;
    let cuis = FeatureMatrix::new(
        FeatureSetKind::Cuis,
        cui_vocab.len(),
        row_ids.clone(),
        labels.clone(),
        cui_vecs.clone(),
    )?;
    let hybrid = FeatureMatrix::assemble_rows(
        mode,
        FeatureSetKind::WordsPlusCuis,
        row_ids,
        labels.clone(),
        &word_vecs,
        &cui_vecs,
        word_vocab.len(),
        cui_vocab.len(),
    )?;

    // id 0 is the pad; vocabulary index i maps to id i+1
    let word_ids: Vec<Vec<usize>> = exec::map_slice(mode, stemmed, |doc| {
        doc.iter().filter_map(|t| word_vocab.index_of(t).map(|i| i + 1)).take(max_seq_len).collect()
    });
    let cui_ids: Vec<Vec<usize>> = exec::map_slice(mode, cui_sequences, |seq| {
        seq.iter().filter_map(|c| cui_vocab.index_of(c).map(|i| i + 1)).take(max_seq_len).collect()
    });

    Ok(FeatureBundle {
        words,
        cuis,
        hybrid,
        sequences: CnnDataset { word_ids, cui_ids, labels },
    })
}

/// Featurize a cohort under a split plan: stem, extract concepts, fit both
/// vocabularies on the training side, vectorize both sides frozen.
pub fn featurize_split(
    records: &[IcuStayRecord],
    lexicon: &ConceptLexicon,
    config: &RunConfig,
    plan: &SplitPlan,
    mode: ExecMode,
) -> Result<Featurized> {
    let by_id: HashMap<&str, &IcuStayRecord> =
        records.iter().map(|r| (r.meta.stay_id.as_str(), r)).collect();
    let pick = |ids: &[String]| -> Result<Vec<&IcuStayRecord>> {
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidParam(format!("unknown stay in split: {id}")))
            })
            .collect()
    };
    let train_records = pick(&plan.train)?;
    let test_records = pick(&plan.test)?;

    type StemmedAndCuis = (Vec<Vec<String>>, Vec<Vec<String>>);
    let allowlist: HashSet<String> = config.semantic_allowlist.iter().cloned().collect();
    let stem_and_scan = |records: &[&IcuStayRecord]| -> Result<StemmedAndCuis> {
        let stemmed: Vec<Vec<String>> =
            exec::map_slice(mode, records, |r| textprep::stemmed_tokens(&r.day1_text));
        let sequences: Result<Vec<Vec<String>>> = exec::map_slice(mode, &stemmed, |tokens| {
            let seq = concepts::extract_cui_sequence(tokens, lexicon);
            concepts::filter_sequence_semantic_types(&seq, lexicon, &allowlist)
        })
        .into_iter()
        .collect();
        Ok((stemmed, sequences?))
    };
    let (train_stemmed, train_cuis) = stem_and_scan(&train_records)?;
    let (test_stemmed, test_cuis) = stem_and_scan(&test_records)?;

    let stopwords = config.stopwords()?;
    let word_vocab = Vocabulary::build(&train_stemmed, &stopwords, config.min_df)?;
    let cui_vocab = Vocabulary::build(&train_cuis, &HashSet::new(), config.cui_min_df)?;

    let max_seq_len = config.models.cnn.max_seq_len;
    let train = build_bundle(
        &train_records,
        &train_stemmed,
        &train_cuis,
        &word_vocab,
        &cui_vocab,
        max_seq_len,
        mode,
    )?;
    let test = build_bundle(
        &test_records,
        &test_stemmed,
        &test_cuis,
        &word_vocab,
        &cui_vocab,
        max_seq_len,
        mode,
    )?;

    let word_terms: Vec<String> = (0..word_vocab.len()).map(|i| word_vocab.term(i).to_string()).collect();
    let cui_terms: Vec<String> = (0..cui_vocab.len()).map(|i| cui_vocab.term(i).to_string()).collect();
    Ok(Featurized {
        word_vocab,
        cui_vocab,
        dataset: EvalDataset { word_terms, cui_terms, train, test },
    })
}

fn summary_of(dataset: &EvalDataset) -> CohortSummary {
    CohortSummary {
        n_train: dataset.train.n_rows(),
        n_test: dataset.test.n_rows(),
        train_positives: dataset.train.labels().iter().filter(|&&l| l == 1).count(),
        test_positives: dataset.test.labels().iter().filter(|&&l| l == 1).count(),
    }
}

fn config_echo(config: &RunConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

/// Held-out evaluation: patient split, featurize, run the grid.
pub fn run_holdout(
    records: &[IcuStayRecord],
    lexicon: &ConceptLexicon,
    config: &RunConfig,
    cells: &[GridCell],
    mode: ExecMode,
) -> Result<(EvalReport, SplitPlan)> {
    let plan = eval::patient_split(&stay_refs(records), config.split_ratio, config.seed)?;
    let featurized = featurize_split(records, lexicon, config, &plan, mode)?;
    let outcomes = evaluate_cells(&featurized.dataset, cells, &config.models, config.seed, mode);
    let report = EvalReport::from_outcomes(
        &outcomes,
        summary_of(&featurized.dataset),
        config.seed,
        config_echo(config),
    );
    Ok((report, plan))
}

/// K-fold cross-validation on the training side of the patient split, with
/// per-fold refitted vocabularies and fold-derived sampling seeds.
pub fn run_cv(
    records: &[IcuStayRecord],
    lexicon: &ConceptLexicon,
    config: &RunConfig,
    cells: &[GridCell],
    mode: ExecMode,
) -> Result<EvalReport> {
    let refs = stay_refs(records);
    let plan = eval::patient_split(&refs, config.split_ratio, config.seed)?;
    let train_ids: HashSet<&String> = plan.train.iter().collect();
    let train_refs: Vec<StayRef> =
        refs.iter().filter(|r| train_ids.contains(&r.stay_id)).cloned().collect();
    let folds = eval::kfold(&train_refs, config.k_folds, config.seed)?;

    let mut fold_outcomes = Vec::with_capacity(folds.len());
    let mut n_train = 0;
    let mut train_positives = 0;
    let mut n_test = 0;
    let mut test_positives = 0;
    for (i, fold) in folds.iter().enumerate() {
        let fold_plan = SplitPlan {
            seed: config.seed,
            ratio: 1.0 - 1.0 / folds.len() as f64,
            train: folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, f)| f.iter().cloned())
                .collect(),
            test: fold.clone(),
        };
        let featurized = featurize_split(records, lexicon, config, &fold_plan, mode)?;
        let fold_seed = derive_seed(config.seed, i as u64);
        let outcomes = evaluate_cells(&featurized.dataset, cells, &config.models, fold_seed, mode);
        let summary = summary_of(&featurized.dataset);
        n_train += summary.n_train;
        train_positives += summary.train_positives;
        n_test += summary.n_test;
        test_positives += summary.test_positives;
        fold_outcomes.push(outcomes);
    }

    Ok(EvalReport::from_fold_outcomes(
        &fold_outcomes,
        cells,
        CohortSummary { n_train, n_test, train_positives, test_positives },
        config.seed,
        config_echo(config),
    ))
}

/// The default grid for this config.
pub fn grid_for(config: &RunConfig) -> Vec<GridCell> {
    default_grid(config.include_cnn_cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn desk_config(seed: u64) -> RunConfig {
        let mut config = RunConfig {
            seed,
            min_df: 2,
            ..RunConfig::default()
        };
        config.synth.n_patients = 80;
        config.synth.prevalence = 0.3;
        config.synth.vocab_size = 60;
        config.synth.note_tokens_min = 15;
        config.synth.note_tokens_max = 40;
        config.synth.seed = seed;
        config.models.forest.n_trees = 20;
        config.models.forest.max_depth = 6;
        config.models.gbdt.n_rounds = 15;
        config
    }

    fn generate_cohort(config: &RunConfig) -> (Vec<IcuStayRecord>, ConceptLexicon) {
        let corpus = synth::generate(&config.synth).unwrap();
        let dir = tempfile::tempdir().unwrap();
        corpus.write_to(dir.path()).unwrap();
        let (records, _, rejects) = cohort_from_dir(dir.path(), config).unwrap();
        assert!(rejects.is_empty());
        let lexicon = ConceptLexicon::load(&dir.path().join("lexicon.tsv")).unwrap();
        (records, lexicon)
    }

    #[test]
    fn featurize_freezes_vocab_on_train_side() {
        let config = desk_config(21);
        let (records, lexicon) = generate_cohort(&config);
        let plan = eval::patient_split(&stay_refs(&records), 0.7, config.seed).unwrap();
        let featurized = featurize_split(&records, &lexicon, &config, &plan, ExecMode::default()).unwrap();

        assert_eq!(featurized.word_vocab.n_docs(), plan.train.len());
        assert_eq!(featurized.dataset.train.n_rows(), plan.train.len());
        assert_eq!(featurized.dataset.test.n_rows(), plan.test.len());
        let dim = featurized.word_vocab.len();
        assert!(dim > 0);
        assert_eq!(featurized.dataset.test.words.dimension, dim);
        assert_eq!(
            featurized.dataset.train.hybrid.dimension,
            dim + featurized.cui_vocab.len()
        );
    }

    #[test]
    fn holdout_run_produces_full_report() {
        let config = desk_config(22);
        let (records, lexicon) = generate_cohort(&config);
        let cells = vec![
            GridCell {
                feature: eval::GridFeature::Words,
                algorithm: eval::GridAlgorithm::LogRegL2,
                sampling: None,
            },
            GridCell {
                feature: eval::GridFeature::Cuis,
                algorithm: eval::GridAlgorithm::NaiveBayes,
                sampling: None,
            },
        ];
        let (report, plan) = run_holdout(&records, &lexicon, &config, &cells, ExecMode::default()).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            let auc = row.auc.unwrap().mean;
            assert!((0.0..=1.0).contains(&auc));
        }
        assert_eq!(report.cohort.n_train, plan.train.len());
        assert!(!report.top_features.is_empty());
    }

    #[test]
    fn cv_run_reports_fold_dispersion() {
        let mut config = desk_config(23);
        config.k_folds = 3;
        let (records, lexicon) = generate_cohort(&config);
        let cells = vec![GridCell {
            feature: eval::GridFeature::Words,
            algorithm: eval::GridAlgorithm::NaiveBayes,
            sampling: Some(1.0),
        }];
        let report = run_cv(&records, &lexicon, &config, &cells, ExecMode::default()).unwrap();
        assert_eq!(report.mode, "cv_mean");
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].auc.unwrap().sd.is_some());
    }
}
