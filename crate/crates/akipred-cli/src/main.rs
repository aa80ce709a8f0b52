//! Command-line front end for the AKI-prediction pipeline.
//!
//! Exit codes: 0 success, 1 input error, 2 usage error, 3 internal error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use akipred::concepts::ConceptLexicon;
use akipred::eval::{self, GridAlgorithm, GridCell, GridFeature};
use akipred::features::FeatureMatrix;
use akipred::ingest;
use akipred::kdigo;
use akipred::linear::{self, Loss, Penalty, TrainOptions};
use akipred::model::{ModelFile, TrainedModel};
use akipred::neural::{self, CnnModel};
use akipred::pipeline::{self, RunConfig};
use akipred::synth;
use akipred::trees;
use akipred::{Error, ExecMode};

#[derive(Parser)]
#[command(
    name = "akipred",
    version,
    about = "AKI onset prediction from first-day ICU notes",
    after_help = "All subcommands read one JSON config file (--config; every section has \
                  defaults) and write their artifacts plus a manifest.json under --out. \
                  --seed overrides the config seed for both the run and the synthetic generator."
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    Words,
    Cuis,
    WordsPlusCuis,
    WordEmbeddings,
    WordCuiEmbeddings,
}

impl From<FeatureArg> for GridFeature {
    fn from(value: FeatureArg) -> Self {
        match value {
            FeatureArg::Words => GridFeature::Words,
            FeatureArg::Cuis => GridFeature::Cuis,
            FeatureArg::WordsPlusCuis => GridFeature::WordsPlusCuis,
            FeatureArg::WordEmbeddings => GridFeature::WordEmbeddings,
            FeatureArg::WordCuiEmbeddings => GridFeature::WordCuiEmbeddings,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Nb,
    SvmL2,
    SvmL1,
    LrL2,
    LrL1,
    Rf,
    Gbdt,
    Cnn,
}

impl From<AlgorithmArg> for GridAlgorithm {
    fn from(value: AlgorithmArg) -> Self {
        match value {
            AlgorithmArg::Nb => GridAlgorithm::NaiveBayes,
            AlgorithmArg::SvmL2 => GridAlgorithm::SvmL2,
            AlgorithmArg::SvmL1 => GridAlgorithm::SvmL1,
            AlgorithmArg::LrL2 => GridAlgorithm::LogRegL2,
            AlgorithmArg::LrL1 => GridAlgorithm::LogRegL1,
            AlgorithmArg::Rf => GridAlgorithm::RandomForest,
            AlgorithmArg::Gbdt => GridAlgorithm::Gbdt,
            AlgorithmArg::Cnn => GridAlgorithm::Cnn,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stays/notes/labs corpus with known ground truth
    Synth,
    /// Parse input tables, apply the cohort rules and write the labeled cohort
    Cohort {
        /// Directory holding stays.csv, notes.csv and labs.csv
        #[arg(long)]
        data: PathBuf,
    },
    /// Label creatinine series from labs.csv under the KDIGO criteria
    Label {
        #[arg(long)]
        labs: PathBuf,
    },
    /// Split patients, fit vocabularies on the training side, write matrices
    Featurize {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a single model and save it
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "words")]
        feature_set: FeatureArg,
        #[arg(long, value_enum, default_value = "lr-l2")]
        algorithm: AlgorithmArg,
        /// Negatives per positive for random under-sampling
        #[arg(long)]
        sampling: Option<f64>,
    },
    /// Score a saved feature matrix with a saved model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Run the full evaluation grid on a held-out patient split
    Evaluate {
        #[arg(long)]
        data: PathBuf,
    },
    /// Cross-validated grid on the training side of the split
    Cv {
        #[arg(long)]
        data: PathBuf,
    },
    /// Re-render a report.json as a text table
    Report {
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 on --help/--version
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("akipred: error: {e:#}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(error: &anyhow::Error) -> i32 {
    match error.downcast_ref::<Error>() {
        Some(
            Error::MissingInput(_)
            | Error::MissingColumn { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::InvalidParam(_)
            | Error::EmptyCorpus
            | Error::SingleClass
            | Error::TooFewPatients { .. },
        ) => 1,
        Some(_) => 3,
        None => {
            if error.downcast_ref::<std::io::Error>().is_some() {
                1
            } else {
                3
            }
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.synth.seed = seed;
    }
    Ok(config)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Reproducibility manifest written next to every command's outputs: the
/// effective config (inline and hashed), input digests and output names.
fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &[(String, String)],
    outputs: &[&str],
) -> anyhow::Result<()> {
    let config_json = serde_json::to_value(config)?;
    let manifest = serde_json::json!({
        "format": "akipred-manifest",
        "version": 1,
        "command": command,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config_sha256": sha256_hex(serde_json::to_string(&config_json)?.as_bytes()),
        "config": config_json,
        "inputs": inputs.iter().cloned().collect::<BTreeMap<String, String>>(),
        "outputs": outputs,
    });
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn digest_data_dir(data: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let mut inputs = Vec::new();
    for name in ["stays.csv", "notes.csv", "labs.csv", "lexicon.tsv", "truth.csv"] {
        let path = data.join(name);
        if path.exists() {
            inputs.push((name.to_string(), sha256_file(&path)?));
        }
    }
    Ok(inputs)
}

fn load_cohort_and_lexicon(
    data: &Path,
    config: &RunConfig,
) -> anyhow::Result<(Vec<ingest::IcuStayRecord>, ConceptLexicon)> {
    let (records, _, _) = pipeline::cohort_from_dir(data, config)?;
    let lexicon_path = data.join("lexicon.tsv");
    let lexicon = if lexicon_path.exists() {
        ConceptLexicon::load(&lexicon_path)?
    } else {
        ConceptLexicon::new()
    };
    Ok((records, lexicon))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    let out = cli.out.clone();
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let mode = ExecMode::default();

    match &cli.command {
        Command::Synth => {
            let corpus = synth::generate(&config.synth)?;
            corpus.write_to(&out)?;
            write_manifest(
                &out,
                "synth",
                &config,
                &[],
                &["stays.csv", "notes.csv", "labs.csv", "lexicon.tsv", "truth.csv"],
            )?;
            println!(
                "generated {} stays ({} positive) under {}",
                corpus.n_stays,
                corpus.n_positive,
                out.display()
            );
        }
        Command::Cohort { data } => {
            let (records, tally, rejects) = pipeline::cohort_from_dir(data, &config)?;
            std::fs::write(out.join("cohort.json"), serde_json::to_string_pretty(&records)?)?;
            std::fs::write(out.join("exclusions.json"), serde_json::to_string_pretty(&tally)?)?;
            let mut rejects_csv = String::from("file,line,reason\n");
            for r in &rejects {
                rejects_csv.push_str(&format!("{},{},{}\n", r.file, r.line, r.reason));
            }
            std::fs::write(out.join("rejects.csv"), rejects_csv)?;
            write_manifest(
                &out,
                "cohort",
                &config,
                &digest_data_dir(data)?,
                &["cohort.json", "exclusions.json", "rejects.csv"],
            )?;
            println!(
                "retained {} stays ({} excluded, {} rejected rows)",
                records.len(),
                tally.total_excluded(),
                rejects.len()
            );
        }
        Command::Label { labs } => {
            let (series_map, _) = ingest::parse_labs(labs)?;
            let mut labels_csv = String::from("stay_id,status,onset_hours,baseline\n");
            for (stay_id, points) in &series_map {
                let series = kdigo::CreatinineSeries::new(points.clone())?;
                let a = kdigo::assess(&series, &config.cohort.kdigo);
                let onset = a.onset_hours.map_or(String::new(), |t| format!("{t:.1}"));
                let baseline = if a.baseline_mg_dl.is_nan() {
                    String::new()
                } else {
                    format!("{:.2}", a.baseline_mg_dl)
                };
                labels_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    stay_id,
                    a.status.as_str(),
                    onset,
                    baseline
                ));
            }
            std::fs::write(out.join("labels.csv"), labels_csv)?;
            let inputs = vec![("labs.csv".to_string(), sha256_file(labs)?)];
            write_manifest(&out, "label", &config, &inputs, &["labels.csv"])?;
            println!("labeled {} stays into {}", series_map.len(), out.join("labels.csv").display());
        }
        Command::Featurize { data } => {
            let (records, lexicon) = load_cohort_and_lexicon(data, &config)?;
            let plan = eval::patient_split(
                &pipeline::stay_refs(&records),
                config.split_ratio,
                config.seed,
            )?;
            let featurized = pipeline::featurize_split(&records, &lexicon, &config, &plan, mode)?;
            std::fs::write(out.join("split.json"), serde_json::to_string_pretty(&plan)?)?;
            std::fs::write(out.join("vocab_words.tsv"), featurized.word_vocab.to_tsv())?;
            std::fs::write(out.join("vocab_cuis.tsv"), featurized.cui_vocab.to_tsv())?;
            let d = &featurized.dataset;
            for (name, matrix) in [
                ("features_words_train.txt", &d.train.words),
                ("features_words_test.txt", &d.test.words),
                ("features_cuis_train.txt", &d.train.cuis),
                ("features_cuis_test.txt", &d.test.cuis),
                ("features_words_plus_cuis_train.txt", &d.train.hybrid),
                ("features_words_plus_cuis_test.txt", &d.test.hybrid),
            ] {
                matrix.save(&out.join(name))?;
            }
            write_manifest(
                &out,
                "featurize",
                &config,
                &digest_data_dir(data)?,
                &[
                    "split.json",
                    "vocab_words.tsv",
                    "vocab_cuis.tsv",
                    "features_words_train.txt",
                    "features_words_test.txt",
                    "features_cuis_train.txt",
                    "features_cuis_test.txt",
                    "features_words_plus_cuis_train.txt",
                    "features_words_plus_cuis_test.txt",
                ],
            )?;
            println!(
                "featurized {} train / {} test stays ({} word terms, {} cuis)",
                d.train.n_rows(),
                d.test.n_rows(),
                d.word_terms.len(),
                d.cui_terms.len()
            );
        }
        Command::Train { data, feature_set, algorithm, sampling } => {
            let cell = GridCell {
                feature: (*feature_set).into(),
                algorithm: (*algorithm).into(),
                sampling: *sampling,
            };
            let (records, lexicon) = load_cohort_and_lexicon(data, &config)?;
            let plan = eval::patient_split(
                &pipeline::stay_refs(&records),
                config.split_ratio,
                config.seed,
            )?;
            let featurized = pipeline::featurize_split(&records, &lexicon, &config, &plan, mode)?;
            let model = train_single(&featurized.dataset, &cell, &config, mode)?;
            let file_name = model_file_name(&cell);
            ModelFile::new(model).save(&out.join(&file_name))?;
            write_manifest(&out, "train", &config, &digest_data_dir(data)?, &[&file_name])?;
            println!("saved {}", out.join(&file_name).display());
        }
        Command::Predict { model, matrix } => {
            let file = ModelFile::load(model)?;
            let matrix_data = FeatureMatrix::load(matrix)?;
            let mut scores_csv = String::from("stay_id,score\n");
            for (id, row) in matrix_data.row_ids.iter().zip(&matrix_data.rows) {
                let score = file.model.predict_proba(row)?;
                scores_csv.push_str(&format!("{id},{score:.6}\n"));
            }
            std::fs::write(out.join("scores.csv"), scores_csv)?;
            let inputs = vec![
                ("model.json".to_string(), sha256_file(model)?),
                ("matrix.txt".to_string(), sha256_file(matrix)?),
            ];
            write_manifest(&out, "predict", &config, &inputs, &["scores.csv"])?;
            println!(
                "scored {} rows into {}",
                matrix_data.n_rows(),
                out.join("scores.csv").display()
            );
        }
        Command::Evaluate { data } => {
            let (records, lexicon) = load_cohort_and_lexicon(data, &config)?;
            let cells = pipeline::grid_for(&config);
            let (report, plan) = pipeline::run_holdout(&records, &lexicon, &config, &cells, mode)?;
            std::fs::write(out.join("split.json"), serde_json::to_string_pretty(&plan)?)?;
            std::fs::write(out.join("report.json"), report.to_json()?)?;
            std::fs::write(out.join("report.txt"), report.to_text_table())?;
            let mut outputs = vec!["split.json", "report.json", "report.txt"];
            if let Some(csv) =
                report.ranked_features_csv(GridFeature::Words, GridAlgorithm::LogRegL2)
            {
                std::fs::write(out.join("ranked_features.csv"), csv)?;
                outputs.push("ranked_features.csv");
            }
            if let Some(csv) =
                report.ranked_features_csv(GridFeature::Cuis, GridAlgorithm::LogRegL2)
            {
                std::fs::write(out.join("ranked_features_cuis.csv"), csv)?;
                outputs.push("ranked_features_cuis.csv");
            }
            write_manifest(&out, "evaluate", &config, &digest_data_dir(data)?, &outputs)?;
            println!("{}", report.to_text_table());
        }
        Command::Cv { data } => {
            let (records, lexicon) = load_cohort_and_lexicon(data, &config)?;
            let cells = pipeline::grid_for(&config);
            let report = pipeline::run_cv(&records, &lexicon, &config, &cells, mode)?;
            std::fs::write(out.join("cv_report.json"), report.to_json()?)?;
            std::fs::write(out.join("cv_report.txt"), report.to_text_table())?;
            write_manifest(
                &out,
                "cv",
                &config,
                &digest_data_dir(data)?,
                &["cv_report.json", "cv_report.txt"],
            )?;
            println!("{}", report.to_text_table());
        }
        Command::Report { report } => {
            let loaded = eval::EvalReport::from_json(
                &std::fs::read_to_string(report).map_err(|_| Error::MissingInput(report.clone()))?,
            )?;
            let table = loaded.to_text_table();
            std::fs::write(out.join("report.txt"), &table)?;
            let inputs = vec![("report.json".to_string(), sha256_file(report)?)];
            write_manifest(&out, "report", &config, &inputs, &["report.txt"])?;
            println!("{table}");
        }
    }
    Ok(())
}

fn model_file_name(cell: &GridCell) -> String {
    let feature = match cell.feature {
        GridFeature::Words => "words",
        GridFeature::Cuis => "cuis",
        GridFeature::WordsPlusCuis => "words_plus_cuis",
        GridFeature::WordEmbeddings => "word_embeddings",
        GridFeature::WordCuiEmbeddings => "word_cui_embeddings",
    };
    let algorithm = match cell.algorithm {
        GridAlgorithm::NaiveBayes => "nb",
        GridAlgorithm::SvmL2 => "svm_l2",
        GridAlgorithm::SvmL1 => "svm_l1",
        GridAlgorithm::LogRegL2 => "lr_l2",
        GridAlgorithm::LogRegL1 => "lr_l1",
        GridAlgorithm::RandomForest => "rf",
        GridAlgorithm::Gbdt => "gbdt",
        GridAlgorithm::Cnn => "cnn",
    };
    match cell.sampling {
        Some(r) => format!("model_{algorithm}_{feature}_rus{r}.json"),
        None => format!("model_{algorithm}_{feature}.json"),
    }
}

/// Train one model on the training side of the dataset, honoring the cell's
/// sampling setting.
fn train_single(
    dataset: &eval::EvalDataset,
    cell: &GridCell,
    config: &RunConfig,
    mode: ExecMode,
) -> anyhow::Result<TrainedModel> {
    let models = &config.models;
    let keep: Vec<usize> = match cell.sampling {
        Some(ratio) => eval::undersample_indices(dataset.train.labels(), ratio, config.seed)?,
        None => (0..dataset.train.n_rows()).collect(),
    };
    let sparse_train = |feature: GridFeature| -> FeatureMatrix {
        match feature {
            GridFeature::Words => dataset.train.words.select(&keep),
            GridFeature::Cuis => dataset.train.cuis.select(&keep),
            _ => dataset.train.hybrid.select(&keep),
        }
    };
    let model = match cell.algorithm {
        GridAlgorithm::NaiveBayes => TrainedModel::NaiveBayes(linear::train_nb(
            &sparse_train(cell.feature),
            models.nb_alpha,
        )?),
        GridAlgorithm::SvmL2
        | GridAlgorithm::SvmL1
        | GridAlgorithm::LogRegL2
        | GridAlgorithm::LogRegL1 => {
            let (loss, penalty, lambda) = match cell.algorithm {
                GridAlgorithm::SvmL2 => (Loss::Hinge, Penalty::L2, models.lambda_l2),
                GridAlgorithm::SvmL1 => (Loss::Hinge, Penalty::L1, models.lambda_l1),
                GridAlgorithm::LogRegL2 => (Loss::Logistic, Penalty::L2, models.lambda_l2),
                _ => (Loss::Logistic, Penalty::L1, models.lambda_l1),
            };
            let opts = TrainOptions { seed: config.seed, ..models.linear_opts };
            TrainedModel::Linear(linear::train_linear(
                &sparse_train(cell.feature),
                loss,
                penalty,
                lambda,
                &opts,
            )?)
        }
        GridAlgorithm::RandomForest => {
            let params = trees::ForestParams { seed: config.seed, ..models.forest };
            TrainedModel::Forest(trees::train_random_forest(
                &sparse_train(cell.feature),
                &params,
                mode,
            )?)
        }
        GridAlgorithm::Gbdt => {
            let params = trees::GbdtParams { seed: config.seed, ..models.gbdt };
            TrainedModel::Gbdt(trees::train_gbdt(&sparse_train(cell.feature), &params, mode)?.model)
        }
        GridAlgorithm::Cnn => {
            let cnn_config = neural::CnnConfig {
                word_vocab_size: dataset.word_terms.len() + 1,
                cui_vocab_size: dataset.cui_terms.len() + 1,
                use_cui_channel: cell.feature == GridFeature::WordCuiEmbeddings,
                seed: config.seed,
                ..models.cnn.clone()
            };
            let mut model = CnnModel::new(cnn_config)?;
            let train = subset_sequences(&dataset.train.sequences, &keep);
            neural::train_cnn(&mut model, &train)?;
            TrainedModel::Cnn(model)
        }
    };
    Ok(model)
}

fn subset_sequences(sequences: &neural::CnnDataset, keep: &[usize]) -> neural::CnnDataset {
    neural::CnnDataset {
        word_ids: keep.iter().map(|&i| sequences.word_ids[i].clone()).collect(),
        cui_ids: keep.iter().map(|&i| sequences.cui_ids[i].clone()).collect(),
        labels: keep.iter().map(|&i| sequences.labels[i]).collect(),
    }
}
