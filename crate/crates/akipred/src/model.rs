//! Versioned JSON container for trained models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{LinearModel, NbModel};
use crate::neural::CnnModel;
use crate::sparse::SparseVector;
use crate::trees::{ForestModel, GbdtModel};

pub const MODEL_FORMAT: &str = "akipred-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    NaiveBayes(NbModel),
    Linear(LinearModel),
    Forest(ForestModel),
    Gbdt(GbdtModel),
    Cnn(CnnModel),
}

impl TrainedModel {
    /// Score a sparse feature vector. CNN models consume id sequences, not
    /// sparse vectors, and refuse this path.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        match self {
            TrainedModel::NaiveBayes(m) => m.predict_proba(x),
            TrainedModel::Linear(m) => m.predict_proba(x),
            TrainedModel::Forest(m) => m.predict_proba(x),
            TrainedModel::Gbdt(m) => m.predict_proba(x),
            TrainedModel::Cnn(_) => Err(Error::InvalidParam(
                "cnn models score id sequences, not sparse vectors".into(),
            )),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::NaiveBayes(_) => "naive_bayes",
            TrainedModel::Linear(_) => "linear",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Gbdt(_) => "gbdt",
            TrainedModel::Cnn(_) => "cnn",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(model: TrainedModel) -> ModelFile {
        ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidParam(format!("not a model file: format '{}'", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::InvalidParam(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureMatrix, FeatureSetKind};
    use crate::linear::{train_linear, Loss, Penalty, TrainOptions};

    fn tiny_matrix() -> FeatureMatrix {
        let rows = vec![
            SparseVector::from_pairs(2, vec![(0, 1.0)]).unwrap(),
            SparseVector::from_pairs(2, vec![(1, 1.0)]).unwrap(),
        ];
        FeatureMatrix::new(FeatureSetKind::Words, 2, vec!["a".into(), "b".into()], vec![1, 0], rows)
            .unwrap()
    }

    #[test]
    fn linear_model_round_trips_with_identical_predictions() {
        let m = tiny_matrix();
        let model =
            train_linear(&m, Loss::Logistic, Penalty::L2, 0.01, &TrainOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ModelFile::new(TrainedModel::Linear(model.clone())).save(&path).unwrap();

        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(loaded.model.kind_name(), "linear");
        for row in &m.rows {
            let a = model.predict_proba(row).unwrap();
            let b = loaded.model.predict_proba(row).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn wrong_format_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"format":"other","version":1,"kind":"linear"}"#).unwrap();
        assert!(ModelFile::load(&path).is_err());
    }
}
