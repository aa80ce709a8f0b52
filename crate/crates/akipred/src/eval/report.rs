//! Report assembly and rendering: machine JSON, a human table shaped like
//! a fixed-width results grid, and ranked-feature CSV exports.

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::grid::{CellOutcome, GridAlgorithm, GridCell, GridFeature};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation across folds; absent for single-split
    /// runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl Stat {
    pub fn point(mean: f64) -> Stat {
        Stat { mean, sd: None }
    }

    fn render(&self) -> String {
        match self.sd {
            Some(sd) => format!("{:.4}±{:.4}", self.mean, sd),
            None => format!("{:.4}", self.mean),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub feature: GridFeature,
    pub algorithm: GridAlgorithm,
    pub sampling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub train_positives: usize,
    pub test_positives: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopFeatureList {
    pub feature: GridFeature,
    pub algorithm: GridAlgorithm,
    pub entries: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    /// "held_out" for a single train/test split, "cv_mean" for k-fold means.
    pub mode: String,
    pub seed: u64,
    pub cohort: CohortSummary,
    pub rows: Vec<ReportRow>,
    pub top_features: Vec<TopFeatureList>,
    pub config_echo: serde_json::Value,
}

impl EvalReport {
    /// Single-split report from cell outcomes.
    pub fn from_outcomes(
        outcomes: &[CellOutcome],
        cohort: CohortSummary,
        seed: u64,
        config_echo: serde_json::Value,
    ) -> EvalReport {
        let rows = outcomes
            .iter()
            .map(|o| ReportRow {
                feature: o.cell.feature,
                algorithm: o.cell.algorithm,
                sampling: o.cell.sampling,
                auc: o.metrics.map(|m| Stat::point(m.auc)),
                precision: o.metrics.map(|m| Stat::point(m.precision)),
                recall: o.metrics.map(|m| Stat::point(m.recall)),
                f1: o.metrics.map(|m| Stat::point(m.f1)),
                error: o.error.clone(),
            })
            .collect();
        let top_features = outcomes
            .iter()
            .filter_map(|o| {
                o.top_features.as_ref().map(|entries| TopFeatureList {
                    feature: o.cell.feature,
                    algorithm: o.cell.algorithm,
                    entries: entries.clone(),
                })
            })
            .collect();
        EvalReport { mode: "held_out".into(), seed, cohort, rows, top_features, config_echo }
    }

    /// Per-fold mean ± sd report. Each inner slice holds one fold's outcomes
    /// in identical grid order; cells that failed in any fold report the
    /// first error.
    pub fn from_fold_outcomes(
        folds: &[Vec<CellOutcome>],
        cells: &[GridCell],
        cohort: CohortSummary,
        seed: u64,
        config_echo: serde_json::Value,
    ) -> EvalReport {
        let mut rows = Vec::with_capacity(cells.len());
        for (i, cell) in cells.iter().enumerate() {
            let outcomes: Vec<&CellOutcome> = folds.iter().map(|f| &f[i]).collect();
            let error = outcomes.iter().find_map(|o| o.error.clone());
            let stat_of = |pick: &dyn Fn(&super::grid::CellMetrics) -> f64| -> Option<Stat> {
                let values: Vec<f64> =
                    outcomes.iter().filter_map(|o| o.metrics.as_ref().map(pick)).collect();
                if values.is_empty() {
                    return None;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
                Some(Stat { mean, sd: Some(var.sqrt()) })
            };
            rows.push(ReportRow {
                feature: cell.feature,
                algorithm: cell.algorithm,
                sampling: cell.sampling,
                auc: stat_of(&|m| m.auc),
                precision: stat_of(&|m| m.precision),
                recall: stat_of(&|m| m.recall),
                f1: stat_of(&|m| m.f1),
                error,
            });
        }
        EvalReport {
            mode: "cv_mean".into(),
            seed,
            cohort,
            rows,
            top_features: Vec::new(),
            config_echo,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<EvalReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed-width results table with one row per grid cell.
    pub fn to_text_table(&self) -> String {
        let metric_width = if self.mode == "cv_mean" { 14 } else { 10 };
        let mut out = String::new();
        out.push_str(&format!(
            "AKI prediction report ({}) — train {} stays ({} positive), test {} stays ({} positive)\n",
            self.mode,
            self.cohort.n_train,
            self.cohort.train_positives,
            self.cohort.n_test,
            self.cohort.test_positives,
        ));
        out.push_str(&format!(
            "{:<32} {:<10} {:<14} {:>w$} {:>w$} {:>w$} {:>w$}\n",
            "Feature",
            "Algorithm",
            "Undersampling",
            "AUC",
            "Precision",
            "Recall",
            "F-measure",
            w = metric_width,
        ));
        let rule_len = 32 + 10 + 14 + 4 * metric_width + 6;
        out.push_str(&"-".repeat(rule_len));
        out.push('\n');
        for row in &self.rows {
            let cell = GridCell {
                feature: row.feature,
                algorithm: row.algorithm,
                sampling: row.sampling,
            };
            let fmt = |s: &Option<Stat>| s.map_or("-".to_string(), |v| v.render());
            if let Some(error) = &row.error {
                out.push_str(&format!(
                    "{:<32} {:<10} {:<14} failed: {}\n",
                    row.feature.label(),
                    row.algorithm.label(),
                    cell.sampling_label(),
                    error,
                ));
            } else {
                out.push_str(&format!(
                    "{:<32} {:<10} {:<14} {:>w$} {:>w$} {:>w$} {:>w$}\n",
                    row.feature.label(),
                    row.algorithm.label(),
                    cell.sampling_label(),
                    fmt(&row.auc),
                    fmt(&row.precision),
                    fmt(&row.recall),
                    fmt(&row.f1),
                    w = metric_width,
                ));
            }
        }
        out
    }

    /// `rank,term_or_cui,weight` CSV for the first ranked-feature list
    /// matching (feature, algorithm), if that cell produced one.
    pub fn ranked_features_csv(
        &self,
        feature: GridFeature,
        algorithm: GridAlgorithm,
    ) -> Option<String> {
        let list = self
            .top_features
            .iter()
            .find(|l| l.feature == feature && l.algorithm == algorithm)?;
        let mut out = String::from("rank,term_or_cui,weight\n");
        for (rank, (term, weight)) in list.entries.iter().enumerate() {
            out.push_str(&format!("{},{},{:.6}\n", rank + 1, term, weight));
        }
        Some(out)
    }
}
