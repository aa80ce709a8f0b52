//! Evaluation harness: patient-level splitting, cross-validation folds,
//! random under-sampling, rank metrics and grid reporting.

mod grid;
mod metrics;
mod report;
mod split;

pub use grid::{
    default_grid, evaluate_cells, CellMetrics, CellOutcome, EvalDataset, FeatureBundle,
    GridAlgorithm, GridCell, GridFeature, ModelsConfig,
};
pub use metrics::{prf, roc_auc, PrfMetrics};
pub use report::{CohortSummary, EvalReport, ReportRow, Stat, TopFeatureList};
pub use split::{kfold, patient_split, undersample, undersample_indices, SplitPlan, StayRef};
