//! End-to-end AKI onset prediction from first-day ICU notes.
//!
//! The pipeline: parse stays/notes/labs tables, label AKI status from
//! 72-hour creatinine series, turn day-1 note text into tf-idf word and CUI
//! vectors, train classifier families under class re-balancing, and report
//! AUC/precision/recall/F1 plus ranked feature lists. A seeded synthetic
//! corpus generator provides ground-truth data for verification.

pub mod concepts;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod ingest;
pub mod kdigo;
pub mod linear;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod sparse;
pub mod synth;
pub mod textprep;
pub mod trees;

pub use error::{Error, Result};
pub use exec::ExecMode;
