//! Input-table parsing and cohort assembly.
//!
//! Three CSVs come in (stays, notes, labs); one `IcuStayRecord` per retained
//! stay comes out. Malformed rows are collected into a rejects report rather
//! than failing the run; missing required columns are fatal.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdigo::{self, AkiAssessment, AkiStatus, CreatinineSeries, KdigoConfig};
use crate::textprep;

/// Default kidney-dysfunction exclusion terms, one per line.
pub const DEFAULT_EXCLUSION_TERMS: &str = include_str!("../data/exclusion_terms.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    M,
    F,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteCategory {
    Physician,
    Nursing,
    Other,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StayMeta {
    pub stay_id: String,
    pub patient_id: String,
    pub age_years: f64,
    pub gender: Gender,
    pub ethnicity: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoteDocument {
    pub stay_id: String,
    pub chart_offset_hours: f64,
    pub category: NoteCategory,
    pub text: String,
}

/// One retained ICU stay: demographics, concatenated day-1 note text,
/// creatinine series and the KDIGO label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IcuStayRecord {
    pub meta: StayMeta,
    pub day1_text: String,
    pub creatinine: CreatinineSeries,
    pub label: AkiAssessment,
}

impl IcuStayRecord {
    pub fn is_positive(&self) -> bool {
        self.label.status == AkiStatus::Positive
    }
}

/// A rejected input row with its provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RejectedRow {
    pub file: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParsedTables {
    pub stays: Vec<StayMeta>,
    pub notes: Vec<NoteDocument>,
    /// Creatinine points per stay, time-sorted.
    pub labs: BTreeMap<String, Vec<(f64, f64)>>,
    pub rejects: Vec<RejectedRow>,
}

/// Why stays were dropped, by rule, in application order. Every input stay is
/// counted exactly once across the tally and the retained set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionTally {
    pub age: usize,
    pub note_type: usize,
    pub kidney_terms: usize,
    pub insufficient_labs: usize,
    pub day1_aki: usize,
    pub insufficient_data: usize,
}

impl ExclusionTally {
    pub fn total_excluded(&self) -> usize {
        self.age
            + self.note_type
            + self.kidney_terms
            + self.insufficient_labs
            + self.day1_aki
            + self.insufficient_data
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub min_age_years: f64,
    pub kdigo: KdigoConfig,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig { min_age_years: 18.0, kdigo: KdigoConfig::default() }
    }
}

fn require_columns(
    headers: &csv::StringRecord,
    file: &str,
    required: &[&str],
) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|col| {
            headers.iter().position(|h| h == *col).ok_or_else(|| Error::MissingColumn {
                file: file.to_string(),
                column: col.to_string(),
            })
        })
        .collect()
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(csv::ReaderBuilder::new().has_headers(true).from_path(path)?)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Parse the three input tables. Row-level problems land in
/// `ParsedTables::rejects`; structural problems (missing file or column) are
/// errors.
pub fn parse_tables(stays_path: &Path, notes_path: &Path, labs_path: &Path) -> Result<ParsedTables> {
    let mut out = ParsedTables::default();

    // stays.csv
    let mut reader = open_reader(stays_path)?;
    let cols = require_columns(
        reader.headers()?,
        "stays.csv",
        &["stay_id", "patient_id", "age_years", "gender", "ethnicity"],
    )?;
    let mut seen_stays = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let reject = |reason: &str| RejectedRow {
            file: "stays.csv".into(),
            line,
            reason: reason.into(),
        };
        let stay_id = record.get(cols[0]).unwrap_or("").trim().to_string();
        if stay_id.is_empty() {
            out.rejects.push(reject("stay_id empty"));
            continue;
        }
        if !seen_stays.insert(stay_id.clone()) {
            out.rejects.push(reject("duplicate stay_id"));
            continue;
        }
        let age_years: f64 = match record.get(cols[2]).unwrap_or("").trim().parse() {
            Ok(v) => v,
            Err(_) => {
                out.rejects.push(reject("age_years not numeric"));
                continue;
            }
        };
        if age_years < 0.0 {
            out.rejects.push(reject("age_years negative"));
            continue;
        }
        let gender = match record.get(cols[3]).unwrap_or("").trim().to_ascii_uppercase().as_str() {
            "M" => Gender::M,
            "F" => Gender::F,
            _ => Gender::Unknown,
        };
        out.stays.push(StayMeta {
            stay_id,
            patient_id: record.get(cols[1]).unwrap_or("").trim().to_string(),
            age_years,
            gender,
            ethnicity: record.get(cols[4]).unwrap_or("").trim().to_string(),
        });
    }

    // notes.csv
    let mut reader = open_reader(notes_path)?;
    let cols = require_columns(
        reader.headers()?,
        "notes.csv",
        &["stay_id", "chart_offset_hours", "category", "text"],
    )?;
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let reject = |reason: &str| RejectedRow {
            file: "notes.csv".into(),
            line,
            reason: reason.into(),
        };
        let text = record.get(cols[3]).unwrap_or("");
        if text.trim().is_empty() {
            out.rejects.push(reject("text empty"));
            continue;
        }
        let chart_offset_hours: f64 = match record.get(cols[1]).unwrap_or("").trim().parse() {
            Ok(v) => v,
            Err(_) => {
                out.rejects.push(reject("chart_offset_hours not numeric"));
                continue;
            }
        };
        if chart_offset_hours < 0.0 {
            out.rejects.push(reject("chart_offset_hours negative"));
            continue;
        }
        let category = match record.get(cols[2]).unwrap_or("").trim().to_ascii_lowercase().as_str() {
            "physician" => NoteCategory::Physician,
            "nursing" => NoteCategory::Nursing,
            _ => NoteCategory::Other,
        };
        out.notes.push(NoteDocument {
            stay_id: record.get(cols[0]).unwrap_or("").trim().to_string(),
            chart_offset_hours,
            category,
            text: text.to_string(),
        });
    }

    // labs.csv
    let (labs, mut lab_rejects) = parse_labs(labs_path)?;
    out.labs = labs;
    out.rejects.append(&mut lab_rejects);

    Ok(out)
}

/// Creatinine points per stay alongside the rejected rows.
pub type ParsedLabs = (BTreeMap<String, Vec<(f64, f64)>>, Vec<RejectedRow>);

/// Parse labs.csv alone into time-sorted creatinine points per stay.
pub fn parse_labs(labs_path: &Path) -> Result<ParsedLabs> {
    let mut labs: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rejects = Vec::new();
    let mut reader = open_reader(labs_path)?;
    let cols = require_columns(
        reader.headers()?,
        "labs.csv",
        &["stay_id", "time_offset_hours", "creatinine_mg_dl"],
    )?;
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let reject = |reason: &str| RejectedRow {
            file: "labs.csv".into(),
            line,
            reason: reason.into(),
        };
        let time: f64 = match record.get(cols[1]).unwrap_or("").trim().parse() {
            Ok(v) => v,
            Err(_) => {
                rejects.push(reject("time_offset_hours not numeric"));
                continue;
            }
        };
        let value: f64 = match record.get(cols[2]).unwrap_or("").trim().parse() {
            Ok(v) => v,
            Err(_) => {
                rejects.push(reject("creatinine_mg_dl not numeric"));
                continue;
            }
        };
        if !(0.0..=72.0).contains(&time) {
            rejects.push(reject("time_offset_hours outside [0, 72]"));
            continue;
        }
        if value <= 0.0 || !value.is_finite() {
            rejects.push(reject("creatinine_mg_dl not positive"));
            continue;
        }
        labs.entry(record.get(cols[0]).unwrap_or("").trim().to_string())
            .or_default()
            .push((time, value));
    }
    for points in labs.values_mut() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|b, a| b.0 == a.0);
    }
    Ok((labs, rejects))
}

/// Stemmed exclusion-term sequences, ready for contiguous matching.
pub fn stem_exclusion_terms(terms: &[String]) -> Vec<Vec<String>> {
    let mut stemmed: Vec<Vec<String>> = terms
        .iter()
        .map(|t| textprep::stemmed_tokens(t))
        .filter(|seq| !seq.is_empty())
        .collect();
    stemmed.sort();
    stemmed.dedup();
    stemmed
}

fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Apply the cohort rules and label the survivors.
///
/// Rules run in a fixed order and each dropped stay is tallied under the
/// first rule it fails: minimum age, then day-1 physician/nursing note
/// presence, then kidney-dysfunction term mention, then creatinine
/// availability; finally KDIGO labeling drops day-1 AKI and (unless
/// configured negative) insufficient-data stays. Retained records are sorted
/// by stay id.
pub fn build_cohort(
    stays: &[StayMeta],
    notes: &[NoteDocument],
    labs: &BTreeMap<String, Vec<(f64, f64)>>,
    exclusion_terms: &[String],
    config: &CohortConfig,
) -> Result<(Vec<IcuStayRecord>, ExclusionTally)> {
    let stemmed_terms = stem_exclusion_terms(exclusion_terms);
    let day1 = config.kdigo.day1_hours;

    let mut notes_by_stay: BTreeMap<&str, Vec<&NoteDocument>> = BTreeMap::new();
    for note in notes {
        if note.chart_offset_hours <= day1 {
            notes_by_stay.entry(note.stay_id.as_str()).or_default().push(note);
        }
    }
    // Chart-time order with a content tie-break keeps concatenation
    // independent of input row order.
    for stay_notes in notes_by_stay.values_mut() {
        stay_notes.sort_by(|a, b| {
            a.chart_offset_hours
                .total_cmp(&b.chart_offset_hours)
                .then_with(|| a.text.cmp(&b.text))
        });
    }

    let mut tally = ExclusionTally::default();
    let mut records = Vec::new();

    for meta in stays {
        if meta.age_years < config.min_age_years {
            tally.age += 1;
            continue;
        }
        let day1_notes = notes_by_stay.get(meta.stay_id.as_str());
        let has_care_note = day1_notes
            .map(|ns| {
                ns.iter()
                    .any(|n| matches!(n.category, NoteCategory::Physician | NoteCategory::Nursing))
            })
            .unwrap_or(false);
        if !has_care_note {
            tally.note_type += 1;
            continue;
        }
        let day1_text = day1_notes
            .map(|ns| ns.iter().map(|n| n.text.as_str()).collect::<Vec<_>>().join("\n"))
            .unwrap_or_default();
        let stemmed = textprep::stemmed_tokens(&day1_text);
        if stemmed_terms.iter().any(|term| contains_sequence(&stemmed, term)) {
            tally.kidney_terms += 1;
            continue;
        }
        let points = labs.get(&meta.stay_id).cloned().unwrap_or_default();
        if points.is_empty() {
            tally.insufficient_labs += 1;
            continue;
        }
        let series = CreatinineSeries::new(points)?;
        let label = kdigo::assess(&series, &config.kdigo);
        match label.status {
            AkiStatus::ExcludedDay1Aki => {
                tally.day1_aki += 1;
                continue;
            }
            AkiStatus::InsufficientData => {
                tally.insufficient_data += 1;
                continue;
            }
            AkiStatus::Positive | AkiStatus::Negative => {}
        }
        records.push(IcuStayRecord { meta: meta.clone(), day1_text, creatinine: series, label });
    }

    records.sort_by(|a, b| a.meta.stay_id.cmp(&b.meta.stay_id));
    Ok((records, tally))
}
