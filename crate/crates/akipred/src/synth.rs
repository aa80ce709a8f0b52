//! Seeded synthetic-corpus generator: stays/notes/labs tables with known
//! ground truth, planted signal terms at label-conditioned rates, and a
//! synthetic concept lexicon. Creatinine trajectories are built to satisfy or
//! violate the KDIGO rules and every generated series is re-checked through
//! the real assessment before it is emitted.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest;
use crate::kdigo::{self, AkiStatus, CreatinineSeries, KdigoConfig};
use crate::textprep;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignalTerm {
    pub term: String,
    /// P(term appears in a note | AKI stay).
    pub p_aki: f64,
    /// P(term appears in a note | non-AKI stay).
    pub p_no_aki: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub max_stays_per_patient: usize,
    pub prevalence: f64,
    pub vocab_size: usize,
    pub note_tokens_min: usize,
    pub note_tokens_max: usize,
    pub max_notes_per_stay: usize,
    pub signal_terms: Vec<SignalTerm>,
    /// Fraction of the background vocabulary mapped to synthetic CUIs.
    pub lexicon_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 500,
            max_stays_per_patient: 2,
            prevalence: 0.167,
            vocab_size: 300,
            note_tokens_min: 40,
            note_tokens_max: 120,
            max_notes_per_stay: 3,
            signal_terms: default_signal_terms(0.85, 0.05),
            lexicon_fraction: 0.4,
            seed: 0,
        }
    }
}

/// Clinically flavored marker terms planted at label-conditioned rates.
pub fn default_signal_terms(p_aki: f64, p_no_aki: f64) -> Vec<SignalTerm> {
    [
        "lasix", "cabg", "swan", "insulin", "incisional", "pressors", "hypotension", "sepsis",
        "intubated", "labile",
    ]
    .iter()
    .map(|t| SignalTerm { term: t.to_string(), p_aki, p_no_aki })
    .collect()
}

/// Generated corpus as file contents, plus the ground truth the tests need.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub stays_csv: String,
    pub notes_csv: String,
    pub labs_csv: String,
    pub lexicon_tsv: String,
    pub truth_csv: String,
    /// Stemmed forms of the planted terms that favor the positive class.
    pub planted_positive_stems: Vec<String>,
    pub n_stays: usize,
    pub n_positive: usize,
}

impl SynthCorpus {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("stays.csv"), &self.stays_csv)?;
        std::fs::write(dir.join("notes.csv"), &self.notes_csv)?;
        std::fs::write(dir.join("labs.csv"), &self.labs_csv)?;
        std::fs::write(dir.join("lexicon.tsv"), &self.lexicon_tsv)?;
        std::fs::write(dir.join("truth.csv"), &self.truth_csv)?;
        Ok(())
    }
}

const SYLLABLES: &[&str] = &[
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "na", "pe", "qui", "ro", "su", "ta",
    "ve", "wo", "xi", "zu", "bra", "cle", "dro", "fli", "gra", "ple", "sta", "tri",
];

/// Pseudo-words that survive stemming unchanged, avoiding collisions with
/// signal or exclusion stems; collisions would leak label signal or eject
/// stays from the cohort.
fn background_vocabulary(
    size: usize,
    forbidden_stems: &BTreeSet<String>,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut words = BTreeSet::new();
    let mut guard = 0;
    while words.len() < size && guard < size * 200 {
        guard += 1;
        let syllables = rng.random_range(2..=3);
        let mut word = String::new();
        for _ in 0..syllables {
            word.push_str(SYLLABLES[rng.random_range(0..SYLLABLES.len())]);
        }
        if textprep::porter_stem(&word) != word || forbidden_stems.contains(&word) {
            continue;
        }
        words.insert(word);
    }
    if words.len() < size {
        // syllable space exhausted; extend deterministically
        let base: Vec<String> = words.iter().cloned().collect();
        let mut i = 0;
        while words.len() < size {
            let w = format!("{}{}", base[i % base.len()], "zz");
            if textprep::porter_stem(&w) == w && !forbidden_stems.contains(&w) {
                words.insert(w);
            }
            i += 1;
        }
    }
    words.into_iter().collect()
}

struct StaySlot {
    stay_id: String,
    patient_id: String,
    positive: bool,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// A negative trajectory: flat around the baseline with rises capped well
/// below both thresholds.
fn negative_series(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let baseline = round2(rng.random_range(0.6..1.2));
    let times = [1.0, 9.0, 17.0, 23.0, 31.0, 43.0, 55.0, 67.0];
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let value = if i == 0 { baseline } else { round2(baseline + rng.random_range(0.0..0.18)) };
            (round1(t + rng.random_range(0.0..1.5)), value)
        })
        .collect()
}

/// A positive trajectory: flat day 1, then a super-threshold jump at an onset
/// hour in (26, 68).
fn positive_series(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let baseline = round2(rng.random_range(0.6..1.2));
    let onset = round1(rng.random_range(26.0..68.0));
    let jump = round2(baseline + rng.random_range(0.35..0.6));
    let mut points = vec![
        (round1(1.0 + rng.random_range(0.0..1.5)), baseline),
        (round1(12.0 + rng.random_range(0.0..1.5)), round2(baseline + rng.random_range(0.0..0.05))),
        (round1(20.0 + rng.random_range(0.0..1.5)), round2(baseline + rng.random_range(0.0..0.05))),
    ];
    if onset > 40.0 {
        // a quiet pre-onset measurement keeps the 48 h pairing honest
        points.push((round1(onset - 14.0), round2(baseline + rng.random_range(0.0..0.05))));
    }
    points.push((onset, jump));
    if onset < 62.0 {
        points.push((round1(onset + 6.0), round2(jump + rng.random_range(0.0..0.05))));
    }
    points
}

fn series_for_label(
    positive: bool,
    kdigo_cfg: &KdigoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, f64)>> {
    const MAX_ATTEMPTS: usize = 100;
    for _ in 0..MAX_ATTEMPTS {
        let points = if positive { positive_series(rng) } else { negative_series(rng) };
        let Ok(series) = CreatinineSeries::new(points.clone()) else { continue };
        let status = kdigo::assess(&series, kdigo_cfg).status;
        let intended = if positive { AkiStatus::Positive } else { AkiStatus::Negative };
        if status == intended {
            return Ok(points);
        }
    }
    Err(Error::SynthExhausted(MAX_ATTEMPTS))
}

/// Generate a corpus. Byte-identical output for equal configs; the intended
/// label of every stay is re-derived through `kdigo::assess` before emission.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if !(config.prevalence > 0.0 && config.prevalence < 1.0) {
        return Err(Error::InvalidParam("prevalence must be in (0, 1)".into()));
    }
    for term in &config.signal_terms {
        for p in [term.p_aki, term.p_no_aki] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParam(format!("bad probability for '{}'", term.term)));
            }
        }
    }
    if config.note_tokens_min == 0 || config.note_tokens_max < config.note_tokens_min {
        return Err(Error::InvalidParam("bad note length range".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kdigo_cfg = KdigoConfig::default();

    let exclusion_stems: BTreeSet<String> =
        ingest::stem_exclusion_terms(&textprep::parse_term_list(ingest::DEFAULT_EXCLUSION_TERMS))
            .into_iter()
            .flatten()
            .collect();
    let signal_stems: Vec<String> =
        config.signal_terms.iter().map(|t| textprep::porter_stem(&t.term)).collect();
    for stem in &signal_stems {
        if exclusion_stems.contains(stem) {
            return Err(Error::InvalidParam(format!(
                "signal term '{stem}' collides with a cohort exclusion term"
            )));
        }
    }
    let mut forbidden = exclusion_stems;
    forbidden.extend(signal_stems.iter().cloned());
    let vocabulary = background_vocabulary(config.vocab_size, &forbidden, &mut rng);

    // Stays, patient-grouped, with an exact positive allocation.
    let mut slots = Vec::new();
    for p in 0..config.n_patients {
        let n_stays = rng.random_range(1..=config.max_stays_per_patient.max(1));
        for s in 0..n_stays {
            slots.push(StaySlot {
                stay_id: format!("s{:06}", slots.len()),
                patient_id: format!("p{p:05}"),
                positive: false,
            });
            let _ = s;
        }
    }
    let n_stays = slots.len();
    let n_positive = ((n_stays as f64) * config.prevalence).round() as usize;
    let mut order: Vec<usize> = (0..n_stays).collect();
    order.shuffle(&mut rng);
    for &i in order.iter().take(n_positive) {
        slots[i].positive = true;
    }

    let ethnicities = ["white", "black", "hispanic", "asian", "other"];
    let mut stays_csv = String::from("stay_id,patient_id,age_years,gender,ethnicity\n");
    let mut labs_csv = String::from("stay_id,time_offset_hours,creatinine_mg_dl\n");
    let mut truth_csv = String::from("stay_id,label\n");

    let mut notes_writer = csv::WriterBuilder::new().from_writer(Vec::new());
    notes_writer
        .write_record(["stay_id", "chart_offset_hours", "category", "text"])
        .map_err(Error::from)?;

    for slot in &slots {
        let age = rng.random_range(18..92);
        let gender = if rng.random_range(0.0..1.0) < 0.55 { "M" } else { "F" };
        let ethnicity = ethnicities[rng.random_range(0..ethnicities.len())];
        writeln!(
            stays_csv,
            "{},{},{},{},{}",
            slot.stay_id, slot.patient_id, age, gender, ethnicity
        )
        .expect("write to string");

        let points = series_for_label(slot.positive, &kdigo_cfg, &mut rng)?;
        for (t, v) in points {
            writeln!(labs_csv, "{},{t:.1},{v:.2}", slot.stay_id).expect("write to string");
        }
        writeln!(truth_csv, "{},{}", slot.stay_id, slot.positive as u8).expect("write to string");

        // Signal terms drawn once per stay, spread over its notes.
        let mut planted: Vec<&str> = Vec::new();
        for term in &config.signal_terms {
            let p = if slot.positive { term.p_aki } else { term.p_no_aki };
            if rng.random_range(0.0..1.0) < p {
                planted.push(&term.term);
            }
        }

        let n_notes = rng.random_range(1..=config.max_notes_per_stay.max(1));
        for note_idx in 0..n_notes {
            let category = match (note_idx, rng.random_range(0..3)) {
                (0, 0 | 1) | (_, 0) => "physician",
                (0, _) | (_, 1) => "nursing",
                _ => "other",
            };
            let offset = round1(rng.random_range(0.0..24.0));
            let length = rng.random_range(config.note_tokens_min..=config.note_tokens_max);
            let mut tokens: Vec<String> = (0..length)
                .map(|_| vocabulary[rng.random_range(0..vocabulary.len())].clone())
                .collect();
            for term in &planted {
                let copies = rng.random_range(1..=2);
                for _ in 0..copies {
                    let at = rng.random_range(0..=tokens.len());
                    tokens.insert(at, term.to_string());
                }
            }
            let mut text = tokens.join(" ");
            if rng.random_range(0.0..1.0) < 0.15 {
                text = format!("[**Name**] {text}, creatinine {:.1} noted.", rng.random_range(0.5..1.8));
            }
            notes_writer
                .write_record([
                    slot.stay_id.as_str(),
                    &format!("{offset:.1}"),
                    category,
                    &text,
                ])
                .map_err(Error::from)?;
        }
    }

    // Lexicon: every signal term plus a sampled slice of the background
    // vocabulary, with cycling semantic types.
    let semantic_types = ["dsyn", "fndg", "sosy"];
    let mut lexicon_tsv = String::from("# surface_term\tcui\tsemantic_type\n");
    let mut next_cui = 1;
    for term in &config.signal_terms {
        writeln!(lexicon_tsv, "{}\tC{:07}\tdsyn", term.term, next_cui).expect("write to string");
        next_cui += 1;
    }
    for word in &vocabulary {
        if rng.random_range(0.0..1.0) < config.lexicon_fraction {
            writeln!(
                lexicon_tsv,
                "{}\tC{:07}\t{}",
                word,
                next_cui,
                semantic_types[next_cui % semantic_types.len()]
            )
            .expect("write to string");
            next_cui += 1;
        }
    }

    let notes_csv = String::from_utf8(notes_writer.into_inner().map_err(|e| {
        Error::InvalidParam(format!("csv writer: {e}"))
    })?)
    .expect("utf8 csv");

    let mut planted_positive_stems: Vec<String> = config
        .signal_terms
        .iter()
        .filter(|t| t.p_aki > t.p_no_aki)
        .map(|t| textprep::porter_stem(&t.term))
        .collect();
    planted_positive_stems.sort();
    planted_positive_stems.dedup();

    Ok(SynthCorpus {
        stays_csv,
        notes_csv,
        labs_csv,
        lexicon_tsv,
        truth_csv,
        planted_positive_stems,
        n_stays,
        n_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn small_config(seed: u64) -> SynthConfig {
        SynthConfig {
            n_patients: 60,
            max_stays_per_patient: 2,
            prevalence: 0.3,
            vocab_size: 50,
            note_tokens_min: 10,
            note_tokens_max: 30,
            max_notes_per_stay: 2,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_files() {
        let a = generate(&small_config(5)).unwrap();
        let b = generate(&small_config(5)).unwrap();
        assert_eq!(a.stays_csv, b.stays_csv);
        assert_eq!(a.notes_csv, b.notes_csv);
        assert_eq!(a.labs_csv, b.labs_csv);
        assert_eq!(a.lexicon_tsv, b.lexicon_tsv);
        assert_eq!(a.truth_csv, b.truth_csv);

        let c = generate(&small_config(6)).unwrap();
        assert_ne!(a.labs_csv, c.labs_csv);
    }

    #[test]
    fn labels_round_trip_through_assessment() {
        let corpus = generate(&small_config(7)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        corpus.write_to(dir.path()).unwrap();

        let parsed = ingest::parse_tables(
            &dir.path().join("stays.csv"),
            &dir.path().join("notes.csv"),
            &dir.path().join("labs.csv"),
        )
        .unwrap();
        assert!(parsed.rejects.is_empty(), "rejects: {:?}", parsed.rejects);

        let truth: BTreeMap<String, u8> = corpus
            .truth_csv
            .lines()
            .skip(1)
            .map(|l| {
                let (id, label) = l.split_once(',').unwrap();
                (id.to_string(), label.parse().unwrap())
            })
            .collect();
        assert_eq!(truth.len(), corpus.n_stays);

        let cfg = KdigoConfig::default();
        for (stay_id, points) in &parsed.labs {
            let series = CreatinineSeries::new(points.clone()).unwrap();
            let status = kdigo::assess(&series, &cfg).status;
            let expected =
                if truth[stay_id] == 1 { AkiStatus::Positive } else { AkiStatus::Negative };
            assert_eq!(status, expected, "stay {stay_id}");
        }
    }

    #[test]
    fn prevalence_matches_exactly_by_allocation() {
        let corpus = generate(&small_config(8)).unwrap();
        let expected = ((corpus.n_stays as f64) * 0.3).round() as usize;
        assert_eq!(corpus.n_positive, expected);
    }

    #[test]
    fn vocabulary_words_are_stem_fixpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let words = background_vocabulary(40, &BTreeSet::new(), &mut rng);
        assert_eq!(words.len(), 40);
        for w in &words {
            assert_eq!(&textprep::porter_stem(w), w);
        }
    }

    #[test]
    fn lexicon_covers_all_signal_terms() {
        let corpus = generate(&small_config(9)).unwrap();
        for term in default_signal_terms(0.5, 0.5) {
            assert!(
                corpus.lexicon_tsv.contains(&format!("{}\t", term.term)),
                "missing lexicon entry for {}",
                term.term
            );
        }
    }
}
