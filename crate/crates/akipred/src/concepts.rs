//! Dictionary-based medical concept extraction. A lexicon maps stemmed term
//! sequences to UMLS-style CUIs; extraction is a greedy left-to-right
//! longest-match scan, so no reported match is a strict prefix of another
//! possible match at the same position.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::sparse::SparseVector;
use crate::textprep::{self, Vocabulary};

#[derive(Clone, Debug)]
pub struct LexiconEntry {
    pub cui: String,
    pub semantic_type: String,
}

/// Immutable concept lexicon keyed by stemmed token sequences.
#[derive(Clone, Debug, Default)]
pub struct ConceptLexicon {
    entries: HashMap<Vec<String>, LexiconEntry>,
    by_cui: HashMap<String, String>,
    max_phrase_len: usize,
}

impl ConceptLexicon {
    pub fn new() -> ConceptLexicon {
        ConceptLexicon::default()
    }

    /// Insert a surface term. The term is tokenized and stemmed with the same
    /// pipeline the notes go through; a duplicate stemmed sequence keeps the
    /// first entry.
    pub fn insert(&mut self, surface_term: &str, cui: &str, semantic_type: &str) -> Result<()> {
        let key = textprep::stemmed_tokens(surface_term);
        if key.is_empty() {
            return Err(Error::InvalidParam(format!("lexicon term '{surface_term}' has no tokens")));
        }
        self.max_phrase_len = self.max_phrase_len.max(key.len());
        self.by_cui.entry(cui.to_string()).or_insert_with(|| semantic_type.to_string());
        self.entries.entry(key).or_insert_with(|| LexiconEntry {
            cui: cui.to_string(),
            semantic_type: semantic_type.to_string(),
        });
        Ok(())
    }

    /// Parse `surface_term <TAB> cui <TAB> semantic_type` lines; `#` comments
    /// and blank lines are skipped.
    pub fn from_tsv(text: &str) -> Result<ConceptLexicon> {
        let mut lexicon = ConceptLexicon::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidParam(format!(
                    "lexicon line {}: expected 3 tab-separated fields",
                    lineno + 1
                )));
            }
            lexicon.insert(fields[0], fields[1], fields[2])?;
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<ConceptLexicon> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        ConceptLexicon::from_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn semantic_type_of(&self, cui: &str) -> Option<&str> {
        self.by_cui.get(cui).map(|s| s.as_str())
    }

    fn lookup(&self, key: &[String]) -> Option<&LexiconEntry> {
        self.entries.get(key)
    }
}

/// CUI multiset for one document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CuiBag {
    counts: BTreeMap<String, usize>,
}

impl CuiBag {
    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Repeat each CUI by its count, in CUI order. Used as the "document"
    /// for CUI vocabulary building and vectorization.
    pub fn to_tokens(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.total());
        for (cui, &n) in &self.counts {
            for _ in 0..n {
                out.push(cui.clone());
            }
        }
        out
    }
}

/// Greedy left-to-right longest-match scan over stemmed tokens, yielding
/// matched CUIs in text order. Matched spans are consumed, so matches never
/// overlap.
pub fn extract_cui_sequence(stemmed_tokens: &[String], lexicon: &ConceptLexicon) -> Vec<String> {
    let mut sequence = Vec::new();
    if lexicon.is_empty() {
        return sequence;
    }
    let mut i = 0;
    while i < stemmed_tokens.len() {
        let longest = lexicon.max_phrase_len().min(stemmed_tokens.len() - i);
        let mut matched = None;
        for len in (1..=longest).rev() {
            if let Some(entry) = lexicon.lookup(&stemmed_tokens[i..i + len]) {
                matched = Some((len, entry.cui.clone()));
                break;
            }
        }
        match matched {
            Some((len, cui)) => {
                sequence.push(cui);
                i += len;
            }
            None => i += 1,
        }
    }
    sequence
}

/// CUI multiset of the longest-match scan.
pub fn extract_cuis(stemmed_tokens: &[String], lexicon: &ConceptLexicon) -> CuiBag {
    let mut bag = CuiBag::default();
    for cui in extract_cui_sequence(stemmed_tokens, lexicon) {
        *bag.counts.entry(cui).or_insert(0) += 1;
    }
    bag
}

/// Drop sequence entries whose semantic type is outside the allowlist; an
/// empty allowlist keeps everything.
pub fn filter_sequence_semantic_types(
    sequence: &[String],
    lexicon: &ConceptLexicon,
    allowlist: &HashSet<String>,
) -> Result<Vec<String>> {
    if allowlist.is_empty() {
        return Ok(sequence.to_vec());
    }
    let mut out = Vec::new();
    for cui in sequence {
        let semantic_type =
            lexicon.semantic_type_of(cui).ok_or_else(|| Error::UnknownCui(cui.clone()))?;
        if allowlist.contains(semantic_type) {
            out.push(cui.clone());
        }
    }
    Ok(out)
}

/// Keep CUIs whose semantic type is in the allowlist; an empty allowlist
/// keeps everything.
pub fn filter_semantic_types(
    bag: &CuiBag,
    lexicon: &ConceptLexicon,
    allowlist: &HashSet<String>,
) -> Result<CuiBag> {
    if allowlist.is_empty() {
        return Ok(bag.clone());
    }
    let mut out = CuiBag::default();
    for (cui, &count) in bag.counts() {
        let semantic_type = lexicon
            .semantic_type_of(cui)
            .ok_or_else(|| Error::UnknownCui(cui.clone()))?;
        if allowlist.contains(semantic_type) {
            out.counts.insert(cui.clone(), count);
        }
    }
    Ok(out)
}

/// tf-idf over CUIs: same contract as word vectorization with CUIs as terms.
pub fn cui_tfidf_vectorize(bag: &CuiBag, cui_vocab: &Vocabulary) -> SparseVector {
    textprep::tfidf_vectorize(&bag.to_tokens(), cui_vocab)
}

/// Extract CUI bags for a batch of stemmed documents.
pub fn extract_cuis_batch(
    mode: ExecMode,
    docs: &[Vec<String>],
    lexicon: &ConceptLexicon,
) -> Vec<CuiBag> {
    exec::map_slice(mode, docs, |doc| extract_cuis(doc, lexicon))
}
