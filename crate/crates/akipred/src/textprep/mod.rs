//! Note text preprocessing: PHI-mask removal, tokenization, Porter stemming,
//! vocabulary construction and tf-idf vectorization.

mod porter;

pub use porter::porter_stem;

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::sparse::SparseVector;

/// Default stopword list (313 entries, one per line).
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Parse a one-term-per-line list; blank lines and `#` comments are skipped.
/// Terms are lowercased.
pub fn parse_term_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

pub fn default_stopwords() -> HashSet<String> {
    parse_term_list(DEFAULT_STOPWORDS).into_iter().collect()
}

/// Remove bracketed PHI masks of the form `[** ... **]`. An opener without a
/// closer masks through the end of the text.
fn strip_phi_masks(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("[**") {
        out.push_str(&rest[..start]);
        match rest[start + 3..].find("**]") {
            Some(end) => rest = &rest[start + 3 + end + 3..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

/// Lowercased alphabetic tokens of length >= 2. Digits and punctuation act as
/// separators; PHI masks are deleted before tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned = strip_phi_masks(text);
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in cleaned.chars() {
        if ch.is_alphabetic() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            if current.chars().count() >= 2 {
                tokens.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
    }
    if current.chars().count() >= 2 {
        tokens.push(current);
    }
    tokens
}

/// Tokenize and stem in one pass.
pub fn stemmed_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| porter_stem(t)).collect()
}

/// Frozen term vocabulary with per-term document frequencies.
///
/// Indices are contiguous from 0 in lexicographic term order, so two builds
/// over the same corpus agree exactly. The vocabulary never grows at
/// vectorize time; unknown tokens are ignored.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Count document frequencies over tokenized docs and keep terms with
    /// `df >= min_df` that are not stopwords.
    pub fn build(
        docs: &[Vec<String>],
        stopwords: &HashSet<String>,
        min_df: usize,
    ) -> Result<Vocabulary> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if min_df < 1 {
            return Err(Error::InvalidParam("min_df must be >= 1".into()));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let distinct: HashSet<&str> = doc.iter().map(|t| t.as_str()).collect();
            for term in distinct {
                *counts.entry(term).or_insert(0) += 1;
            }
        }
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for (term, count) in counts {
            if count >= min_df && !stopwords.contains(term) {
                terms.push(term.to_string());
                df.push(count);
            }
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { terms, index, df, n_docs: docs.len() })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Smoothed inverse document frequency: `ln((1+N)/(1+df)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }

    /// Serialize as a TSV: a `#docs` header line then `term df idf` rows in
    /// index order.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#docs\t{}\n", self.n_docs);
        for i in 0..self.len() {
            out.push_str(&format!("{}\t{}\t{:.12}\n", self.terms[i], self.df[i], self.idf(i)));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Vocabulary> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::EmptyCorpus)?;
        let n_docs = header
            .strip_prefix("#docs\t")
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::InvalidParam("vocabulary TSV missing #docs header".into()))?;
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let term = fields
                .next()
                .ok_or_else(|| Error::InvalidParam(format!("bad vocabulary row: {line}")))?;
            let count: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidParam(format!("bad df in row: {line}")))?;
            terms.push(term.to_string());
            df.push(count);
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { terms, index, df, n_docs })
    }
}

/// tf-idf vector for one tokenized document: raw counts scaled by idf, then
/// L2-normalized. Out-of-vocabulary tokens are ignored; a document with no
/// in-vocabulary tokens maps to the zero vector.
pub fn tfidf_vectorize(doc: &[String], vocab: &Vocabulary) -> SparseVector {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for token in doc {
        if let Some(i) = vocab.index_of(token) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let pairs: Vec<(usize, f64)> = counts.into_iter().map(|(i, tf)| (i, tf * vocab.idf(i))).collect();
    SparseVector::from_pairs(vocab.len(), pairs)
        .expect("indices bounded by vocabulary size")
        .l2_normalized()
}

/// Vectorize a batch of documents; output order matches input order for any
/// execution mode.
pub fn tfidf_vectorize_batch(
    mode: ExecMode,
    docs: &[Vec<String>],
    vocab: &Vocabulary,
) -> Vec<SparseVector> {
    exec::map_slice(mode, docs, |doc| tfidf_vectorize(doc, vocab))
}
