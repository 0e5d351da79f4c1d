//! Word n-gram TF-IDF features.
//!
//! Documents are single sentences. Weights are raw term counts times smoothed
//! idf `ln((1 + N) / (1 + df)) + 1`, then L2-normalized per sentence.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NGRAM: usize = 5;
pub const DEFAULT_MIN_DF: usize = 2;

/// Lowercased word tokens, in source order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(
            iter.into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits on anything that is not alphanumeric. An apostrophe stays inside a token
/// only when it has alphanumeric characters on both sides. Stopwords are kept.
pub fn tokenize(text: &str) -> TokenSequence {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if is_apostrophe(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenSequence(tokens)
}

/// One to five consecutive tokens joined by a single space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NGram(String);

impl NGram {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.split(' ').count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn check_n_max(n_max: usize) -> Result<()> {
    if !(1..=MAX_NGRAM).contains(&n_max) {
        return Err(Error::InvalidParameter(format!(
            "n_max must lie in 1..={MAX_NGRAM}, got {n_max}"
        )));
    }
    Ok(())
}

fn for_each_ngram(tokens: &[String], n_max: usize, mut f: impl FnMut(String)) {
    for n in 1..=n_max.min(tokens.len()) {
        for window in tokens.windows(n) {
            f(window.join(" "));
        }
    }
}

/// All contiguous n-grams for `n = 1..=min(n_max, len)`, grouped by `n` and then by start position.
pub fn extract_ngrams(tokens: &TokenSequence, n_max: usize) -> Result<Vec<NGram>> {
    check_n_max(n_max)?;
    let mut out = Vec::new();
    for_each_ngram(tokens.tokens(), n_max, |g| out.push(NGram(g)));
    Ok(out)
}

/// `Σ_{n=1..min(n_max,len)} (len − n + 1)`.
pub fn ngram_count(len: usize, n_max: usize) -> usize {
    (1..=n_max.min(len)).map(|n| len - n + 1).sum()
}

/// Sparse feature vector with entries sorted by index and strictly positive weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds a vector from `(index, weight)` pairs; zero weights are dropped and
    /// duplicate indices summed.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> = entries.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, w) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += w,
                _ => merged.push((i, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        SparseVector { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .ok()
            .map(|pos| self.entries[pos].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_entries(self.entries.iter().map(|&(i, w)| (i, w * factor)))
    }

    fn l2_normalized(mut self) -> SparseVector {
        let norm = self.norm();
        if norm > 0.0 {
            for (_, w) in &mut self.entries {
                *w /= norm;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfidfParams {
    pub n_max: usize,
    pub min_df: usize,
}

impl Default for TfidfParams {
    fn default() -> Self {
        TfidfParams {
            n_max: MAX_NGRAM,
            min_df: DEFAULT_MIN_DF,
        }
    }
}

/// Fitted n-gram vocabulary with idf weights. Feature indices follow the
/// lexicographic order of the n-gram strings.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: Vec<NGram>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    params: TfidfParams,
    documents: usize,
}

/// On-disk form of [`TfidfModel`]; the index map is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct TfidfModelRepr {
    n_max: usize,
    min_df: usize,
    documents: usize,
    vocabulary: Vec<NGram>,
    idf: Vec<f64>,
}

impl TfidfModel {
    pub fn fit<'a, I>(texts: I, params: TfidfParams) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        check_n_max(params.n_max)?;
        if params.min_df == 0 {
            return Err(Error::InvalidParameter("min_df must be at least 1".into()));
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut documents = 0usize;
        for text in texts {
            documents += 1;
            let tokens = tokenize(text);
            let mut grams = Vec::with_capacity(ngram_count(tokens.len(), params.n_max));
            for_each_ngram(tokens.tokens(), params.n_max, |g| grams.push(g));
            grams.sort_unstable();
            grams.dedup();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        if documents == 0 {
            return Err(Error::EmptyDataset("no training sentences for TF-IDF".into()));
        }
        let mut kept: Vec<(String, usize)> = df
            .into_iter()
            .filter(|&(_, d)| d >= params.min_df)
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary {
                min_df: params.min_df,
            });
        }
        kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let n = documents as f64;
        let idf = kept
            .iter()
            .map(|&(_, d)| smoothed_idf(n, d as f64))
            .collect();
        let vocabulary: Vec<NGram> = kept.into_iter().map(|(g, _)| NGram(g)).collect();
        Ok(Self::assemble(vocabulary, idf, params, documents))
    }

    fn assemble(vocabulary: Vec<NGram>, idf: Vec<f64>, params: TfidfParams, documents: usize) -> Self {
        let index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, g)| (g.0.clone(), i))
            .collect();
        TfidfModel {
            vocabulary,
            index,
            idf,
            params,
            documents,
        }
    }

    /// Raw counts of in-vocabulary n-grams times idf, L2-normalized.
    /// A sentence with no in-vocabulary n-grams maps to the empty vector.
    pub fn transform(&self, text: &str) -> SparseVector {
        let tokens = tokenize(text);
        let mut counts: HashMap<usize, u32> = HashMap::new();
        for_each_ngram(tokens.tokens(), self.params.n_max, |g| {
            if let Some(&i) = self.index.get(&g) {
                *counts.entry(i).or_default() += 1;
            }
        });
        SparseVector::from_entries(
            counts
                .into_iter()
                .map(|(i, c)| (i, f64::from(c) * self.idf[i])),
        )
        .l2_normalized()
    }

    pub fn vocabulary(&self) -> &[NGram] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn index_of(&self, gram: &str) -> Option<usize> {
        self.index.get(gram).copied()
    }

    pub fn idf_of(&self, gram: &str) -> Option<f64> {
        self.index_of(gram).map(|i| self.idf[i])
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn params(&self) -> TfidfParams {
        self.params
    }

    /// Number of training sentences seen by `fit`.
    pub fn documents(&self) -> usize {
        self.documents
    }

    pub(crate) fn to_repr(&self) -> TfidfModelRepr {
        TfidfModelRepr {
            n_max: self.params.n_max,
            min_df: self.params.min_df,
            documents: self.documents,
            vocabulary: self.vocabulary.clone(),
            idf: self.idf.clone(),
        }
    }

    pub(crate) fn from_repr(repr: TfidfModelRepr) -> Result<Self> {
        check_n_max(repr.n_max)?;
        if repr.vocabulary.len() != repr.idf.len() {
            return Err(Error::Format(format!(
                "vocabulary has {} entries but idf has {}",
                repr.vocabulary.len(),
                repr.idf.len()
            )));
        }
        if let Some(bad) = repr.idf.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Format(format!("invalid idf value {bad}")));
        }
        let params = TfidfParams {
            n_max: repr.n_max,
            min_df: repr.min_df,
        };
        let model = Self::assemble(repr.vocabulary, repr.idf, params, repr.documents);
        if model.index.len() != model.vocabulary.len() {
            return Err(Error::Format("vocabulary contains duplicate n-grams".into()));
        }
        Ok(model)
    }
}

fn smoothed_idf(documents: f64, df: f64) -> f64 {
    ((1.0 + documents) / (1.0 + df)).ln() + 1.0
}
