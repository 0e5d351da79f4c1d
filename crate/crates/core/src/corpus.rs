//! Labeled hybrid-article datasets.
//!
//! A dataset file is UTF-8 JSONL with one article per line:
//!
//! ```text
//! {"id": "a1", "domain": "news", "sentences": [{"text": "...", "label": "human"}, ...]}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{rng_for, STREAM_SPLIT, STREAM_UNDERSAMPLE};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human,
    Machine,
}

impl Label {
    /// Class order used by every model and matrix: `[Human, Machine]`.
    pub const ALL: [Label; 2] = [Label::Human, Label::Machine];

    pub fn index(self) -> usize {
        match self {
            Label::Human => 0,
            Label::Machine => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Machine => "machine",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Label::Human),
            "machine" => Ok(Label::Machine),
            other => Err(Error::InvalidParameter(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Academic,
    News,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Academic => "academic",
            Domain::News => "news",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub label: Label,
}

impl Sentence {
    pub fn new(text: impl Into<String>, label: Label) -> Self {
        Sentence {
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub domain: Domain,
    pub sentences: Vec<Sentence>,
}

impl Article {
    pub fn labels(&self) -> Vec<Label> {
        self.sentences.iter().map(|s| s.label).collect()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.sentences.is_empty() {
            return Err(format!("article {:?} has no sentences", self.id));
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.text.trim().is_empty() {
                return Err(format!(
                    "article {:?}: sentence {} has empty text",
                    self.id, i
                ));
            }
        }
        Ok(())
    }
}

/// An ordered collection of articles with unique ids and non-empty sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct LabeledDataset {
    articles: Vec<Article>,
}

/// Counts by domain and label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub articles: usize,
    pub sentences: usize,
    pub articles_by_domain: BTreeMap<Domain, usize>,
    pub sentences_by_label: BTreeMap<Label, usize>,
    pub sentences_by_domain_label: BTreeMap<String, usize>,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "articles:  {}", self.articles)?;
        writeln!(f, "sentences: {}", self.sentences)?;
        for (domain, n) in &self.articles_by_domain {
            writeln!(f, "  {domain:<9} articles:  {n}")?;
        }
        for (label, n) in &self.sentences_by_label {
            writeln!(f, "  {label:<9} sentences: {n}")?;
        }
        for (key, n) in &self.sentences_by_domain_label {
            writeln!(f, "  {key:<18} {n}")?;
        }
        Ok(())
    }
}

impl LabeledDataset {
    /// Validates unique ids, at least one sentence per article and non-blank sentence text.
    /// An empty article list is allowed here; training operations reject it.
    pub fn new(articles: Vec<Article>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(articles.len());
        for (i, article) in articles.iter().enumerate() {
            article.validate().map_err(|message| Error::Schema {
                line: i + 1,
                message,
            })?;
            if !seen.insert(article.id.as_str()) {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: article.id.clone(),
                });
            }
        }
        Ok(LabeledDataset { articles })
    }

    fn from_validated(articles: Vec<Article>) -> Self {
        LabeledDataset { articles }
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn into_articles(self) -> Vec<Article> {
        self.articles
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> + Clone {
        self.articles.iter().flat_map(|a| a.sentences.iter())
    }

    pub fn sentence_count(&self) -> usize {
        self.articles.iter().map(|a| a.sentences.len()).sum()
    }

    pub fn count_domain(&self, domain: Domain) -> usize {
        self.articles.iter().filter(|a| a.domain == domain).count()
    }

    pub fn stats(&self) -> DatasetStats {
        let mut stats = DatasetStats {
            articles: self.articles.len(),
            ..DatasetStats::default()
        };
        for article in &self.articles {
            *stats.articles_by_domain.entry(article.domain).or_default() += 1;
            for s in &article.sentences {
                stats.sentences += 1;
                *stats.sentences_by_label.entry(s.label).or_default() += 1;
                *stats
                    .sentences_by_domain_label
                    .entry(format!("{}/{}", article.domain, s.label))
                    .or_default() += 1;
            }
        }
        stats
    }

    fn retain_indices(&self, keep: &[bool]) -> LabeledDataset {
        LabeledDataset::from_validated(
            self.articles
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(a, _)| a.clone())
                .collect(),
        )
    }
}

impl<'de> Deserialize<'de> for LabeledDataset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let articles = Vec::<Article>::deserialize(deserializer)?;
        LabeledDataset::new(articles).map_err(serde::de::Error::custom)
    }
}

/// Reads a JSONL dataset, preserving article and sentence order. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other.context(path.display().to_string()),
    })
}

pub fn read_dataset(reader: impl BufRead) -> Result<LabeledDataset> {
    let mut articles = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        article.validate().map_err(|message| Error::Schema {
            line: line_no,
            message,
        })?;
        if !seen.insert(article.id.clone()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: article.id,
            });
        }
        articles.push(article);
    }
    Ok(LabeledDataset::from_validated(articles))
}

pub fn write_dataset(dataset: &LabeledDataset, writer: impl Write) -> Result<()> {
    let mut writer = writer;
    for article in dataset.articles() {
        serde_json::to_writer(&mut writer, article)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<output>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<output>", e))
}

pub fn save_dataset(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Keeps only news articles, in original order.
pub fn filter_news(dataset: &LabeledDataset) -> Result<LabeledDataset> {
    let keep: Vec<bool> = dataset
        .articles()
        .iter()
        .map(|a| a.domain == Domain::News)
        .collect();
    let news = dataset.retain_indices(&keep);
    if news.is_empty() {
        return Err(Error::EmptyDataset(
            "dataset contains no news articles".into(),
        ));
    }
    Ok(news)
}

/// Uniformly samples `k` of `0..n` without replacement (partial Fisher-Yates).
fn sample_indices<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Keeps every news article and a seeded uniform sample of academic articles of the same size.
/// Output keeps the input's article order.
pub fn undersample_academic(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let academic: Vec<usize> = dataset
        .articles()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.domain == Domain::Academic)
        .map(|(i, _)| i)
        .collect();
    let news = dataset.len() - academic.len();
    if academic.len() < news {
        return Err(Error::Precondition(format!(
            "under-sampling needs at least as many academic as news articles ({} academic, {} news)",
            academic.len(),
            news
        )));
    }
    let mut rng = rng_for(seed, STREAM_UNDERSAMPLE);
    let mut keep: Vec<bool> = dataset
        .articles()
        .iter()
        .map(|a| a.domain == Domain::News)
        .collect();
    for pick in sample_indices(&mut rng, academic.len(), news) {
        keep[academic[pick]] = true;
    }
    Ok(dataset.retain_indices(&keep))
}

/// Number of training articles for a split of `n` articles: `round(fraction * n)` clamped to `[1, n-1]`.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    let raw = (train_fraction * n as f64).round() as usize;
    raw.clamp(1, n - 1)
}

/// Article-level seeded split. Both sides keep the input's article order.
pub fn split_articles(
    dataset: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "splitting needs at least 2 articles, got {n}"
        )));
    }
    let k = train_size(n, train_fraction);
    let mut rng = rng_for(seed, STREAM_SPLIT);
    let mut in_train = vec![false; n];
    for i in sample_indices(&mut rng, n, k) {
        in_train[i] = true;
    }
    let in_validation: Vec<bool> = in_train.iter().map(|t| !t).collect();
    Ok((
        dataset.retain_indices(&in_train),
        dataset.retain_indices(&in_validation),
    ))
}
