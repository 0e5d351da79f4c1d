//! Repeated seeded holdout evaluation over the three dataset variants.
//!
//! For every `(variant, seed)` pair the seed drives both the academic
//! under-sampling and the article split, TF-IDF + Naive Bayes are fitted on the
//! training sentences, and the validation sentences are scored. Runs are
//! independent, so they execute on a worker pool and completed runs are
//! appended to a checkpoint file that a restarted experiment picks up.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{ModelBundle, TrainParams};
use crate::corpus::{self, Domain, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics::{AggregateMetrics, RunMetrics, STD_ESTIMATOR};
use crate::seeding::RNG_IDENTIFIER;

pub const RESULTS_FORMAT: &str = "hybriddetect-results";
pub const RESULTS_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "runs.jsonl";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    AllData,
    UnderSample,
    NewsOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::AllData, Variant::UnderSample, Variant::NewsOnly];

    pub fn id(self) -> &'static str {
        match self {
            Variant::AllData => "all-data",
            Variant::UnderSample => "under-sample",
            Variant::NewsOnly => "news-only",
        }
    }

    /// Dataset variant names as they appear in result tables.
    pub fn title(self) -> &'static str {
        match self {
            Variant::AllData => "All Data",
            Variant::UnderSample => "Sampling",
            Variant::NewsOnly => "Only News",
        }
    }

    /// Derives the training population for this variant. Only `UnderSample` uses the seed.
    pub fn derive<'a>(self, dataset: &'a LabeledDataset, seed: u64) -> Result<Cow<'a, LabeledDataset>> {
        Ok(match self {
            Variant::AllData => {
                if dataset.is_empty() {
                    return Err(Error::EmptyDataset("dataset has no articles".into()));
                }
                Cow::Borrowed(dataset)
            }
            Variant::UnderSample => Cow::Owned(corpus::undersample_academic(dataset, seed)?),
            Variant::NewsOnly => Cow::Owned(corpus::filter_news(dataset)?),
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variant {s:?}")))
    }
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_runs() -> usize {
    100
}

fn default_train_fraction() -> f64 {
    corpus::DEFAULT_TRAIN_FRACTION
}

fn default_true() -> bool {
    true
}

/// Experiment configuration, read from TOML:
///
/// ```toml
/// dataset = "train.jsonl"
/// variants = ["all-data", "under-sample", "news-only"]
/// base_seed = 0
/// runs = 100            # or: seeds = [3, 17, 42]
/// train_fraction = 0.8
/// n_max = 5
/// min_df = 2
/// alpha = 1.0
/// news_only_validation = true
/// output_dir = "results"
/// workers = 4
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Score only news-domain validation articles.
    #[serde(default = "default_true")]
    pub news_only_validation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Reuse completed runs from the checkpoint file in `output_dir`.
    #[serde(default = "default_true")]
    pub resume: bool,
}

fn default_n_max() -> usize {
    TrainParams::default().n_max
}

fn default_min_df() -> usize {
    TrainParams::default().min_df
}

fn default_alpha() -> f64 {
    TrainParams::default().alpha
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            dataset: dataset.into(),
            variants: default_variants(),
            seeds: None,
            base_seed: 0,
            runs: default_runs(),
            train_fraction: default_train_fraction(),
            n_max: default_n_max(),
            min_df: default_min_df(),
            alpha: default_alpha(),
            news_only_validation: true,
            output_dir: None,
            workers: None,
            resume: true,
        }
    }

    /// Parses TOML; a relative `dataset` path is resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        if let Some(base) = base_dir {
            if config.dataset.is_relative() {
                config.dataset = base.join(&config.dataset);
            }
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
            .map_err(|e| e.context(path.display().to_string()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(seeds) => seeds.clone(),
            None => (0..self.runs as u64).map(|i| self.base_seed.wrapping_add(i)).collect(),
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            n_max: self.n_max,
            min_df: self.min_df,
            alpha: self.alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.variants.is_empty() {
            return bad("at least one variant is required".into());
        }
        if self.seed_list().is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(1..=crate::features::MAX_NGRAM).contains(&self.n_max) {
            return bad(format!("n_max must lie in 1..=5, got {}", self.n_max));
        }
        if self.min_df == 0 {
            return bad("min_df must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }
}

/// The settings that determine results; output location and parallelism are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dataset: String,
    pub dataset_sha256: String,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub n_max: usize,
    pub min_df: usize,
    pub alpha: f64,
    pub news_only_validation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: Variant,
    pub aggregate: Option<AggregateMetrics>,
    pub runs: Vec<RunMetrics>,
    #[serde(default)]
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub rng: String,
    pub std_estimator: String,
    pub config: ConfigEcho,
    pub variants: Vec<VariantResult>,
}

impl ResultsTable {
    pub fn variant(&self, variant: Variant) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.variant == variant)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: ResultsTable = serde_json::from_str(text)?;
        if table.format != RESULTS_FORMAT || table.version != RESULTS_VERSION {
            return Err(Error::Format(format!(
                "expected {RESULTS_FORMAT} v{RESULTS_VERSION}, found {} v{}",
                table.format, table.version
            )));
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.variants
            .iter()
            .map(|v| {
                let agg = v.aggregate.as_ref();
                CsvRow {
                    dataset: v.variant,
                    kappa_mean: agg.map(|a| a.kappa.mean),
                    kappa_std: agg.and_then(|a| a.kappa.std),
                    f1_weighted_mean: agg.map(|a| a.weighted_f1.mean),
                    f1_weighted_std: agg.and_then(|a| a.weighted_f1.std),
                    accuracy_mean: agg.map(|a| a.accuracy.mean),
                    runs: v.runs.len(),
                    failed_runs: v.failures.len(),
                }
            })
            .collect()
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in self.csv_rows() {
            out.serialize(row)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Writes `results.json` and `results.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json_path = dir.join(RESULTS_JSON);
        fs::write(&json_path, self.to_json()?).map_err(|e| Error::io(&json_path, e))?;
        let csv_path = dir.join(RESULTS_CSV);
        let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(file)
    }

    /// One line per variant: `Only News    κ 0.716 ± 0.030   F1 0.870 ± 0.014   (100 runs)`.
    pub fn summary(&self) -> String {
        let fmt = |s: Option<f64>| s.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        let mut out = String::new();
        for v in &self.variants {
            match &v.aggregate {
                Some(a) => out.push_str(&format!(
                    "{:<10} kappa {:.3} ± {}   F1 {:.3} ± {}   ({} runs",
                    v.variant.title(),
                    a.kappa.mean,
                    fmt(a.kappa.std),
                    a.weighted_f1.mean,
                    fmt(a.weighted_f1.std),
                    a.runs
                )),
                None => out.push_str(&format!("{:<10} no successful runs (", v.variant.title())),
            }
            if !v.failures.is_empty() {
                out.push_str(&format!(", {} failed: {}", v.failures.len(), v.failures[0].message));
            }
            out.push_str(")\n");
        }
        out
    }
}

/// A row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub dataset: Variant,
    pub kappa_mean: Option<f64>,
    pub kappa_std: Option<f64>,
    pub f1_weighted_mean: Option<f64>,
    pub f1_weighted_std: Option<f64>,
    pub accuracy_mean: Option<f64>,
    pub runs: usize,
    pub failed_runs: usize,
}

pub fn read_results_csv(reader: impl std::io::Read) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Settings for a single train/evaluate cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub train_fraction: f64,
    pub params: TrainParams,
    pub news_only_validation: bool,
}

impl From<&ExperimentConfig> for RunSettings {
    fn from(config: &ExperimentConfig) -> Self {
        RunSettings {
            train_fraction: config.train_fraction,
            params: config.train_params(),
            news_only_validation: config.news_only_validation,
        }
    }
}

/// One seeded cycle on an already-derived variant dataset: split, fit, score.
pub fn evaluate_split(population: &LabeledDataset, seed: u64, settings: &RunSettings) -> Result<RunMetrics> {
    let (train, validation) = corpus::split_articles(population, settings.train_fraction, seed)?;
    let bundle = ModelBundle::train(train.sentences(), settings.params)?;
    let scored: Vec<_> = validation
        .articles()
        .iter()
        .filter(|a| !settings.news_only_validation || a.domain == Domain::News)
        .flat_map(|a| a.sentences.iter())
        .collect();
    if scored.is_empty() {
        return Err(Error::EmptyDataset(
            "validation split contains no news-domain sentences".into(),
        ));
    }
    let truth: Vec<_> = scored.iter().map(|s| s.label).collect();
    let predicted = bundle.predict_all(scored.iter().map(|s| s.text.as_str()))?;
    RunMetrics::from_labels(&truth, &predicted, seed)
}

/// Full cycle for one `(variant, seed)` pair.
pub fn run_single(dataset: &LabeledDataset, variant: Variant, seed: u64, settings: &RunSettings) -> Result<RunMetrics> {
    let population = variant.derive(dataset, seed)?;
    evaluate_split(&population, seed, settings)
}

#[derive(Serialize, Deserialize)]
struct CheckpointLine {
    fingerprint: String,
    variant: Variant,
    seed: u64,
    metrics: RunMetrics,
}

struct Checkpoint {
    path: PathBuf,
    file: Mutex<File>,
}

impl Checkpoint {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CHECKPOINT_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(Checkpoint {
            path,
            file: Mutex::new(file),
        })
    }

    fn read(&self, fingerprint: &str) -> Result<HashMap<(Variant, u64), RunMetrics>> {
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let mut done = HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            // a torn final line from a crash is skipped
            let Ok(entry) = serde_json::from_str::<CheckpointLine>(&line) else {
                continue;
            };
            if entry.fingerprint == fingerprint {
                done.insert((entry.variant, entry.seed), entry.metrics);
            }
        }
        Ok(done)
    }

    fn append(&self, fingerprint: &str, variant: Variant, seed: u64, metrics: &RunMetrics) -> Result<()> {
        let mut line = serde_json::to_string(&CheckpointLine {
            fingerprint: fingerprint.to_string(),
            variant,
            seed,
            metrics: metrics.clone(),
        })?;
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

fn fingerprint(echo: &ConfigEcho) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    hasher.update(echo.dataset_sha256.as_bytes());
    hasher.update(
        serde_json::to_string(&(
            echo.train_fraction,
            echo.n_max,
            echo.min_df,
            echo.alpha,
            echo.news_only_validation,
        ))?
        .as_bytes(),
    );
    Ok(hex::encode(hasher.finalize()))
}

/// Runs every configured `(variant, seed)` pair and aggregates per variant.
/// Per-run failures are recorded in the table rather than aborting the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsTable> {
    config.validate()?;
    let bytes = fs::read(&config.dataset).map_err(|e| Error::io(&config.dataset, e))?;
    let dataset = corpus::read_dataset(bytes.as_slice())
        .map_err(|e| e.context(config.dataset.display().to_string()))?;
    let seeds = config.seed_list();
    let echo = ConfigEcho {
        dataset: config.dataset.display().to_string(),
        dataset_sha256: hex::encode(Sha256::digest(&bytes)),
        variants: config.variants.clone(),
        seeds: seeds.clone(),
        train_fraction: config.train_fraction,
        n_max: config.n_max,
        min_df: config.min_df,
        alpha: config.alpha,
        news_only_validation: config.news_only_validation,
    };
    let fingerprint = fingerprint(&echo)?;
    let checkpoint = config.output_dir.as_deref().map(Checkpoint::open).transpose()?;
    let done = match (&checkpoint, config.resume) {
        (Some(cp), true) => cp.read(&fingerprint)?,
        _ => HashMap::new(),
    };
    if !done.is_empty() {
        log::info!("resuming: {} runs already complete", done.len());
    }

    let settings = RunSettings::from(config);
    let jobs: Vec<(Variant, u64)> = config
        .variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let execute = || -> Vec<Result<RunMetrics>> {
        jobs.par_iter()
            .map(|&(variant, seed)| {
                if let Some(m) = done.get(&(variant, seed)) {
                    return Ok(m.clone());
                }
                let result = run_single(&dataset, variant, seed, &settings)
                    .map_err(|e| e.context(format!("variant {variant}, seed {seed}")));
                if let (Ok(metrics), Some(cp)) = (&result, &checkpoint) {
                    cp.append(&fingerprint, variant, seed, metrics)?;
                }
                log::debug!("finished {variant} seed {seed}");
                result
            })
            .collect()
    };
    let outcomes = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };

    let mut variants: Vec<VariantResult> = config
        .variants
        .iter()
        .map(|&variant| VariantResult {
            variant,
            aggregate: None,
            runs: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for ((variant, seed), outcome) in jobs.iter().zip(outcomes) {
        let row = variants
            .iter_mut()
            .find(|r| r.variant == *variant)
            .expect("job variant is configured");
        match outcome {
            Ok(metrics) => row.runs.push(metrics),
            Err(e) if e.is_network() || matches!(e, Error::Io { .. }) => return Err(e),
            Err(e) => row.failures.push(RunFailure {
                seed: *seed,
                message: e.to_string(),
            }),
        }
    }
    for row in &mut variants {
        if !row.runs.is_empty() {
            row.aggregate = Some(AggregateMetrics::summarize(&row.runs)?);
        }
    }
    Ok(ResultsTable {
        format: RESULTS_FORMAT.into(),
        version: RESULTS_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        rng: RNG_IDENTIFIER.into(),
        std_estimator: STD_ESTIMATOR.into(),
        config: echo,
        variants,
    })
}
