//! Sentence-level detection of machine-generated text in hybrid human/AI articles.
//!
//! The pipeline is a word n-gram (n ≤ 5) TF-IDF vectorizer feeding a two-class
//! multinomial Naive Bayes model. Around it sit the evaluation harness (three
//! dataset variants, repeated seeded holdout, Cohen's kappa and weighted F1),
//! a paraphrase-attack harness driven by an OpenAI-compatible chat endpoint or
//! offline rewriters, and run-length statistics of label blocks within articles.
//!
//! ```no_run
//! use hybriddetect::{corpus, ModelBundle, TrainParams};
//!
//! let data = corpus::load_dataset("train.jsonl")?;
//! let bundle = ModelBundle::train(data.sentences(), TrainParams::default())?;
//! println!("{}", bundle.predict("It is important to note that the council met.")?);
//! # Ok::<(), hybriddetect::Error>(())
//! ```

pub mod blockstats;
pub mod bundle;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod features;
pub mod llmclient;
pub mod metrics;
pub mod nb;
pub mod robustness;
pub mod seeding;
pub mod synthetic;

pub use bundle::{ModelBundle, TrainParams};
pub use corpus::{Article, Domain, Label, LabeledDataset, Sentence};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ResultsTable, Variant};
pub use features::{SparseVector, TfidfModel, TfidfParams};
pub use metrics::{AggregateMetrics, ConfusionMatrix, RunMetrics};
pub use nb::NbModel;
