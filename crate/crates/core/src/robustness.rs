//! Paraphrase attack: rewrite machine-labeled validation sentences and measure
//! how the classifier's agreement with the original labels changes.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::corpus::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::TfidfModel;
use crate::llmclient::{paraphrase_chain, ParaphraseConfig, ParaphraseError, Paraphraser, MAX_PASSES};
use crate::metrics::RunMetrics;
use crate::nb::NbModel;

pub const REPORT_FORMAT: &str = "hybriddetect-robustness";
pub const REPORT_VERSION: u32 = 1;

/// Network failures tolerated before any rewrite has succeeded; past this the
/// remaining sentences are skipped and the attack fails with the network error.
const UNREACHABLE_AFTER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub article_id: String,
    pub position: usize,
    pub label: Label,
    pub original: String,
    /// Rewritten text after pass 1 and pass 2; `None` where that pass failed
    /// or the sentence was not attacked.
    pub rewrites: Vec<Option<String>>,
    pub prediction_before: Label,
    /// Prediction on the text used for each pass count.
    pub predictions_after: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub passes: u32,
    pub metrics: RunMetrics,
    /// Machine sentences whose rewrite for this pass count failed and kept the original text.
    pub failed_rewrites: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraserEcho {
    pub name: String,
    pub model: String,
    pub temperature: f64,
    pub prompt_template: String,
    pub prompt_overridden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub format: String,
    pub version: u32,
    pub paraphraser: ParaphraserEcho,
    pub sentences: usize,
    pub machine_sentences: usize,
    pub baseline: RunMetrics,
    pub attacked: Vec<AttackResult>,
    pub records: Vec<SentenceRecord>,
}

impl RobustnessReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: RobustnessReport = serde_json::from_str(text)?;
        if report.format != REPORT_FORMAT || report.version != REPORT_VERSION {
            return Err(Error::Format(format!(
                "expected {REPORT_FORMAT} v{REPORT_VERSION}, found {} v{}",
                report.format, report.version
            )));
        }
        Ok(report)
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "paraphraser: {}  sentences: {} ({} machine)\n{:<10} kappa {:.4}  F1 {:.4}  acc {:.4}\n",
            self.paraphraser.name,
            self.sentences,
            self.machine_sentences,
            "baseline",
            self.baseline.kappa,
            self.baseline.weighted_f1,
            self.baseline.accuracy
        );
        for a in &self.attacked {
            out.push_str(&format!(
                "{:<10} kappa {:.4}  F1 {:.4}  acc {:.4}  (Δkappa {:+.4}, {} failed rewrites)\n",
                format!("{} pass{}", a.passes, if a.passes == 1 { "" } else { "es" }),
                a.metrics.kappa,
                a.metrics.weighted_f1,
                a.metrics.accuracy,
                a.metrics.kappa - self.baseline.kappa,
                a.failed_rewrites
            ));
        }
        out
    }
}

/// Classifies every validation sentence, rewrites each machine-labeled sentence
/// for one and two passes, and re-classifies against the original labels.
/// Human sentences are never rewritten. A failed rewrite keeps the original
/// text for that pass and is flagged on its record, unless no rewrite succeeded
/// at all and the failures were network errors, in which case the attack fails.
pub fn paraphrase_attack(
    validation: &LabeledDataset,
    tfidf: &TfidfModel,
    model: &NbModel,
    paraphraser: &dyn Paraphraser,
    config: &ParaphraseConfig,
) -> Result<RobustnessReport> {
    config.validate()?;
    let bundle = ModelBundle {
        tfidf: tfidf.clone(),
        nb: model.clone(),
    };
    attack_bundle(validation, &bundle, paraphraser, config)
}

pub fn attack_bundle(
    validation: &LabeledDataset,
    bundle: &ModelBundle,
    paraphraser: &dyn Paraphraser,
    config: &ParaphraseConfig,
) -> Result<RobustnessReport> {
    config.validate()?;
    let items: Vec<(&str, usize, &crate::corpus::Sentence)> = validation
        .articles()
        .iter()
        .flat_map(|a| a.sentences.iter().enumerate().map(move |(i, s)| (a.id.as_str(), i, s)))
        .collect();
    if items.is_empty() {
        return Err(Error::EmptyDataset("validation set has no sentences".into()));
    }
    let machine_sentences = items.iter().filter(|(_, _, s)| s.label == Label::Machine).count();
    if machine_sentences == 0 {
        return Err(Error::Precondition(
            "validation set contains no machine-labeled sentences to rewrite".into(),
        ));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let succeeded = AtomicBool::new(false);
    let network_failures = AtomicUsize::new(0);
    let rewrites: Vec<(Vec<String>, Option<ParaphraseError>)> = pool.install(|| {
        items
            .par_iter()
            .map(|(_, _, s)| {
                if s.label == Label::Human {
                    return (Vec::new(), None);
                }
                if !succeeded.load(Ordering::Relaxed)
                    && network_failures.load(Ordering::Relaxed) >= UNREACHABLE_AFTER
                {
                    return (Vec::new(), Some(ParaphraseError::Transport("skipped: endpoint unreachable".into())));
                }
                let (outputs, err) = paraphrase_chain(paraphraser, &s.text, config, MAX_PASSES);
                if !outputs.is_empty() {
                    succeeded.store(true, Ordering::Relaxed);
                }
                if err.as_ref().is_some_and(ParaphraseError::is_network) {
                    network_failures.fetch_add(1, Ordering::Relaxed);
                }
                (outputs, err)
            })
            .collect()
    });
    if !succeeded.load(Ordering::Relaxed) {
        if let Some(err) = rewrites.iter().find_map(|(_, e)| e.as_ref().filter(|e| e.is_network())) {
            return Err(Error::Paraphrase(err.clone()));
        }
    }

    let truth: Vec<Label> = items.iter().map(|(_, _, s)| s.label).collect();
    let before = bundle.predict_all(items.iter().map(|(_, _, s)| s.text.as_str()))?;
    let baseline = RunMetrics::from_labels(&truth, &before, 0)?;

    let mut records: Vec<SentenceRecord> = items
        .iter()
        .zip(&before)
        .zip(&rewrites)
        .map(|(((article_id, position, s), &prediction_before), (outputs, failure))| SentenceRecord {
            article_id: article_id.to_string(),
            position: *position,
            label: s.label,
            original: s.text.clone(),
            rewrites: (0..MAX_PASSES as usize).map(|p| outputs.get(p).cloned()).collect(),
            prediction_before,
            predictions_after: Vec::with_capacity(MAX_PASSES as usize),
            failure: failure.as_ref().map(ToString::to_string),
        })
        .collect();

    let mut attacked = Vec::with_capacity(MAX_PASSES as usize);
    for pass in 1..=MAX_PASSES {
        let idx = pass as usize - 1;
        let mut failed = 0;
        let mut predicted = Vec::with_capacity(records.len());
        for record in &mut records {
            let label = match (record.label, &record.rewrites[idx]) {
                (Label::Human, _) => record.prediction_before,
                (Label::Machine, Some(text)) => bundle.predict(text)?,
                (Label::Machine, None) => {
                    failed += 1;
                    record.prediction_before
                }
            };
            record.predictions_after.push(label);
            predicted.push(label);
        }
        attacked.push(AttackResult {
            passes: pass,
            metrics: RunMetrics::from_labels(&truth, &predicted, 0)?,
            failed_rewrites: failed,
        });
    }

    Ok(RobustnessReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        paraphraser: ParaphraserEcho {
            name: paraphraser.name(),
            model: config.model.clone(),
            temperature: config.temperature,
            prompt_template: config.prompt_template.clone(),
            prompt_overridden: config.prompt_overridden(),
        },
        sentences: items.len(),
        machine_sentences,
        baseline,
        attacked,
        records,
    })
}
