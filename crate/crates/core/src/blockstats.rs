//! Run-length structure of sentence labels within articles.
//!
//! The observed statistic is the pooled mean run length (total sentences over
//! total runs). The null distribution comes from shuffling labels within each
//! article, which keeps article lengths and per-article label counts fixed.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics::Summary;
use crate::seeding::{rng_for, RNG_IDENTIFIER, STREAM_PERMUTATION};

/// Lengths of maximal same-label runs, in order.
pub fn run_lengths(labels: &[Label]) -> Result<Vec<usize>> {
    let Some(first) = labels.first() else {
        return Err(Error::InvalidParameter("cannot take run lengths of an empty label sequence".into()));
    };
    let mut runs = Vec::new();
    let mut current = *first;
    let mut len = 0;
    for &label in labels {
        if label == current {
            len += 1;
        } else {
            runs.push(len);
            current = label;
            len = 1;
        }
    }
    runs.push(len);
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRuns {
    pub id: String,
    pub runs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub articles: Vec<ArticleRuns>,
    pub sentences: usize,
    pub total_runs: usize,
    pub observed_mean_run_length: f64,
    /// Mean length of human runs and machine runs; `None` when the label never occurs.
    pub human_mean_run_length: Option<f64>,
    pub machine_mean_run_length: Option<f64>,
    pub permutations: usize,
    pub seed: u64,
    pub baseline_mean: f64,
    /// Sample std of the permutation means; 0 when fewer than two permutations.
    pub baseline_std: f64,
    pub ratio: f64,
    /// `(observed − baseline_mean) / baseline_std`; `None` when the baseline has no spread.
    pub z_score: Option<f64>,
    pub rng: String,
}

impl BlockReport {
    pub fn summary(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        format!(
            "articles: {}  sentences: {}  runs: {}\n\
             observed mean run length: {:.3} (human {}, machine {})\n\
             permutation baseline ({} shuffles, seed {}): {:.3} ± {:.3}\n\
             ratio observed/baseline: {:.3}  z: {}\n",
            self.articles.len(),
            self.sentences,
            self.total_runs,
            self.observed_mean_run_length,
            fmt_opt(self.human_mean_run_length),
            fmt_opt(self.machine_mean_run_length),
            self.permutations,
            self.seed,
            self.baseline_mean,
            self.baseline_std,
            self.ratio,
            fmt_opt(self.z_score),
        )
    }
}

fn pooled_mean_run_length<'a>(label_seqs: impl Iterator<Item = &'a [Label]>) -> f64 {
    let (mut sentences, mut runs) = (0usize, 0usize);
    for labels in label_seqs {
        sentences += labels.len();
        runs += count_runs(labels);
    }
    sentences as f64 / runs as f64
}

fn count_runs(labels: &[Label]) -> usize {
    if labels.is_empty() {
        return 0;
    }
    1 + labels.windows(2).filter(|w| w[0] != w[1]).count()
}

pub fn block_report(dataset: &LabeledDataset, permutations: usize, seed: u64) -> Result<BlockReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("block analysis needs at least one article".into()));
    }
    if permutations == 0 {
        return Err(Error::InvalidParameter("permutations must be at least 1".into()));
    }
    let label_seqs: Vec<Vec<Label>> = dataset.articles().iter().map(|a| a.labels()).collect();

    let mut articles = Vec::with_capacity(label_seqs.len());
    let mut label_runs = [(0usize, 0usize); 2];
    for (article, labels) in dataset.articles().iter().zip(&label_seqs) {
        let runs = run_lengths(labels)?;
        let mut pos = 0;
        for &len in &runs {
            let slot = &mut label_runs[labels[pos].index()];
            slot.0 += len;
            slot.1 += 1;
            pos += len;
        }
        articles.push(ArticleRuns {
            id: article.id.clone(),
            runs,
        });
    }
    let sentences: usize = label_seqs.iter().map(Vec::len).sum();
    let total_runs: usize = articles.iter().map(|a| a.runs.len()).sum();
    let observed = sentences as f64 / total_runs as f64;
    let label_mean = |(s, r): (usize, usize)| (r > 0).then(|| s as f64 / r as f64);

    let baseline: Vec<f64> = (0..permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_for(seed, STREAM_PERMUTATION + p as u64);
            let shuffled: Vec<Vec<Label>> = label_seqs
                .iter()
                .map(|labels| {
                    let mut l = labels.clone();
                    l.shuffle(&mut rng);
                    l
                })
                .collect();
            pooled_mean_run_length(shuffled.iter().map(Vec::as_slice))
        })
        .collect();
    let stats = Summary::of(&baseline).expect("at least one permutation");
    let baseline_std = stats.std.unwrap_or(0.0);
    Ok(BlockReport {
        articles,
        sentences,
        total_runs,
        observed_mean_run_length: observed,
        human_mean_run_length: label_mean(label_runs[Label::Human.index()]),
        machine_mean_run_length: label_mean(label_runs[Label::Machine.index()]),
        permutations,
        seed,
        baseline_mean: stats.mean,
        baseline_std,
        ratio: observed / stats.mean,
        z_score: (baseline_std > 0.0).then(|| (observed - stats.mean) / baseline_std),
        rng: RNG_IDENTIFIER.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, Domain, Sentence};
    use proptest::prelude::*;
    use Label::{Human as H, Machine as M};

    fn dataset(seqs: &[Vec<Label>]) -> LabeledDataset {
        LabeledDataset::new(
            seqs.iter()
                .enumerate()
                .map(|(i, labels)| Article {
                    id: format!("a{i}"),
                    domain: Domain::News,
                    sentences: labels.iter().map(|&l| Sentence::new("s", l)).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn run_length_examples() {
        assert_eq!(run_lengths(&[H, H, M, M, M, H]).unwrap(), vec![2, 3, 1]);
        assert_eq!(run_lengths(&[H, H, H, H]).unwrap(), vec![4]);
        assert_eq!(run_lengths(&[H, M, H, M]).unwrap(), vec![1, 1, 1, 1]);
        assert!(run_lengths(&[]).is_err());
    }

    #[test]
    fn single_block_articles() {
        let ds = dataset(&[vec![H; 4], vec![M; 6], vec![H; 2]]);
        let report = block_report(&ds, 50, 1).unwrap();
        assert!((report.observed_mean_run_length - 4.0).abs() < 1e-12);
        assert!(report.ratio >= 1.0);
        assert_eq!(report.z_score, None);
    }

    #[test]
    fn per_label_means() {
        let ds = dataset(&[vec![H, H, M, M, M, H]]);
        let report = block_report(&ds, 10, 0).unwrap();
        assert_eq!(report.human_mean_run_length, Some(1.5));
        assert_eq!(report.machine_mean_run_length, Some(3.0));
        assert_eq!(report.articles[0].runs, vec![2, 3, 1]);
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = dataset(&[vec![H, H, M, M, M, H], vec![M, H, M, H, H], vec![H, M]]);
        assert_eq!(block_report(&ds, 200, 9).unwrap(), block_report(&ds, 200, 9).unwrap());
        assert!(block_report(&ds, 0, 9).is_err());
        assert!(block_report(&dataset(&[]), 10, 9).is_err());
    }

    fn labels_strategy() -> impl Strategy<Value = Vec<Label>> {
        prop::collection::vec(any::<bool>().prop_map(|b| if b { M } else { H }), 1..30)
    }

    proptest! {
        #[test]
        fn runs_reconstruct_sequence(labels in labels_strategy()) {
            let runs = run_lengths(&labels).unwrap();
            prop_assert!(runs.iter().all(|&r| r >= 1));
            prop_assert_eq!(runs.iter().sum::<usize>(), labels.len());
            let mut rebuilt = Vec::new();
            let mut label = labels[0];
            for r in runs {
                rebuilt.extend(std::iter::repeat_n(label, r));
                label = if label == H { M } else { H };
            }
            prop_assert_eq!(rebuilt, labels);
        }

        #[test]
        fn shuffle_preserves_label_multiset(labels in labels_strategy(), seed: u64) {
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut rng_for(seed, STREAM_PERMUTATION));
            let count = |v: &[Label]| v.iter().filter(|&&l| l == M).count();
            prop_assert_eq!(count(&shuffled), count(&labels));
            prop_assert_eq!(shuffled.len(), labels.len());
        }
    }
}
