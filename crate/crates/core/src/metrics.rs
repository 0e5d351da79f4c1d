//! Confusion matrices, Cohen's kappa, weighted F1 and multi-seed aggregates.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Standard deviation estimator used for every aggregate.
pub const STD_ESTIMATOR: &str = "sample standard deviation (divisor n - 1)";

/// 2×2 counts; rows are true labels, columns predictions, both in `[Human, Machine]` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Result<Self> {
        let m = ConfusionMatrix { counts };
        if m.total() == 0 {
            return Err(Error::InvalidParameter("confusion matrix is empty".into()));
        }
        Ok(m)
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidParameter(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::InvalidParameter("no labels to compare".into()));
        }
        let mut counts = [[0u64; 2]; 2];
        for (t, p) in truth.iter().zip(predicted) {
            counts[t.index()][p.index()] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Cohen's kappa. When chance agreement is 1 (a single class in both marginals),
    /// returns 1.0 for perfect agreement and 0.0 otherwise.
    pub fn kappa(&self) -> f64 {
        let n = self.total() as f64;
        let observed = self.trace() as f64 / n;
        let chance = (0..2)
            .map(|c| self.row_sum(c) as f64 * self.col_sum(c) as f64)
            .sum::<f64>()
            / (n * n);
        if chance >= 1.0 {
            return if observed >= 1.0 { 1.0 } else { 0.0 };
        }
        (observed - chance) / (1.0 - chance)
    }

    /// Per-class F1, zero where precision or recall is undefined or the diagonal is zero.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let predicted = self.col_sum(class) as f64;
        let actual = self.row_sum(class) as f64;
        if tp == 0.0 || predicted == 0.0 || actual == 0.0 {
            return 0.0;
        }
        let precision = tp / predicted;
        let recall = tp / actual;
        2.0 * precision * recall / (precision + recall)
    }

    /// Support-weighted mean of per-class F1.
    pub fn weighted_f1(&self) -> f64 {
        let n = self.total() as f64;
        (0..2)
            .map(|c| self.row_sum(c) as f64 * self.f1(c))
            .sum::<f64>()
            / n
    }
}

pub fn confusion_matrix(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_labels(truth, predicted)
}

pub fn cohen_kappa(matrix: &ConfusionMatrix) -> f64 {
    matrix.kappa()
}

pub fn weighted_f1(matrix: &ConfusionMatrix) -> f64 {
    matrix.weighted_f1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub kappa: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub matrix: ConfusionMatrix,
}

impl RunMetrics {
    pub fn from_matrix(matrix: ConfusionMatrix, seed: u64) -> Self {
        RunMetrics {
            seed,
            kappa: matrix.kappa(),
            weighted_f1: matrix.weighted_f1(),
            accuracy: matrix.accuracy(),
            matrix,
        }
    }

    pub fn from_labels(truth: &[Label], predicted: &[Label], seed: u64) -> Result<Self> {
        Ok(Self::from_matrix(confusion_matrix(truth, predicted)?, seed))
    }
}

/// Mean and sample standard deviation. `std` is `None` for a single observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        });
        Some(Summary { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub kappa: Summary,
    pub weighted_f1: Summary,
    pub accuracy: Summary,
    /// Set when fewer than two runs were available and standard deviations are undefined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AggregateMetrics {
    /// Aggregates any non-empty set of runs; with one run the std fields are absent and
    /// `note` carries an "insufficient runs" marker.
    pub fn summarize(runs: &[RunMetrics]) -> Result<Self> {
        let pick = |f: fn(&RunMetrics) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
        let summary = |values: Vec<f64>| {
            Summary::of(&values).ok_or_else(|| Error::InvalidParameter("no runs to aggregate".into()))
        };
        Ok(AggregateMetrics {
            runs: runs.len(),
            kappa: summary(pick(|r| r.kappa))?,
            weighted_f1: summary(pick(|r| r.weighted_f1))?,
            accuracy: summary(pick(|r| r.accuracy))?,
            note: (runs.len() < 2).then(|| "insufficient runs for standard deviation".to_string()),
        })
    }
}

/// Mean and sample std over at least two runs.
pub fn aggregate_runs(runs: &[RunMetrics]) -> Result<AggregateMetrics> {
    if runs.len() < 2 {
        return Err(Error::Precondition(format!(
            "aggregating needs at least 2 runs, got {}",
            runs.len()
        )));
    }
    AggregateMetrics::summarize(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Human as H, Machine as M};

    fn m(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(counts).unwrap()
    }

    fn run(kappa: f64) -> RunMetrics {
        RunMetrics {
            seed: 0,
            kappa,
            weighted_f1: kappa,
            accuracy: kappa,
            matrix: m([[1, 0], [0, 1]]),
        }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(
            confusion_matrix(&[H, H, M], &[H, M, M]).unwrap().counts,
            [[1, 1], [0, 1]]
        );
        let same = confusion_matrix(&[H, M, M, H], &[H, M, M, H]).unwrap();
        assert_eq!(same.counts[0][1] + same.counts[1][0], 0);
        assert!(confusion_matrix(&[H, H], &[H]).is_err());
        assert!(confusion_matrix(&[], &[]).is_err());
        assert!(ConfusionMatrix::from_counts([[0, 0], [0, 0]]).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert!((m([[40, 10], [5, 45]]).kappa() - 0.70).abs() < 1e-12);
        assert_eq!(m([[50, 0], [0, 50]]).kappa(), 1.0);
        assert!(m([[25, 25], [25, 25]]).kappa().abs() < 1e-12);
        // single class in both marginals
        assert_eq!(m([[10, 0], [0, 0]]).kappa(), 1.0);
    }

    #[test]
    fn weighted_f1_examples() {
        let mat = m([[40, 10], [5, 45]]);
        assert!((mat.f1(0) - 64.0 / 76.0).abs() < 1e-12);
        assert!((mat.f1(1) - 90.0 / 105.0).abs() < 1e-12);
        assert!((mat.weighted_f1() - 0.849624).abs() < 1e-6);
        assert_eq!(m([[3, 0], [0, 7]]).weighted_f1(), 1.0);

        let all_machine = confusion_matrix(&[H, M], &[M, M]).unwrap();
        assert_eq!(all_machine.f1(0), 0.0);
        assert!((all_machine.f1(1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((all_machine.weighted_f1() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        let agg = aggregate_runs(&[run(0.7), run(0.7), run(0.7)]).unwrap();
        assert!((agg.kappa.mean - 0.7).abs() < 1e-12);
        assert!(agg.kappa.std.unwrap().abs() < 1e-12);

        let agg = aggregate_runs(&[run(0.6), run(0.8)]).unwrap();
        assert!((agg.kappa.mean - 0.7).abs() < 1e-12);
        assert!((agg.kappa.std.unwrap() - 0.141421).abs() < 1e-6);

        assert!(aggregate_runs(&[run(0.5)]).is_err());
        let single = AggregateMetrics::summarize(&[run(0.5)]).unwrap();
        assert_eq!(single.kappa.std, None);
        assert!(single.note.is_some());
    }

    fn matrix_strategy() -> impl Strategy<Value = ConfusionMatrix> {
        [[0u64..50, 0u64..50], [0u64..50, 0u64..50]]
            .prop_filter("non-empty", |c| c.iter().flatten().sum::<u64>() > 0)
            .prop_map(|counts| ConfusionMatrix { counts })
    }

    proptest! {
        #[test]
        fn kappa_invariant_under_relabeling(mat in matrix_strategy()) {
            let c = mat.counts;
            let swapped = ConfusionMatrix { counts: [[c[1][1], c[1][0]], [c[0][1], c[0][0]]] };
            prop_assert!((mat.kappa() - swapped.kappa()).abs() < 1e-12);
        }

        #[test]
        fn kappa_one_iff_diagonal(mat in matrix_strategy()) {
            let diagonal = mat.counts[0][1] == 0 && mat.counts[1][0] == 0;
            prop_assert_eq!(mat.kappa() == 1.0, diagonal);
            prop_assert_eq!(mat.weighted_f1() == 1.0, diagonal);
        }

        #[test]
        fn scores_in_range(mat in matrix_strategy()) {
            prop_assert!((0.0..=1.0).contains(&mat.weighted_f1()));
            prop_assert!((0.0..=1.0).contains(&mat.accuracy()));
            prop_assert!((-1.0..=1.0).contains(&mat.kappa()));
        }

        #[test]
        fn aggregate_mean_order_free(mut kappas in prop::collection::vec(-1.0f64..1.0, 2..20)) {
            let a = aggregate_runs(&kappas.iter().map(|&k| run(k)).collect::<Vec<_>>()).unwrap();
            kappas.reverse();
            let b = aggregate_runs(&kappas.iter().map(|&k| run(k)).collect::<Vec<_>>()).unwrap();
            prop_assert!((a.kappa.mean - b.kappa.mean).abs() < 1e-12);
            prop_assert!(a.kappa.std.unwrap() >= 0.0);
        }
    }
}
