//! Two-class multinomial Naive Bayes over TF-IDF weights.
//!
//! Fractional TF-IDF weights act as pseudo-counts:
//!
//! ```text
//! θ[g][c] = (α + Σ_{i∈c} w[i][g]) / (α·V + Σ_{i∈c} Σ_h w[i][h])
//! score(c) = ln prior(c) + Σ_g w[g] · ln θ[g][c]
//! ```

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::SparseVector;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    classes: [Label; 2],
    alpha: f64,
    class_log_prior: [f64; 2],
    /// `feature_log_likelihood[class][feature]`
    feature_log_likelihood: [Vec<f64>; 2],
}

impl NbModel {
    pub fn fit(vectors: &[SparseVector], labels: &[Label], n_features: usize, alpha: f64) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        if n_features == 0 {
            return Err(Error::InvalidParameter("vocabulary size must be positive".into()));
        }
        let mut class_counts = [0usize; 2];
        let mut feature_mass = [vec![0.0f64; n_features], vec![0.0f64; n_features]];
        for (v, &label) in vectors.iter().zip(labels) {
            let c = label.index();
            class_counts[c] += 1;
            for &(g, w) in v.entries() {
                if g >= n_features {
                    return Err(Error::FeatureOutOfBounds {
                        index: g,
                        size: n_features,
                    });
                }
                feature_mass[c][g] += w;
            }
        }
        if class_counts.contains(&0) {
            return Err(Error::Precondition(format!(
                "training data must contain both classes (human: {}, machine: {})",
                class_counts[0], class_counts[1]
            )));
        }
        let total = vectors.len() as f64;
        let class_log_prior = class_counts.map(|n| (n as f64 / total).ln());
        let smoothing = alpha * n_features as f64;
        let feature_log_likelihood = feature_mass.map(|mass| {
            let log_denominator = (smoothing + mass.iter().sum::<f64>()).ln();
            mass.iter()
                .map(|&m| (alpha + m).ln() - log_denominator)
                .collect()
        });
        Ok(NbModel {
            classes: Label::ALL,
            alpha,
            class_log_prior,
            feature_log_likelihood,
        })
    }

    /// Builds a model directly from probabilities; used to hand-construct small models.
    pub fn from_probabilities(class_prior: [f64; 2], likelihood: [Vec<f64>; 2], alpha: f64) -> Result<Self> {
        if likelihood[0].len() != likelihood[1].len() {
            return Err(Error::InvalidParameter("likelihood rows differ in length".into()));
        }
        let model = NbModel {
            classes: Label::ALL,
            alpha,
            class_log_prior: class_prior.map(f64::ln),
            feature_log_likelihood: likelihood.map(|row| row.into_iter().map(f64::ln).collect()),
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.classes != Label::ALL {
            return Err(Error::Format("class order must be [human, machine]".into()));
        }
        if self.feature_log_likelihood[0].len() != self.feature_log_likelihood[1].len() {
            return Err(Error::Format("likelihood rows differ in length".into()));
        }
        let all_finite = self.class_log_prior.iter().all(|x| x.is_finite())
            && self.feature_log_likelihood.iter().flatten().all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::Format("non-finite log probability".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_log_likelihood[0].len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn classes(&self) -> [Label; 2] {
        self.classes
    }

    pub fn class_log_prior(&self) -> [f64; 2] {
        self.class_log_prior
    }

    pub fn feature_log_likelihood(&self, label: Label) -> &[f64] {
        &self.feature_log_likelihood[label.index()]
    }

    /// Unnormalized log-posterior per class, in `[Human, Machine]` order.
    pub fn log_posterior(&self, vector: &SparseVector) -> Result<[f64; 2]> {
        let size = self.n_features();
        let mut scores = self.class_log_prior;
        for &(g, w) in vector.entries() {
            if g >= size {
                return Err(Error::FeatureOutOfBounds { index: g, size });
            }
            for (c, score) in scores.iter_mut().enumerate() {
                *score += w * self.feature_log_likelihood[c][g];
            }
        }
        Ok(scores)
    }

    /// Argmax of the log-posterior; an exact tie goes to `Human`.
    pub fn predict(&self, vector: &SparseVector) -> Result<Label> {
        let [human, machine] = self.log_posterior(vector)?;
        Ok(if machine > human { Label::Machine } else { Label::Human })
    }
}
