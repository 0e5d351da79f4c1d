//! Synthetic hybrid-article corpus with planted machine signatures.
//!
//! Each article holds one contiguous block of machine sentences surrounded by
//! human sentences. Machine sentences carry a multi-word signature phrase drawn
//! from a per-domain list. In the academic domain a fraction of human sentences
//! also carry news-domain machine signatures (`academic_shift`), so academic
//! training data dilutes the news signal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Domain, Label, LabeledDataset, Sentence};
use crate::error::{Error, Result};
use crate::seeding::{rng_for, STREAM_SYNTHETIC};

const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "of", "to", "in", "and", "on", "for", "with", "at", "by", "from", "was", "is",
    "had", "has", "its", "their", "after", "before", "over", "under", "as", "but",
];

const NEWS_WORDS: &[&str] = &[
    "council", "mayor", "police", "residents", "market", "prices", "election", "voters",
    "minister", "budget", "storm", "flood", "road", "bridge", "school", "hospital", "court",
    "judge", "company", "workers", "union", "strike", "team", "coach", "season", "match",
    "fans", "stadium", "tuesday", "friday", "morning", "night", "week", "city", "town",
    "village", "river", "farm", "harbour", "airport", "train", "bus", "fire", "crews",
    "officials", "spokesman", "report", "statement", "plan", "project", "funding", "tax",
    "shares", "investors", "bank", "loan", "rent", "housing", "festival", "museum", "crowd",
    "protest", "charity", "volunteers", "rescue", "injured", "arrested", "announced", "said",
    "told", "reported", "confirmed", "closed", "opened", "rose", "fell", "won", "lost",
];

const ACADEMIC_WORDS: &[&str] = &[
    "model", "data", "analysis", "method", "sample", "variables", "results", "experiment",
    "participants", "hypothesis", "theory", "measurement", "estimate", "regression",
    "protein", "cells", "gene", "expression", "tissue", "patients", "cohort", "trial",
    "dataset", "algorithm", "network", "parameters", "simulation", "error", "variance",
    "distribution", "temperature", "pressure", "samples", "spectra", "surface", "layer",
    "structure", "function", "signal", "noise", "accuracy", "baseline", "literature",
    "survey", "interviews", "policy", "outcomes", "effect", "significant", "observed",
    "measured", "compared", "reported", "evaluated", "increased", "decreased", "derived",
    "obtained", "applied", "tested", "proposed", "table", "figure", "section", "appendix",
];

const NEWS_SIGNATURES: &[&str] = &[
    "it is important to note that",
    "plays a crucial role in",
    "in today's rapidly evolving landscape",
    "stands as a testament to the",
    "highlighting the importance of",
    "underscores the significance of",
    "in the realm of",
    "serves as a powerful reminder that",
    "fostering a sense of community",
    "navigating the complexities of",
    "paving the way for a brighter",
    "marks a pivotal moment for",
];

const ACADEMIC_SIGNATURES: &[&str] = &[
    "this study demonstrates that",
    "the findings suggest that",
    "offers a comprehensive framework for",
    "further research is needed to",
    "sheds light on the intricate",
    "provides valuable insights into",
    "the proposed methodology enables",
    "a novel approach to understanding",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub news_articles: usize,
    pub academic_articles: usize,
    pub sentences_per_article: usize,
    pub seed: u64,
    /// Probability that an academic human sentence carries a news machine signature.
    pub academic_shift: f64,
    /// Probability that a sentence's signature presence is flipped (machine without
    /// a signature, human with one).
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            news_articles: 200,
            academic_articles: 800,
            sentences_per_article: 10,
            seed: 0,
            academic_shift: 0.5,
            noise: 0.02,
        }
    }
}

struct Generator {
    rng: ChaCha8Rng,
    config: SyntheticConfig,
}

impl Generator {
    fn filler(&mut self, domain: Domain, len: usize) -> Vec<&'static str> {
        let content = match domain {
            Domain::News => NEWS_WORDS,
            Domain::Academic => ACADEMIC_WORDS,
        };
        (0..len)
            .map(|_| {
                let pool = if self.rng.gen_bool(0.4) { FUNCTION_WORDS } else { content };
                *pool.choose(&mut self.rng).expect("non-empty word list")
            })
            .collect()
    }

    fn signature(&mut self, domain: Domain) -> &'static str {
        let list = match domain {
            Domain::News => NEWS_SIGNATURES,
            Domain::Academic => ACADEMIC_SIGNATURES,
        };
        list.choose(&mut self.rng).expect("non-empty signature list")
    }

    fn sentence(&mut self, domain: Domain, label: Label) -> Sentence {
        let len = self.rng.gen_range(6..=14);
        let mut words = self.filler(domain, len);
        let flip = self.rng.gen_bool(self.config.noise);
        let signature = match (label, domain) {
            (Label::Machine, _) if !flip => Some(self.signature(domain)),
            (Label::Human, _) if flip => Some(self.signature(domain)),
            (Label::Human, Domain::Academic) if self.rng.gen_bool(self.config.academic_shift) => {
                Some(self.signature(Domain::News))
            }
            _ => None,
        };
        if let Some(sig) = signature {
            let at = self.rng.gen_range(0..=words.len());
            words.insert(at, sig);
        }
        let mut text = words.join(" ");
        if let Some(first) = text.get(..1) {
            let upper = first.to_uppercase();
            text.replace_range(..1, &upper);
        }
        text.push('.');
        Sentence::new(text, label)
    }

    fn article(&mut self, id: String, domain: Domain) -> Article {
        let n = self.config.sentences_per_article;
        let machine = self.rng.gen_range((n / 5).max(1)..=(n - n / 5).max(1)).min(n);
        let start = self.rng.gen_range(0..=n - machine);
        let sentences = (0..n)
            .map(|i| {
                let label = if (start..start + machine).contains(&i) {
                    Label::Machine
                } else {
                    Label::Human
                };
                self.sentence(domain, label)
            })
            .collect();
        Article {
            id,
            domain,
            sentences,
        }
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<LabeledDataset> {
    if config.sentences_per_article == 0 {
        return Err(Error::InvalidParameter("sentences_per_article must be positive".into()));
    }
    if config.news_articles + config.academic_articles == 0 {
        return Err(Error::InvalidParameter("corpus must contain at least one article".into()));
    }
    for (name, p) in [("academic_shift", config.academic_shift), ("noise", config.noise)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    let mut generator = Generator {
        rng: rng_for(config.seed, STREAM_SYNTHETIC),
        config: *config,
    };
    let mut articles = Vec::with_capacity(config.news_articles + config.academic_articles);
    for i in 0..config.news_articles {
        articles.push(generator.article(format!("news-{i:05}"), Domain::News));
    }
    for i in 0..config.academic_articles {
        articles.push(generator.article(format!("academic-{i:05}"), Domain::Academic));
    }
    LabeledDataset::new(articles)
}
