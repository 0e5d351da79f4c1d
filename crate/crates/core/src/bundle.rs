//! A fitted TF-IDF vocabulary plus Naive Bayes model, persisted together.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Sentence};
use crate::error::{Error, Result};
use crate::features::{SparseVector, TfidfModel, TfidfModelRepr, TfidfParams};
use crate::nb::NbModel;

pub const BUNDLE_FORMAT: &str = "hybriddetect-bundle";
/// Major version; readers reject any other major.
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub n_max: usize,
    pub min_df: usize,
    pub alpha: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        let tfidf = TfidfParams::default();
        TrainParams {
            n_max: tfidf.n_max,
            min_df: tfidf.min_df,
            alpha: crate::nb::DEFAULT_ALPHA,
        }
    }
}

impl TrainParams {
    pub fn tfidf(&self) -> TfidfParams {
        TfidfParams {
            n_max: self.n_max,
            min_df: self.min_df,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub tfidf: TfidfModel,
    pub nb: NbModel,
}

#[derive(Serialize, Deserialize)]
struct BundleFile {
    format: String,
    version: u32,
    tfidf: TfidfModelRepr,
    nb: NbModel,
}

impl ModelBundle {
    /// Fits TF-IDF on the training sentences, then Naive Bayes on their vectors.
    pub fn train<'a, I>(sentences: I, params: TrainParams) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sentence>,
        I::IntoIter: Clone,
    {
        let sentences = sentences.into_iter();
        let tfidf = TfidfModel::fit(sentences.clone().map(|s| s.text.as_str()), params.tfidf())?;
        let (vectors, labels): (Vec<SparseVector>, Vec<Label>) = sentences
            .map(|s| (tfidf.transform(&s.text), s.label))
            .unzip();
        let nb = NbModel::fit(&vectors, &labels, tfidf.len(), params.alpha)?;
        Ok(ModelBundle { tfidf, nb })
    }

    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.tfidf.transform(text)
    }

    pub fn predict(&self, text: &str) -> Result<Label> {
        self.nb.predict(&self.vectorize(text))
    }

    pub fn predict_all<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> Result<Vec<Label>> {
        texts.into_iter().map(|t| self.predict(t)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = BundleFile {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            tfidf: self.tfidf.to_repr(),
            nb: self.nb.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BundleFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    fn from_file(file: BundleFile) -> Result<Self> {
        if file.format != BUNDLE_FORMAT {
            return Err(Error::Format(format!(
                "expected format {BUNDLE_FORMAT:?}, found {:?}",
                file.format
            )));
        }
        if file.version != BUNDLE_VERSION {
            return Err(Error::Format(format!(
                "bundle version {} is not readable by this release (expects {BUNDLE_VERSION})",
                file.version
            )));
        }
        let tfidf = TfidfModel::from_repr(file.tfidf)?;
        file.nb.validate()?;
        if file.nb.n_features() != tfidf.len() {
            return Err(Error::Format(format!(
                "model has {} features but vocabulary has {}",
                file.nb.n_features(),
                tfidf.len()
            )));
        }
        Ok(ModelBundle { tfidf, nb: file.nb })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        out.write_all(self.to_json()?.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let parsed: BundleFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_file(parsed).map_err(|e| e.context(path.display().to_string()))
    }
}
