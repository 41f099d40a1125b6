//! Document representations: TF-IDF (optionally with stop-word removal) or
//! curated numeric features (optionally robust-scaled), fitted on a
//! training partition and applied to any document afterwards.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::classifiers::FieldError;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::numeric_features::{
    ingest_precomputed, FeatureExtractor, FeatureMatrix, FeatureQuartiles, FeatureSpec,
    RobustScalerModel,
};
use crate::sparse::SparseVector;
use crate::text_features::{tokenize, Norm, StopWordList, TfidfConfig, TfidfModel};

fn yes() -> bool {
    true
}

fn default_min_df() -> usize {
    5
}

fn default_ngrams() -> (usize, usize) {
    (1, 2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfidfSettings {
    #[serde(default = "yes")]
    pub sublinear_tf: bool,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default = "default_ngrams")]
    pub ngram_range: (usize, usize),
    /// `dutch`, `dutch-modified`, or a path to a one-word-per-line file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<String>,
}

impl Default for TfidfSettings {
    fn default() -> Self {
        Self {
            sublinear_tf: true,
            min_df: default_min_df(),
            norm: Norm::L2,
            ngram_range: default_ngrams(),
            stopwords: None,
        }
    }
}

impl TfidfSettings {
    pub fn to_config(&self) -> Result<TfidfConfig> {
        let stopwords = match &self.stopwords {
            None => None,
            Some(name) => Some(match StopWordList::builtin(name) {
                Ok(list) => list,
                Err(_) => StopWordList::load(&PathBuf::from(name))?,
            }),
        };
        let config = TfidfConfig {
            sublinear_tf: self.sublinear_tf,
            min_df: self.min_df,
            norm: self.norm,
            ngram_range: self.ngram_range,
            stopwords,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSettings {
    /// Feature spec file; the shipped 38-feature spec when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    /// Subset of feature names to keep (spec order is preserved).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub scale: bool,
    /// CSV of externally computed features (id + one column per feature).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precomputed: Option<PathBuf>,
    /// Name shown in pipeline names; `LEX` for the built-in extractor,
    /// `EXT` for precomputed files unless set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            spec: None,
            features: None,
            scale: true,
            precomputed: None,
            suite: None,
        }
    }
}

impl NumericSettings {
    fn load_spec(&self) -> Result<FeatureSpec> {
        let spec = match &self.spec {
            Some(path) => FeatureSpec::load(path)?,
            None => FeatureSpec::default_spec(),
        };
        match &self.features {
            Some(names) => spec.select(names),
            None => Ok(spec),
        }
    }

    pub fn suite_name(&self) -> String {
        match (&self.suite, &self.precomputed) {
            (Some(s), _) => s.clone(),
            (None, Some(_)) => "EXT".into(),
            (None, None) => "LEX".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RepresentationConfig {
    Tfidf(TfidfSettings),
    Numeric(NumericSettings),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationKind {
    /// Token n-grams: explained through the document's words.
    Text,
    /// Curated features: explained through feature values.
    Numeric,
}

impl RepresentationConfig {
    pub fn tfidf() -> Self {
        Self::Tfidf(TfidfSettings::default())
    }

    pub fn tfidf_swr(list: &str) -> Self {
        Self::Tfidf(TfidfSettings {
            stopwords: Some(list.to_string()),
            ..TfidfSettings::default()
        })
    }

    pub fn numeric() -> Self {
        Self::Numeric(NumericSettings::default())
    }

    pub fn kind(&self) -> RepresentationKind {
        match self {
            Self::Tfidf(_) => RepresentationKind::Text,
            Self::Numeric(_) => RepresentationKind::Numeric,
        }
    }

    /// Name fragment: `(TF-IDF)`, `(TF-IDF) (SWR)`, `(LEX) (SCL)`, ...
    pub fn name_part(&self) -> String {
        match self {
            Self::Tfidf(t) => {
                if t.stopwords.is_some() {
                    "(TF-IDF) (SWR)".into()
                } else {
                    "(TF-IDF)".into()
                }
            }
            Self::Numeric(n) => {
                let mut s = format!("({})", n.suite_name());
                if n.scale {
                    s.push_str(" (SCL)");
                }
                s
            }
        }
    }

    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        match self {
            Self::Tfidf(t) => {
                if t.min_df < 1 {
                    errs.push(FieldError::new("representation.min_df", "min_df must be >= 1"));
                }
                let (lo, hi) = t.ngram_range;
                if lo < 1 || lo > hi {
                    errs.push(FieldError::new(
                        "representation.ngram_range",
                        "ngram_range must satisfy 1 <= lo <= hi",
                    ));
                }
                if let Some(name) = &t.stopwords {
                    if StopWordList::builtin(name).is_err() && !PathBuf::from(name).is_file() {
                        errs.push(FieldError::new(
                            "representation.stopwords",
                            format!("`{name}` is neither a built-in list nor a readable file"),
                        ));
                    }
                }
            }
            Self::Numeric(n) => {
                if let Err(e) = n.load_spec() {
                    let field = if n.features.is_some() {
                        "representation.features"
                    } else {
                        "representation.spec"
                    };
                    errs.push(FieldError::new(field, e.to_string()));
                }
                if let Some(p) = &n.precomputed {
                    if !p.is_file() {
                        errs.push(FieldError::new(
                            "representation.precomputed",
                            format!("{} is not a readable file", p.display()),
                        ));
                    }
                }
            }
        }
        errs
    }
}

/// Fitted curated-feature representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NumericModel {
    pub spec: FeatureSpec,
    pub names: Vec<String>,
    pub scaler: Option<RobustScalerModel>,
    /// Raw (unscaled) training quartiles, used by tabular explanations.
    pub quartiles: FeatureQuartiles,
    /// Externally computed rows, when the representation reads a file.
    pub precomputed: Option<FeatureMatrix>,
    #[serde(skip)]
    extractor: OnceLock<FeatureExtractor>,
}

impl PartialEq for NumericModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.names == other.names
            && self.scaler == other.scaler
            && self.quartiles == other.quartiles
            && self.precomputed == other.precomputed
    }
}

impl NumericModel {
    fn extractor(&self) -> Result<&FeatureExtractor> {
        if let Some(e) = self.extractor.get() {
            return Ok(e);
        }
        let compiled = self.spec.compile()?;
        Ok(self.extractor.get_or_init(|| compiled))
    }

    pub fn raw(&self, doc: &Document) -> Result<Vec<f64>> {
        match &self.precomputed {
            Some(m) => m
                .row(&doc.id)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::MissingDocument(doc.id.clone())),
            None => Ok(self.extractor()?.extract(&doc.text)),
        }
    }

    pub fn raw_text(&self, text: &str) -> Result<Vec<f64>> {
        if self.precomputed.is_some() {
            return Err(Error::Unsupported(
                "precomputed features cannot be derived from raw text".into(),
            ));
        }
        Ok(self.extractor()?.extract(text))
    }

    pub fn finish(&self, raw: &[f64]) -> Result<SparseVector> {
        if raw.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.names.len(),
                found: raw.len(),
            });
        }
        Ok(match &self.scaler {
            Some(s) => SparseVector::from_dense(&s.transform(raw)?),
            None => SparseVector::from_dense(raw),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedRepresentation {
    Tfidf(TfidfModel),
    Numeric(NumericModel),
}

/// A representation fitted on a known set of documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub config: RepresentationConfig,
    pub fitted: FittedRepresentation,
    /// Ids of the documents whose statistics went into the fit.
    pub fit_ids: BTreeSet<String>,
}

impl Representation {
    pub fn fit(config: &RepresentationConfig, docs: &[&Document]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let fitted = match config {
            RepresentationConfig::Tfidf(t) => {
                let cfg = t.to_config()?;
                let corpus: Vec<Vec<String>> = docs.iter().map(|d| tokenize(&d.text)).collect();
                FittedRepresentation::Tfidf(TfidfModel::fit(&corpus, &cfg)?)
            }
            RepresentationConfig::Numeric(n) => {
                let spec = n.load_spec()?;
                let precomputed = match &n.precomputed {
                    Some(path) => {
                        let full = match &n.spec {
                            Some(p) => FeatureSpec::load(p)?,
                            None => FeatureSpec::default_spec(),
                        };
                        let m = ingest_precomputed(path, &full)?;
                        let keep: Vec<usize> = spec
                            .names()
                            .iter()
                            .map(|name| m.names.iter().position(|x| x == name).unwrap())
                            .collect();
                        Some(FeatureMatrix {
                            names: spec.names(),
                            ids: m.ids.clone(),
                            rows: m
                                .rows
                                .iter()
                                .map(|r| keep.iter().map(|&k| r[k]).collect())
                                .collect(),
                        })
                    }
                    None => None,
                };
                let mut model = NumericModel {
                    names: spec.names(),
                    spec,
                    scaler: None,
                    quartiles: FeatureQuartiles {
                        names: Vec::new(),
                        edges: Vec::new(),
                    },
                    precomputed,
                    extractor: OnceLock::new(),
                };
                let raw: Vec<Vec<f64>> = {
                    use rayon::prelude::*;
                    docs.par_iter().map(|d| model.raw(d)).collect::<Result<_>>()?
                };
                model.quartiles = FeatureQuartiles::fit(model.names.clone(), &raw)?;
                if n.scale {
                    model.scaler = Some(RobustScalerModel::fit(&raw)?);
                }
                FittedRepresentation::Numeric(model)
            }
        };
        Ok(Self {
            config: config.clone(),
            fitted,
            fit_ids: docs.iter().map(|d| d.id.clone()).collect(),
        })
    }

    pub fn kind(&self) -> RepresentationKind {
        self.config.kind()
    }

    pub fn dim(&self) -> usize {
        match &self.fitted {
            FittedRepresentation::Tfidf(m) => m.vocabulary_size(),
            FittedRepresentation::Numeric(m) => m.names.len(),
        }
    }

    /// Column names: n-grams for TF-IDF, feature names otherwise.
    pub fn feature_names(&self) -> &[String] {
        match &self.fitted {
            FittedRepresentation::Tfidf(m) => m.terms(),
            FittedRepresentation::Numeric(m) => &m.names,
        }
    }

    pub fn transform(&self, doc: &Document) -> Result<SparseVector> {
        match &self.fitted {
            FittedRepresentation::Tfidf(m) => Ok(m.transform_text(&doc.text)),
            FittedRepresentation::Numeric(m) => m.finish(&m.raw(doc)?),
        }
    }

    pub fn transform_all(&self, docs: &[&Document]) -> Result<Vec<SparseVector>> {
        use rayon::prelude::*;
        docs.par_iter().map(|d| self.transform(d)).collect()
    }

    /// Vectorizes raw text; unavailable for precomputed features.
    pub fn transform_text(&self, text: &str) -> Result<SparseVector> {
        match &self.fitted {
            FittedRepresentation::Tfidf(m) => Ok(m.transform_text(text)),
            FittedRepresentation::Numeric(m) => m.finish(&m.raw_text(text)?),
        }
    }

    pub fn supports_text(&self) -> bool {
        match &self.fitted {
            FittedRepresentation::Tfidf(_) => true,
            FittedRepresentation::Numeric(m) => m.precomputed.is_none(),
        }
    }

    pub fn numeric(&self) -> Option<&NumericModel> {
        match &self.fitted {
            FittedRepresentation::Numeric(m) => Some(m),
            FittedRepresentation::Tfidf(_) => None,
        }
    }

    pub fn tfidf(&self) -> Option<&TfidfModel> {
        match &self.fitted {
            FittedRepresentation::Tfidf(m) => Some(m),
            FittedRepresentation::Numeric(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<Document> {
        (0..8)
            .map(|i| {
                let text = if i % 2 == 0 {
                    format!("Ik denk dat het goed is. Nummer {i} komt!")
                } else {
                    format!("De minister zei gisteren dat het rapport klaar is, nummer {i}.")
                };
                Document::new(format!("d{i}"), text)
            })
            .collect()
    }

    #[test]
    fn names() {
        assert_eq!(RepresentationConfig::tfidf().name_part(), "(TF-IDF)");
        assert_eq!(RepresentationConfig::tfidf_swr("dutch").name_part(), "(TF-IDF) (SWR)");
        assert_eq!(RepresentationConfig::numeric().name_part(), "(LEX) (SCL)");
        let frog = RepresentationConfig::Numeric(NumericSettings {
            suite: Some("FROG".into()),
            ..NumericSettings::default()
        });
        assert_eq!(frog.name_part(), "(FROG) (SCL)");
    }

    #[test]
    fn fit_records_ids_and_transforms() {
        let d = docs();
        let refs: Vec<&Document> = d.iter().take(6).collect();
        let cfg = RepresentationConfig::Tfidf(TfidfSettings {
            min_df: 2,
            ..TfidfSettings::default()
        });
        let rep = Representation::fit(&cfg, &refs).unwrap();
        assert_eq!(rep.fit_ids.len(), 6);
        assert!(!rep.fit_ids.contains("d7"));
        let v = rep.transform(&d[7]).unwrap();
        assert_eq!(v.dim(), rep.dim());
        assert!((v.norm() - 1.0).abs() < 1e-12);

        let num = Representation::fit(&RepresentationConfig::numeric(), &refs).unwrap();
        assert_eq!(num.dim(), 38);
        assert_eq!(num.kind(), RepresentationKind::Numeric);
        let json = serde_json::to_string(&num).unwrap();
        let back: Representation = serde_json::from_str(&json).unwrap();
        assert_eq!(back.transform(&d[7]).unwrap(), num.transform(&d[7]).unwrap());
    }

    #[test]
    fn config_json_and_field_errors() {
        let cfg: RepresentationConfig =
            serde_json::from_str(r#"{"kind":"tfidf","stopwords":"dutch-modified"}"#).unwrap();
        assert_eq!(cfg.name_part(), "(TF-IDF) (SWR)");
        let bad: RepresentationConfig =
            serde_json::from_str(r#"{"kind":"numeric","features":["nope"]}"#).unwrap();
        assert_eq!(bad.field_errors()[0].field, "representation.features");
        let bad: RepresentationConfig =
            serde_json::from_str(r#"{"kind":"tfidf","min_df":0,"stopwords":"klingon"}"#).unwrap();
        assert_eq!(bad.field_errors().len(), 2);
    }
}
