//! Pipelines: a fitted representation plus a trained classifier, with the
//! dataset split and evaluation that produced them.

use serde::{Deserialize, Serialize};

use crate::classifiers::{train, FieldError, ModelSpec, TrainedModel};
use crate::corpus::{split, Dataset, Document, SplitSpec};
use crate::error::{Error, Result};
use crate::evaluation::{confusion, metrics, ConfusionMatrix, MetricPanel, Provenance};
use crate::representation::{Representation, RepresentationConfig, RepresentationKind};
use crate::sparse::SparseVector;
use crate::tuning::{cross_validate, gold_labels, CvReport};

fn default_folds() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Name of the dataset the pipeline is trained on (e.g. `BGS`).
    pub dataset: String,
    pub representation: RepresentationConfig,
    pub model: ModelSpec,
    #[serde(default)]
    pub split: SplitSpec,
    /// Folds of the model-checking cross-validation on the training part.
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
}

impl PipelineConfig {
    pub fn new(dataset: impl Into<String>, representation: RepresentationConfig, model: ModelSpec) -> Self {
        Self {
            dataset: dataset.into(),
            representation,
            model,
            split: SplitSpec::default(),
            cv_folds: default_folds(),
        }
    }

    /// `<model> (<dataset> <representation>)`, e.g. `SVC LIN 3 (GS (TF-IDF) (SWR))`.
    pub fn name(&self) -> String {
        pipeline_name(&self.model, &self.dataset, &self.representation)
    }

    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        if self.dataset.trim().is_empty() {
            errs.push(FieldError::new("dataset", "dataset name must not be empty"));
        }
        errs.extend(self.model.field_errors().into_iter().map(|e| FieldError {
            field: format!("model.{}", e.field),
            message: e.message,
        }));
        errs.extend(self.representation.field_errors());
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            errs.push(FieldError::new("split.test_fraction", "test_fraction must lie in (0, 1)"));
        }
        if self.cv_folds < 2 {
            errs.push(FieldError::new("cv_folds", "cv_folds must be >= 2"));
        }
        errs
    }
}

pub fn pipeline_name(model: &ModelSpec, dataset: &str, rep: &RepresentationConfig) -> String {
    format!("{} ({} {})", model.short_name(), dataset, rep.name_part())
}

/// A trained pipeline, ready to classify documents.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPipeline {
    pub id: String,
    pub name: String,
    pub config: PipelineConfig,
    pub representation: Representation,
    pub model: TrainedModel,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl TrainedPipeline {
    /// Splits the dataset, fits the representation on the training part and
    /// trains the classifier on it.
    pub fn train(id: impl Into<String>, config: &PipelineConfig, dataset: &Dataset) -> Result<Self> {
        let errs = config.field_errors();
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        if !dataset.is_labeled() {
            return Err(Error::InvalidInput(format!(
                "dataset `{}` has unlabeled documents and cannot train a pipeline",
                dataset.name
            )));
        }
        let parts = split(dataset, &config.split)?;
        let train_docs = dataset.select(&parts.train_ids)?;
        let representation = Representation::fit(&config.representation, &train_docs)?;
        let x = representation.transform_all(&train_docs)?;
        let y = gold_labels(&train_docs)?;
        let model = train(&config.model, &x, &y)?;
        Ok(Self {
            id: id.into(),
            name: config.name(),
            config: config.clone(),
            representation,
            model,
            train_ids: parts.train_ids,
            test_ids: parts.test_ids,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.model.classes
    }

    pub fn kind(&self) -> RepresentationKind {
        self.representation.kind()
    }

    pub fn vectorize(&self, doc: &Document) -> Result<SparseVector> {
        self.representation.transform(doc)
    }

    pub fn predict(&self, doc: &Document) -> Result<String> {
        Ok(self.model.predict(&self.vectorize(doc)?)?.to_string())
    }

    pub fn predict_proba(&self, doc: &Document) -> Result<Vec<f64>> {
        self.model.predict_proba(&self.vectorize(doc)?)
    }

    pub fn predict_proba_text(&self, text: &str) -> Result<Vec<f64>> {
        self.model.predict_proba(&self.representation.transform_text(text)?)
    }

    pub fn predict_all(&self, docs: &[&Document]) -> Result<Vec<String>> {
        use rayon::prelude::*;
        docs.par_iter().map(|d| self.predict(d)).collect()
    }

    /// Cross-validation on the training part plus the held-out evaluation.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<EvaluationReport> {
        let train_docs = dataset.select(&self.train_ids)?;
        let cv = cross_validate(
            &self.config.representation,
            &self.config.model,
            &train_docs,
            self.config.cv_folds,
            self.config.split.seed,
        )?;
        let test_docs = dataset.select(&self.test_ids)?;
        let gold = gold_labels(&test_docs)?;
        let pred = self.predict_all(&test_docs)?;
        let mut labels = cv.pooled.labels.clone();
        for l in gold.iter().chain(&pred) {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
        labels.sort();
        let heldout_matrix = confusion(&gold, &pred, &labels)?;
        let heldout = HeldoutReport {
            panel: metrics(&heldout_matrix, Provenance::Heldout)?,
            confusion: heldout_matrix,
        };
        let mut warnings = self.model.warnings.clone();
        warnings.extend(cv.warnings.iter().cloned());
        Ok(EvaluationReport {
            pipeline_id: self.id.clone(),
            pipeline_name: self.name.clone(),
            cv,
            heldout,
            warnings,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldoutReport {
    pub confusion: ConfusionMatrix,
    pub panel: MetricPanel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub cv: CvReport,
    pub heldout: HeldoutReport,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn panel(&self, source: Provenance) -> &MetricPanel {
        match source {
            Provenance::Cv => &self.cv.panel,
            Provenance::Heldout => &self.heldout.panel,
        }
    }
}
