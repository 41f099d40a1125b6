//! Transparent text-classification workbench: corpora, TF-IDF and curated
//! numeric representations, classifiers, grid search, evaluation, global and
//! local explanations, cross-pipeline views, hypothesis checks, and the
//! store and service layer behind the CLI and HTTP API.

pub mod charts;
pub mod classifiers;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod explanation;
pub mod hypothesis;
pub mod jobs;
pub mod numeric_features;
pub mod pipeline;
pub mod representation;
pub mod rng;
pub mod schemas;
pub mod service;
pub mod sparse;
pub mod store;
pub mod text_features;
pub mod tuning;
pub mod views;

pub use classifiers::{FieldError, Kernel, ModelSpec, TrainedModel};
pub use corpus::{Dataset, DocSet, Document, SplitSpec};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, MetricPanel, Provenance};
pub use explanation::{GlobalRanking, LocalExplanation};
pub use hypothesis::{HypothesisSpec, LabelDistribution, Verdict};
pub use pipeline::{EvaluationReport, PipelineConfig, TrainedPipeline};
pub use representation::{RepresentationConfig, RepresentationKind};
pub use service::{ServiceConfig, Workbench};
pub use sparse::SparseVector;
pub use store::{PipelineRecord, PipelineStatus, Store};
pub use tuning::{Grid, GridReport};
