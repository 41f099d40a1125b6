//! The workbench: engine operations over a store, shared by the CLI and the
//! HTTP API. Request and response types here are the API's JSON bodies.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::charts::{
    accuracy_chart, distribution_chart, heatmap_chart, importance_chart, ranking_chart, DistributionChart,
};
use crate::classifiers::{class_pairs, FieldError};
use crate::corpus::{collocate, generate_synthetic, ingest, Dataset, Document, DocumentRecord, Format, SplitSpec, SyntheticShape, SyntheticSpec, split};
use crate::error::{Error, Result};
use crate::evaluation::{Normalize, Provenance};
use crate::explanation::{explain_document, global_linear, global_rf_importance, GlobalRanking, LimeOptions, LocalExplanation};
use crate::hypothesis::{distribution, reestimate, verdict, HypothesisSpec, LabelDistribution, ReestimationInput, Verdict};
use crate::jobs::{Job, JobKind, JobQueue};
use crate::pipeline::{EvaluationReport, PipelineConfig, TrainedPipeline};
use crate::representation::RepresentationConfig;
use crate::store::{ArtifactKind, DatasetRecord, PipelineRecord, PipelineStatus, Store};
use crate::tuning::{grid_search, gold_labels, Grid, GridReport};
use crate::views::{
    build_prediction_matrix, doc_agreement_view, explanation_view, set_agreement_view, AgreementRow, DocAgreementRow,
    ExplanationIndex, ExplanationRow, PipelineColumn, Predictor,
};

pub const VIEW_SCHEMA_VERSION: u32 = 1;

fn default_port() -> u16 {
    8080
}
fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
fn default_seed() -> u64 {
    42
}
fn default_samples() -> usize {
    1000
}
fn default_top_k() -> usize {
    10
}
fn default_folds() -> usize {
    10
}

/// Server and workbench settings (JSON config file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Background job workers; defaults to the CPU count.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Default seed for splits, folds, forests and explanations.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub lime_samples: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Store root; the `GLASSBOX_STORE` environment variable takes precedence.
    #[serde(default)]
    pub store: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Where a new dataset's documents come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<Format>,
    },
    Inline {
        documents: Vec<DocumentRecord>,
    },
    Synthetic {
        shape: SyntheticShape,
        #[serde(default)]
        confound_strength: f64,
        #[serde(default = "default_seed")]
        seed: u64,
        /// Drop the gold labels (an unlabeled-collection stand-in).
        #[serde(default)]
        unlabeled: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestRequest {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRequest {
    pub dataset: String,
    pub representation: RepresentationConfig,
    pub grid: Grid,
    #[serde(default = "default_folds")]
    pub k: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// The search runs on the training part of this split.
    #[serde(default)]
    pub split: SplitSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub id: String,
    pub dataset: String,
    pub report: GridReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewKind {
    Explanation,
    SetAgreement,
    DocAgreement,
}

impl std::str::FromStr for ViewKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explanation" => Ok(ViewKind::Explanation),
            "set-agreement" => Ok(ViewKind::SetAgreement),
            "doc-agreement" => Ok(ViewKind::DocAgreement),
            other => Err(Error::NotFound(format!("view `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ViewRows {
    Explanation(Vec<ExplanationRow>),
    SetAgreement(Vec<AgreementRow>),
    DocAgreement(Vec<DocAgreementRow>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPayload {
    pub schema_version: u32,
    pub id: String,
    pub view: ViewKind,
    pub pipelines: Vec<PipelineColumn>,
    pub documents: usize,
    pub rows: ViewRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRequest {
    pub view: ViewKind,
    pub pipelines: Vec<String>,
    /// Apply the pipelines to this dataset instead of their collocated
    /// test sets.
    #[serde(default)]
    pub dataset: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub pipeline: String,
    pub document: String,
    /// Dataset holding the document; defaults to the pipeline's own.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainOutcome {
    pub id: String,
    pub explanation: LocalExplanation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRequest {
    pub pipeline: String,
    /// Dataset the pipeline is applied to; defaults to the pipeline's own.
    #[serde(default)]
    pub dataset: Option<String>,
    pub specs: Vec<HypothesisSpec>,
    /// Which evaluation supplies precision and recall.
    #[serde(default = "heldout")]
    pub source: Provenance,
}

fn heldout() -> Provenance {
    Provenance::Heldout
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictPair {
    pub raw: Verdict,
    pub reestimated: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub id: String,
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub dataset: String,
    pub source: Provenance,
    pub raw: LabelDistribution,
    pub reestimated: LabelDistribution,
    /// Gold counts, when the dataset is labeled.
    pub gold: Option<LabelDistribution>,
    pub verdicts: Vec<VerdictPair>,
    pub chart: DistributionChart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldHypothesisOutcome {
    pub dataset: String,
    pub gold: LabelDistribution,
    pub verdicts: Vec<Verdict>,
    pub chart: DistributionChart,
}

/// Parses `label:comparator:baseline:comparison`, e.g. `Report:increase:1965:1985`.
pub fn parse_hypothesis(s: &str) -> Result<HypothesisSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let [label, comparator, baseline, comparison] = parts.as_slice() else {
        return Err(Error::InvalidInput(format!(
            "hypothesis `{s}` must look like LABEL:increase|decrease:BASELINE:COMPARISON"
        )));
    };
    let comparator = serde_json::from_value(serde_json::Value::String(comparator.to_string()))
        .map_err(|_| Error::InvalidInput(format!("comparator `{comparator}` must be increase or decrease")))?;
    Ok(HypothesisSpec {
        label: label.to_string(),
        comparator,
        baseline: baseline.to_string(),
        comparison: comparison.to_string(),
    })
}

fn stratum(doc: &Document) -> Option<String> {
    doc.year.map(|y| y.to_string())
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub struct Workbench {
    store: Store,
    config: ServiceConfig,
    jobs: JobQueue,
    cache: Mutex<HashMap<String, Arc<TrainedPipeline>>>,
}

impl Workbench {
    pub fn open(root: impl Into<PathBuf>, config: ServiceConfig) -> Result<Arc<Self>> {
        let store = Store::open(root)?;
        Ok(Arc::new(Self {
            jobs: JobQueue::new(config.workers),
            store,
            config,
            cache: Mutex::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn jobs(&self) -> &JobQueue {
        &self.jobs
    }

    pub fn job(&self, id: &str) -> Result<Job> {
        self.jobs.get(id).ok_or_else(|| Error::NotFound(format!("job `{id}`")))
    }

    // Datasets

    pub fn ingest(&self, req: &IngestRequest) -> Result<DatasetRecord> {
        let dataset = match &req.source {
            DatasetSource::File { path, format } => {
                let format = match format {
                    Some(f) => *f,
                    None => Format::from_path(path).ok_or_else(|| {
                        Error::Config(format!("cannot tell the format of {}; pass csv or jsonl", path.display()))
                    })?,
                };
                ingest(path, format, &req.name)?
            }
            DatasetSource::Inline { documents } => {
                Dataset::new(req.name.clone(), documents.iter().cloned().map(Document::from).collect())?
            }
            DatasetSource::Synthetic {
                shape,
                confound_strength,
                seed,
                unlabeled,
            } => {
                let d = generate_synthetic(&SyntheticSpec {
                    name: req.name.clone(),
                    shape: shape.clone(),
                    confound_strength: *confound_strength,
                    seed: *seed,
                })?;
                if *unlabeled {
                    d.without_labels(req.name.clone())
                } else {
                    d
                }
            }
        };
        self.store.save_dataset(&dataset)
    }

    pub fn datasets(&self) -> Result<Vec<DatasetRecord>> {
        self.store.list_datasets()
    }

    pub fn dataset(&self, name: &str) -> Result<Dataset> {
        self.store.load_dataset(name)
    }

    // Pipelines

    pub fn create_pipeline(&self, config: &PipelineConfig) -> Result<PipelineRecord> {
        let mut errs = config.field_errors();
        if !config.dataset.trim().is_empty() {
            match self.store.dataset_record(&config.dataset) {
                Ok(rec) if !rec.labeled => errs.push(FieldError::new(
                    "dataset",
                    format!("dataset `{}` is not fully labeled", config.dataset),
                )),
                Ok(_) => {}
                Err(Error::NotFound(_)) | Err(Error::InvalidInput(_)) => errs.push(FieldError::new(
                    "dataset",
                    format!("unknown dataset `{}`", config.dataset),
                )),
                Err(e) => return Err(e),
            }
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        self.store.create_pipeline(config)
    }

    pub fn pipelines(&self) -> Result<Vec<PipelineRecord>> {
        self.store.list_pipelines()
    }

    pub fn pipeline_record(&self, id: &str) -> Result<PipelineRecord> {
        self.store.pipeline(id)
    }

    pub fn pipeline(&self, id: &str) -> Result<Arc<TrainedPipeline>> {
        if let Some(p) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(id) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(self.store.load_pipeline(id)?);
        self.cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.to_string(), Arc::clone(&p));
        Ok(p)
    }

    fn run_training(&self, id: &str, progress: impl Fn(f64)) -> Result<PipelineRecord> {
        let outcome = (|| {
            let rec = self.store.pipeline(id)?;
            let dataset = self.store.load_dataset(&rec.config.dataset)?;
            progress(0.1);
            let trained = TrainedPipeline::train(id, &rec.config, &dataset)?;
            progress(0.4);
            let report = trained.evaluate(&dataset)?;
            progress(0.95);
            Ok::<_, Error>((trained, report))
        })();
        match outcome {
            Ok((trained, report)) => self.store.finish_training(&trained, Some(&report)),
            Err(e) => {
                self.store.fail_training(id, &e.to_string())?;
                Err(e)
            }
        }
    }

    /// Trains and evaluates in the calling thread.
    pub fn train(&self, id: &str) -> Result<PipelineRecord> {
        self.store.begin_training(id)?;
        self.run_training(id, |_| {})
    }

    /// Claims the pipeline for training, then trains in the background. A
    /// second claim on the same pipeline fails with a conflict.
    pub fn submit_train(self: &Arc<Self>, id: &str) -> Result<Job> {
        self.store.begin_training(id)?;
        let this = Arc::clone(self);
        let id = id.to_string();
        Ok(self.jobs.submit(JobKind::Train, Some(id.clone()), move |p| {
            this.run_training(&id, |f| p.set(f)).map(|r| Some(r.id))
        }))
    }

    /// The stored evaluation report; computed and stored if missing.
    pub fn report(&self, id: &str) -> Result<EvaluationReport> {
        match self.store.load_report(id)? {
            Some(r) => Ok(r),
            None => self.evaluate(id),
        }
    }

    /// Recomputes the evaluation report and stores it.
    pub fn evaluate(&self, id: &str) -> Result<EvaluationReport> {
        let p = self.pipeline(id)?;
        let dataset = self.store.load_dataset(&p.config.dataset)?;
        let report = p.evaluate(&dataset)?;
        self.store.save_report(id, &report)?;
        Ok(report)
    }

    pub fn global_ranking(&self, id: &str, class_a: &str, class_b: &str, k: Option<usize>) -> Result<GlobalRanking> {
        let p = self.pipeline(id)?;
        global_linear(&p, class_a, class_b, k.unwrap_or(self.config.top_k))
    }

    // Grid search

    pub fn gridsearch(&self, req: &GridRequest) -> Result<GridOutcome> {
        let dataset = self.store.load_dataset(&req.dataset)?;
        let parts = split(&dataset, &req.split)?;
        let docs = dataset.select(&parts.train_ids)?;
        let seed = req.seed.unwrap_or(self.config.seed);
        let report = grid_search(&req.grid, &req.representation, &docs, req.k, seed)?;
        let rec = self.store.save_artifact(ArtifactKind::Grid, Some(req.dataset.clone()), &report)?;
        Ok(GridOutcome {
            id: rec.id,
            dataset: req.dataset.clone(),
            report,
        })
    }

    pub fn submit_gridsearch(self: &Arc<Self>, req: GridRequest) -> Job {
        let this = Arc::clone(self);
        self.jobs.submit(JobKind::Gridsearch, Some(req.dataset.clone()), move |_| {
            this.gridsearch(&req).map(|o| Some(o.id))
        })
    }

    pub fn grid(&self, id: &str) -> Result<GridOutcome> {
        let rec = self.store.artifact(ArtifactKind::Grid, id)?;
        Ok(GridOutcome {
            id: rec.id.clone(),
            dataset: rec.key.clone().unwrap_or_default(),
            report: self.store.load_artifact(ArtifactKind::Grid, id)?,
        })
    }

    // Views

    fn documents_for(&self, pipelines: &[Arc<TrainedPipeline>], dataset: Option<&str>) -> Result<Vec<Document>> {
        match dataset {
            Some(name) => Ok(self.store.load_dataset(name)?.documents().to_vec()),
            None => {
                let mut docs = Vec::new();
                let mut loaded: BTreeMap<String, Dataset> = BTreeMap::new();
                for p in pipelines {
                    if !loaded.contains_key(&p.config.dataset) {
                        loaded.insert(p.config.dataset.clone(), self.store.load_dataset(&p.config.dataset)?);
                    }
                    docs.extend(loaded[&p.config.dataset].select(&p.test_ids)?.into_iter().cloned());
                }
                Ok(docs)
            }
        }
    }

    fn explanation_index(&self) -> Result<ExplanationIndex> {
        let mut index = ExplanationIndex::new();
        for rec in self.store.list_artifacts(ArtifactKind::Explanation)? {
            if let Some((p, d)) = rec.key.as_deref().and_then(|k| k.split_once('/')) {
                index.insert((p.to_string(), d.to_string()), rec.id.clone());
            }
        }
        Ok(index)
    }

    pub fn view(&self, req: &ViewRequest) -> Result<ViewPayload> {
        if req.pipelines.is_empty() {
            return Err(Error::Validation(vec![FieldError::new("pipelines", "select at least one pipeline")]));
        }
        for id in &req.pipelines {
            let rec = self.store.pipeline(id)?;
            if rec.status != PipelineStatus::Ready {
                return Err(Error::Untrained(id.clone()));
            }
        }
        let pipelines: Vec<Arc<TrainedPipeline>> =
            req.pipelines.iter().map(|id| self.pipeline(id)).collect::<Result<_>>()?;
        let docs = self.documents_for(&pipelines, req.dataset.as_deref())?;
        let docset = collocate(docs.iter());
        let predictors: Vec<&dyn Predictor> = pipelines.iter().map(|p| p.as_ref() as &dyn Predictor).collect();
        let matrix = build_prediction_matrix(&predictors, &docset)?;
        let gold = docset.gold();
        let rows = match req.view {
            ViewKind::Explanation => ViewRows::Explanation(explanation_view(&matrix, &self.explanation_index()?)),
            ViewKind::SetAgreement => ViewRows::SetAgreement(set_agreement_view(&matrix, &gold)),
            ViewKind::DocAgreement => ViewRows::DocAgreement(doc_agreement_view(&matrix, &gold)),
        };
        let mut payload = ViewPayload {
            schema_version: VIEW_SCHEMA_VERSION,
            id: String::new(),
            view: req.view,
            pipelines: matrix.pipelines.clone(),
            documents: matrix.document_ids.len(),
            rows,
        };
        payload.id = self.store.save_artifact(ArtifactKind::View, None, &payload)?.id;
        Ok(payload)
    }

    // Explanations

    pub fn explain(&self, req: &ExplainRequest) -> Result<ExplainOutcome> {
        let p = self.pipeline(&req.pipeline)?;
        let dataset_name = req.dataset.clone().unwrap_or_else(|| p.config.dataset.clone());
        let dataset = self.store.load_dataset(&dataset_name)?;
        let doc = dataset
            .get(&req.document)
            .ok_or_else(|| Error::NotFound(format!("document `{}` in dataset `{dataset_name}`", req.document)))?;
        let opts = LimeOptions {
            n_samples: req.n_samples.unwrap_or(self.config.lime_samples),
            k: req.k.unwrap_or(self.config.top_k),
            seed: req.seed.unwrap_or(self.config.seed),
        };
        let explanation = explain_document(&p, doc, &opts)?;
        let rec = self.store.save_artifact(
            ArtifactKind::Explanation,
            Some(format!("{}/{}", p.id, doc.id)),
            &explanation,
        )?;
        Ok(ExplainOutcome { id: rec.id, explanation })
    }

    pub fn stored_explanation(&self, id: &str) -> Result<LocalExplanation> {
        self.store.load_artifact(ArtifactKind::Explanation, id)
    }

    // Hypotheses

    pub fn hypothesis(&self, req: &HypothesisRequest) -> Result<HypothesisOutcome> {
        let p = self.pipeline(&req.pipeline)?;
        let dataset_name = req.dataset.clone().unwrap_or_else(|| p.config.dataset.clone());
        let dataset = self.store.load_dataset(&dataset_name)?;
        let docs: Vec<&Document> = dataset.documents().iter().collect();
        let predictions = p.predict_all(&docs)?;
        let items: Vec<(Option<String>, String)> =
            docs.iter().zip(&predictions).map(|(d, l)| (stratum(d), l.clone())).collect();
        let raw = distribution(&items).with_labels(p.classes());
        let report = self.report(&p.id)?;
        let input = ReestimationInput::from_panel(report.panel(req.source));
        let reestimated = reestimate(&raw, &input)?;
        let gold = if dataset.is_labeled() {
            let labels = gold_labels(&docs)?;
            let items: Vec<(Option<String>, String)> =
                docs.iter().zip(labels).map(|(d, l)| (stratum(d), l)).collect();
            Some(distribution(&items))
        } else {
            None
        };
        let verdicts: Vec<VerdictPair> = req
            .specs
            .iter()
            .map(|s| {
                Ok(VerdictPair {
                    raw: verdict(&raw, s)?,
                    reestimated: verdict(&reestimated, s)?,
                })
            })
            .collect::<Result<_>>()?;
        let chart = distribution_chart(
            &format!("{} on {}", p.name, dataset_name),
            &[("raw", &raw), ("reestimated", &reestimated)],
            verdicts.iter().map(|v| v.reestimated.clone()).collect(),
        )?;
        let mut outcome = HypothesisOutcome {
            id: String::new(),
            pipeline_id: p.id.clone(),
            pipeline_name: p.name.clone(),
            dataset: dataset_name,
            source: req.source,
            raw,
            reestimated,
            gold,
            verdicts,
            chart,
        };
        outcome.id = self
            .store
            .save_artifact(ArtifactKind::Hypothesis, Some(p.id.clone()), &outcome)?
            .id;
        Ok(outcome)
    }

    /// Verdicts on a labeled dataset's gold distribution.
    pub fn gold_hypothesis(&self, dataset: &str, specs: &[HypothesisSpec]) -> Result<GoldHypothesisOutcome> {
        let gold = self.gold_distribution(dataset)?;
        let verdicts = specs.iter().map(|s| verdict(&gold, s)).collect::<Result<Vec<_>>>()?;
        let chart = distribution_chart(&format!("gold labels of {dataset}"), &[("gold", &gold)], verdicts.clone())?;
        Ok(GoldHypothesisOutcome {
            dataset: dataset.to_string(),
            gold,
            verdicts,
            chart,
        })
    }

    fn gold_distribution(&self, name: &str) -> Result<LabelDistribution> {
        let dataset = self.store.load_dataset(name)?;
        if !dataset.is_labeled() {
            return Err(Error::InvalidInput(format!("dataset `{name}` is not fully labeled")));
        }
        let docs: Vec<&Document> = dataset.documents().iter().collect();
        let labels = gold_labels(&docs)?;
        let items: Vec<(Option<String>, String)> = docs.iter().zip(labels).map(|(d, l)| (stratum(d), l)).collect();
        Ok(distribution(&items))
    }

    // Charts

    /// Writes chart payloads for the given ready pipelines (all ready ones
    /// when empty) into `out`. Returns the written paths.
    pub fn export_charts(&self, pipeline_ids: &[String], out: &Path, hypothesis: Option<&HypothesisRequest>) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out).map_err(|e| Error::Io {
            path: out.to_path_buf(),
            source: e,
        })?;
        let ids: Vec<String> = if pipeline_ids.is_empty() {
            self.pipelines()?
                .into_iter()
                .filter(|r| r.status == PipelineStatus::Ready)
                .map(|r| r.id)
                .collect()
        } else {
            pipeline_ids.to_vec()
        };
        let mut written = Vec::new();
        let mut write = |name: String, value: serde_json::Value| -> Result<()> {
            let path = out.join(name);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            fs::write(&path, serde_json::to_vec_pretty(&value)?).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            written.push(path);
            Ok(())
        };

        let mut reports = Vec::new();
        let mut datasets = BTreeSet::new();
        for id in &ids {
            let p = self.pipeline(id)?;
            let report = self.report(id)?;
            datasets.insert(p.config.dataset.clone());
            for (source, tag) in [(Provenance::Cv, "cv"), (Provenance::Heldout, "heldout")] {
                let chart = heatmap_chart(&report, source, Normalize::Row);
                write(format!("heatmaps/{}_{tag}.json", file_safe(id)), serde_json::to_value(chart)?)?;
            }
            if p.model.spec.is_linear() {
                for (a, b) in class_pairs(p.classes().len()) {
                    let (ca, cb) = (&p.classes()[a], &p.classes()[b]);
                    let ranking = global_linear(&p, ca, cb, self.config.top_k)?;
                    write(
                        format!("rankings/{}/{}__{}.json", file_safe(id), file_safe(ca), file_safe(cb)),
                        serde_json::to_value(ranking_chart(&ranking))?,
                    )?;
                }
            } else if let Ok(imp) = global_rf_importance(&p) {
                write(
                    format!("rankings/{}/importance.json", file_safe(id)),
                    serde_json::to_value(importance_chart(&p.id, &p.name, &imp, self.config.top_k))?,
                )?;
            }
            reports.push(report);
        }
        let refs: Vec<&EvaluationReport> = reports.iter().collect();
        write("accuracy.json".into(), serde_json::to_value(accuracy_chart(&refs))?)?;

        for name in &datasets {
            let rec = self.store.dataset_record(name)?;
            if !rec.labeled || rec.years.is_empty() {
                continue;
            }
            let gold = self.gold_distribution(name)?;
            let chart = distribution_chart(&format!("gold labels of {name}"), &[("gold", &gold)], Vec::new())?;
            write(format!("gold_distribution_{}.json", file_safe(name)), serde_json::to_value(chart)?)?;
        }

        if let Some(req) = hypothesis {
            let outcome = self.hypothesis(req)?;
            write(
                format!("predicted_distribution_{}_{}.json", file_safe(&outcome.pipeline_id), file_safe(&outcome.dataset)),
                serde_json::to_value(&outcome.chart)?,
            )?;
        }
        Ok(written)
    }
}
