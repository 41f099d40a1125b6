//! File-backed persistence.
//!
//! Layout under the root:
//!
//! ```text
//! blobs/<sha256>            content-addressed payloads (datasets, models, reports)
//! datasets/<name>.json      dataset records
//! pipelines/<id>.json       pipeline records (config, status, artifact hashes)
//! artifacts/<kind>/<id>.json  grid reports, views, explanations, hypothesis results
//! ```
//!
//! Every write goes to a temporary file in the target directory and is
//! renamed into place, so readers never see a partial record. Blobs are
//! verified against their hash on read.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::TrainedModel;
use crate::corpus::{ingest, Dataset, Format};
use crate::error::{Error, Result};
use crate::pipeline::{EvaluationReport, PipelineConfig, TrainedPipeline};
use crate::representation::Representation;

pub const STORE_FORMAT_VERSION: u32 = 1;

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn format_version() -> u32 {
    STORE_FORMAT_VERSION
}

/// Names used as file stems: letters, digits, `-`, `_`, `.`; no leading dot.
pub fn check_name(kind: &str, name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{kind} name `{name}` must be 1-128 characters of letters, digits, `-`, `_` or `.`"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub name: String,
    pub created_at_ms: u64,
    pub documents: usize,
    pub labels: Vec<String>,
    /// Every document has a gold label.
    pub labeled: bool,
    /// Distinct publication years present.
    pub years: Vec<i32>,
    pub blob: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineStatus {
    Configured,
    Training,
    Ready,
    Failed,
}

impl PipelineStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineStatus::Configured => "configured",
            PipelineStatus::Training => "training",
            PipelineStatus::Ready => "ready",
            PipelineStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifacts {
    pub representation: Option<String>,
    pub model: Option<String>,
    pub split: Option<String>,
    pub report: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub id: String,
    pub name: String,
    pub config: PipelineConfig,
    pub status: PipelineStatus,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
    pub artifacts: PipelineArtifacts,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SplitArtifact {
    train_ids: Vec<String>,
    test_ids: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Grid,
    View,
    Explanation,
    Hypothesis,
}

impl ArtifactKind {
    fn dir(self) -> &'static str {
        match self {
            ArtifactKind::Grid => "grid",
            ArtifactKind::View => "view",
            ArtifactKind::Explanation => "explanation",
            ArtifactKind::Hypothesis => "hypothesis",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub id: String,
    pub kind: ArtifactKind,
    /// Optional lookup key, e.g. `<pipeline id>/<document id>` for explanations.
    #[serde(default)]
    pub key: Option<String>,
    pub created_at_ms: u64,
    pub blob: String,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    /// Serializes read-modify-write cycles on pipeline records.
    records: Mutex<()>,
}

impl Store {
    /// Opens (creating if needed) a store. Pipelines left in `training` by an
    /// interrupted process are marked failed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in ["blobs", "datasets", "pipelines", "artifacts"] {
            let p = root.join(dir);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let store = Self {
            root,
            records: Mutex::new(()),
        };
        for mut rec in store.list_pipelines()? {
            if rec.status == PipelineStatus::Training {
                rec.status = PipelineStatus::Failed;
                rec.error = Some("training was interrupted by a restart".into());
                rec.updated_at_ms = now_ms();
                store.write_pipeline(&rec)?;
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("record"),
            uuid::Uuid::new_v4().simple()
        ));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn blob_path(&self, hash: &str) -> PathBuf {
        self.root.join("blobs").join(hash)
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<String> {
        let hash = hex::encode(Sha256::digest(bytes));
        let path = self.blob_path(&hash);
        if !path.exists() {
            Self::write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    pub fn get_blob(&self, hash: &str) -> Result<Vec<u8>> {
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::InvalidInput(format!("`{hash}` is not a blob hash")));
        }
        let path = self.blob_path(hash);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if hex::encode(Sha256::digest(&bytes)) != hash {
            return Err(Error::Corrupt {
                path,
                reason: "content does not match its hash".into(),
            });
        }
        Ok(bytes)
    }

    fn put_json<T: Serialize>(&self, value: &T) -> Result<String> {
        self.put_blob(&serde_json::to_vec(value)?)
    }

    fn get_json<T: DeserializeOwned>(&self, hash: &str) -> Result<T> {
        let bytes = self.get_blob(hash)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
            path: self.blob_path(hash),
            reason: e.to_string(),
        })
    }

    fn write_record<T: Serialize>(path: &Path, value: &T) -> Result<()> {
        Self::write_atomic(path, &serde_json::to_vec_pretty(value)?)
    }

    fn read_record<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(what.to_string()));
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let corrupt = |reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| corrupt("missing format_version".into()))? as u32;
        if found != STORE_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                found,
                expected: STORE_FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))
    }

    fn list_records<T: DeserializeOwned>(&self, dir: &Path) -> Result<Vec<T>> {
        let mut paths: Vec<PathBuf> = match fs::read_dir(dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter(|p| !p.file_name().and_then(|n| n.to_str()).unwrap_or("").starts_with('.'))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(dir, e)),
        };
        paths.sort();
        paths.iter().map(|p| Self::read_record(p, &p.display().to_string())).collect()
    }

    // Datasets

    fn dataset_path(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{name}.json"))
    }

    /// Stores a dataset under its name. Saving identical content again is a
    /// no-op; different content under an existing name is a conflict.
    pub fn save_dataset(&self, dataset: &Dataset) -> Result<DatasetRecord> {
        check_name("dataset", &dataset.name)?;
        let mut buf = Vec::new();
        dataset.write_jsonl(&mut buf)?;
        let blob = self.put_blob(&buf)?;
        let _guard = self.records.lock().unwrap_or_else(|e| e.into_inner());
        match self.dataset_record(&dataset.name) {
            Ok(existing) if existing.blob == blob => return Ok(existing),
            Ok(_) => {
                return Err(Error::Conflict(format!(
                    "dataset `{}` already exists with different content",
                    dataset.name
                )))
            }
            Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
        let mut years: Vec<i32> = dataset.documents().iter().filter_map(|d| d.year).collect();
        years.sort_unstable();
        years.dedup();
        let rec = DatasetRecord {
            format_version: STORE_FORMAT_VERSION,
            name: dataset.name.clone(),
            created_at_ms: now_ms(),
            documents: dataset.len(),
            labels: dataset.label_set().to_vec(),
            labeled: dataset.is_labeled(),
            years,
            blob,
        };
        Self::write_record(&self.dataset_path(&dataset.name), &rec)?;
        Ok(rec)
    }

    pub fn dataset_record(&self, name: &str) -> Result<DatasetRecord> {
        check_name("dataset", name)?;
        Self::read_record(&self.dataset_path(name), &format!("dataset `{name}`"))
    }

    pub fn load_dataset(&self, name: &str) -> Result<Dataset> {
        let rec = self.dataset_record(name)?;
        // Verifies the hash before parsing.
        self.get_blob(&rec.blob)?;
        ingest(&self.blob_path(&rec.blob), Format::Jsonl, &rec.name)
    }

    pub fn list_datasets(&self) -> Result<Vec<DatasetRecord>> {
        self.list_records(&self.root.join("datasets"))
    }

    // Pipelines

    fn pipeline_path(&self, id: &str) -> PathBuf {
        self.root.join("pipelines").join(format!("{id}.json"))
    }

    fn write_pipeline(&self, rec: &PipelineRecord) -> Result<()> {
        Self::write_record(&self.pipeline_path(&rec.id), rec)
    }

    /// Registers a configuration under a fresh id, status `configured`.
    pub fn create_pipeline(&self, config: &PipelineConfig) -> Result<PipelineRecord> {
        let errs = config.field_errors();
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        let now = now_ms();
        let rec = PipelineRecord {
            format_version: STORE_FORMAT_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            name: config.name(),
            config: config.clone(),
            status: PipelineStatus::Configured,
            created_at_ms: now,
            updated_at_ms: now,
            artifacts: PipelineArtifacts::default(),
            error: None,
            warnings: Vec::new(),
        };
        self.write_pipeline(&rec)?;
        Ok(rec)
    }

    pub fn pipeline(&self, id: &str) -> Result<PipelineRecord> {
        check_name("pipeline", id)?;
        Self::read_record(&self.pipeline_path(id), &format!("pipeline `{id}`"))
    }

    pub fn list_pipelines(&self) -> Result<Vec<PipelineRecord>> {
        let mut all: Vec<PipelineRecord> = self.list_records(&self.root.join("pipelines"))?;
        all.sort_by(|a, b| a.created_at_ms.cmp(&b.created_at_ms).then_with(|| a.id.cmp(&b.id)));
        Ok(all)
    }

    fn update_pipeline(&self, id: &str, f: impl FnOnce(&mut PipelineRecord) -> Result<()>) -> Result<PipelineRecord> {
        let _guard = self.records.lock().unwrap_or_else(|e| e.into_inner());
        let mut rec = self.pipeline(id)?;
        f(&mut rec)?;
        rec.updated_at_ms = now_ms();
        self.write_pipeline(&rec)?;
        Ok(rec)
    }

    /// `configured → training`; any other starting status is a conflict.
    pub fn begin_training(&self, id: &str) -> Result<PipelineRecord> {
        self.update_pipeline(id, |rec| {
            if rec.status != PipelineStatus::Configured {
                return Err(Error::Conflict(format!(
                    "pipeline `{}` is {}; training starts only from configured",
                    rec.id,
                    rec.status.as_str()
                )));
            }
            rec.status = PipelineStatus::Training;
            Ok(())
        })
    }

    /// `training → ready`, storing the trained artifacts and report.
    pub fn finish_training(
        &self,
        pipeline: &TrainedPipeline,
        report: Option<&EvaluationReport>,
    ) -> Result<PipelineRecord> {
        let representation = self.put_json(&pipeline.representation)?;
        let model = self.put_blob(&pipeline.model.to_bytes()?)?;
        let split = self.put_json(&SplitArtifact {
            train_ids: pipeline.train_ids.clone(),
            test_ids: pipeline.test_ids.clone(),
        })?;
        let report_blob = report.map(|r| self.put_json(r)).transpose()?;
        self.update_pipeline(&pipeline.id, |rec| {
            if rec.status != PipelineStatus::Training {
                return Err(Error::Conflict(format!(
                    "pipeline `{}` is {}, not training",
                    rec.id,
                    rec.status.as_str()
                )));
            }
            rec.status = PipelineStatus::Ready;
            rec.artifacts = PipelineArtifacts {
                representation: Some(representation),
                model: Some(model),
                split: Some(split),
                report: report_blob,
            };
            rec.warnings = pipeline.model.warnings.clone();
            if let Some(r) = report {
                for w in &r.warnings {
                    if !rec.warnings.contains(w) {
                        rec.warnings.push(w.clone());
                    }
                }
            }
            Ok(())
        })
    }

    /// `training → failed`.
    pub fn fail_training(&self, id: &str, message: &str) -> Result<PipelineRecord> {
        self.update_pipeline(id, |rec| {
            if rec.status != PipelineStatus::Training {
                return Err(Error::Conflict(format!(
                    "pipeline `{}` is {}, not training",
                    rec.id,
                    rec.status.as_str()
                )));
            }
            rec.status = PipelineStatus::Failed;
            rec.error = Some(message.to_string());
            Ok(())
        })
    }

    fn require_ready(&self, id: &str) -> Result<PipelineRecord> {
        let rec = self.pipeline(id)?;
        if rec.status != PipelineStatus::Ready {
            return Err(Error::NotReady {
                id: rec.id,
                status: rec.status.as_str().into(),
            });
        }
        Ok(rec)
    }

    pub fn load_pipeline(&self, id: &str) -> Result<TrainedPipeline> {
        let rec = self.require_ready(id)?;
        let missing = |what: &str| Error::Corrupt {
            path: self.pipeline_path(id),
            reason: format!("ready pipeline lacks its {what} artifact"),
        };
        let rep_hash = rec.artifacts.representation.as_deref().ok_or_else(|| missing("representation"))?;
        let model_hash = rec.artifacts.model.as_deref().ok_or_else(|| missing("model"))?;
        let split_hash = rec.artifacts.split.as_deref().ok_or_else(|| missing("split"))?;
        let representation: Representation = self.get_json(rep_hash)?;
        let model = TrainedModel::from_bytes_named(
            &self.get_blob(model_hash)?,
            &self.blob_path(model_hash).display().to_string(),
        )?;
        let split: SplitArtifact = self.get_json(split_hash)?;
        Ok(TrainedPipeline {
            id: rec.id,
            name: rec.name,
            config: rec.config,
            representation,
            model,
            train_ids: split.train_ids,
            test_ids: split.test_ids,
        })
    }

    pub fn save_report(&self, id: &str, report: &EvaluationReport) -> Result<PipelineRecord> {
        self.require_ready(id)?;
        let hash = self.put_json(report)?;
        self.update_pipeline(id, |rec| {
            rec.artifacts.report = Some(hash);
            Ok(())
        })
    }

    /// The stored evaluation report, if the pipeline has one.
    pub fn load_report(&self, id: &str) -> Result<Option<EvaluationReport>> {
        let rec = self.require_ready(id)?;
        rec.artifacts.report.as_deref().map(|h| self.get_json(h)).transpose()
    }

    // Other artifacts

    fn artifact_path(&self, kind: ArtifactKind, id: &str) -> PathBuf {
        self.root.join("artifacts").join(kind.dir()).join(format!("{id}.json"))
    }

    pub fn save_artifact<T: Serialize>(&self, kind: ArtifactKind, key: Option<String>, value: &T) -> Result<ArtifactRecord> {
        let rec = ArtifactRecord {
            format_version: STORE_FORMAT_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            kind,
            key,
            created_at_ms: now_ms(),
            blob: self.put_json(value)?,
        };
        Self::write_record(&self.artifact_path(kind, &rec.id), &rec)?;
        Ok(rec)
    }

    pub fn artifact(&self, kind: ArtifactKind, id: &str) -> Result<ArtifactRecord> {
        check_name("artifact", id)?;
        Self::read_record(&self.artifact_path(kind, id), &format!("{} `{id}`", kind.dir()))
    }

    pub fn load_artifact<T: DeserializeOwned>(&self, kind: ArtifactKind, id: &str) -> Result<T> {
        let rec = self.artifact(kind, id)?;
        self.get_json(&rec.blob)
    }

    pub fn list_artifacts(&self, kind: ArtifactKind) -> Result<Vec<ArtifactRecord>> {
        self.list_records(&self.root.join("artifacts").join(kind.dir()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ModelSpec;
    use crate::corpus::Document;
    use crate::representation::RepresentationConfig;

    fn tiny() -> Dataset {
        Dataset::new(
            "tiny",
            vec![
                Document::new("a", "one two").with_label("X").with_year(1965),
                Document::new("b", "three four").with_label("Y"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dataset_round_trip_and_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let rec = store.save_dataset(&tiny()).unwrap();
        assert_eq!(rec.years, vec![1965]);
        assert_eq!(store.load_dataset("tiny").unwrap(), tiny());
        assert_eq!(store.save_dataset(&tiny()).unwrap(), rec);
        let other = Dataset::new("tiny", vec![Document::new("z", "zz")]).unwrap();
        assert!(matches!(store.save_dataset(&other), Err(Error::Conflict(_))));
        assert!(matches!(store.load_dataset("nope"), Err(Error::NotFound(_))));
        assert!(store.load_dataset("../etc").is_err());
    }

    #[test]
    fn status_transitions_are_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let cfg = PipelineConfig::new("tiny", RepresentationConfig::tfidf(), ModelSpec::nb(1.0));
        let a = store.create_pipeline(&cfg).unwrap();
        let b = store.create_pipeline(&cfg).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a.name, b.name);
        store.begin_training(&a.id).unwrap();
        assert!(matches!(store.begin_training(&a.id), Err(Error::Conflict(_))));
        assert!(matches!(store.load_pipeline(&a.id), Err(Error::NotReady { .. })));
        store.fail_training(&a.id, "boom").unwrap();
        assert!(matches!(store.begin_training(&a.id), Err(Error::Conflict(_))));
        assert_eq!(store.pipeline(&a.id).unwrap().status, PipelineStatus::Failed);
    }

    #[test]
    fn interrupted_training_fails_on_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let cfg = PipelineConfig::new("tiny", RepresentationConfig::tfidf(), ModelSpec::nb(1.0));
        let a = store.create_pipeline(&cfg).unwrap();
        store.begin_training(&a.id).unwrap();
        drop(store);
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.pipeline(&a.id).unwrap().status, PipelineStatus::Failed);
    }

    #[test]
    fn corrupt_blob_names_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let rec = store.save_dataset(&tiny()).unwrap();
        fs::write(store.blob_path(&rec.blob), b"garbage").unwrap();
        let err = store.load_dataset("tiny").unwrap_err();
        assert!(err.to_string().contains(&rec.blob), "{err}");
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.save_dataset(&tiny()).unwrap();
        let path = store.dataset_path("tiny");
        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            store.dataset_record("tiny"),
            Err(Error::VersionMismatch { found: 7, expected: 1, .. })
        ));
    }
}
