//! Datasets, document identity, deterministic splitting and collocation of
//! held-out sets.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use synthetic::{
    generate_synthetic, indicative_tokens, topic_tokens, SyntheticShape, SyntheticSpec, GENRES,
};

/// FNV-1a 64-bit digest of lowercased, whitespace-collapsed text.
pub fn content_hash(text: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut first = true;
    for word in text.split_whitespace() {
        if !first {
            hash ^= u64::from(b' ');
            hash = hash.wrapping_mul(PRIME);
        }
        first = false;
        for byte in word.to_lowercase().bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    hash
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub gold_label: Option<String>,
    pub year: Option<i32>,
    pub source: Option<String>,
    pub content_hash: u64,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            content_hash: content_hash(&text),
            text,
            gold_label: None,
            year: None,
            source: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.gold_label = Some(label.into());
        self
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = Some(year);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}

/// Interchange form of a document (JSONL export/ingest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub source: Option<String>,
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        Self {
            id: d.id.clone(),
            text: d.text.clone(),
            label: d.gold_label.clone(),
            year: d.year,
            source: d.source.clone(),
        }
    }
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        let mut d = Document::new(r.id, r.text);
        d.gold_label = r.label.filter(|l| !l.is_empty());
        d.year = r.year;
        d.source = r.source.filter(|s| !s.is_empty());
        d
    }
}

/// A named, ordered document collection.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    documents: Vec<Document>,
    label_set: Vec<String>,
}

impl Dataset {
    /// Validates id uniqueness and derives the sorted label set.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::new();
        let mut dups = BTreeSet::new();
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                dups.insert(d.id.clone());
            }
        }
        if !dups.is_empty() {
            return Err(Error::DuplicateIds(dups.into_iter().collect()));
        }
        let label_set: BTreeSet<String> = documents
            .iter()
            .filter_map(|d| d.gold_label.clone())
            .collect();
        Ok(Self {
            name: name.into(),
            documents,
            label_set: label_set.into_iter().collect(),
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        !self.label_set.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Documents for `ids`, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&Document>> {
        let index: HashMap<&str, &Document> =
            self.documents.iter().map(|d| (d.id.as_str(), d)).collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingDocument(id.clone()))
            })
            .collect()
    }

    /// Concatenation of several datasets (ids must stay unique).
    pub fn combine(name: impl Into<String>, parts: &[&Dataset]) -> Result<Self> {
        let docs = parts
            .iter()
            .flat_map(|d| d.documents.iter().cloned())
            .collect();
        Self::new(name, docs)
    }

    /// Copy with all gold labels removed (unlabeled-data role).
    pub fn without_labels(&self, name: impl Into<String>) -> Self {
        let documents = self
            .documents
            .iter()
            .cloned()
            .map(|mut d| {
                d.gold_label = None;
                d
            })
            .collect();
        Self {
            name: name.into(),
            documents,
            label_set: Vec::new(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut out, &DocumentRecord::from(d))?;
            out.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    pub fn export_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "text", "label", "year", "source"])?;
        for d in &self.documents {
            w.write_record([
                d.id.as_str(),
                d.text.as_str(),
                d.gold_label.as_deref().unwrap_or(""),
                &d.year.map(|y| y.to_string()).unwrap_or_default(),
                d.source.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::Config(format!("unknown dataset format `{other}`"))),
        }
    }
}

/// Reads a CSV (RFC-4180, header row) or JSONL dataset file.
pub fn ingest(path: &Path, format: Format, name: &str) -> Result<Dataset> {
    let docs = match format {
        Format::Csv => read_csv(path)?,
        Format::Jsonl => read_jsonl(path)?,
    };
    Dataset::new(name, docs)
}

fn read_csv(path: &Path) -> Result<Vec<Document>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("id").ok_or_else(|| Error::MissingField("id".into()))?;
    let text_col = col("text").ok_or_else(|| Error::MissingField("text".into()))?;
    let label_col = col("label");
    let year_col = col("year");
    let source_col = col("source");

    let mut docs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: Option<usize>| {
            c.and_then(|c| record.get(c))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        let mut doc = Document::new(&record[id_col], &record[text_col]);
        doc.gold_label = field(label_col);
        doc.source = field(source_col);
        if let Some(y) = field(year_col) {
            doc.year = Some(y.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                message: format!("row {}: year `{y}` is not an integer", line + 2),
            })?);
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn read_jsonl(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: format!("line {}: {e}", n + 1),
        })?;
        for key in ["id", "text"] {
            if value.get(key).is_none() {
                return Err(Error::MissingField(key.into()));
            }
        }
        let record: DocumentRecord =
            serde_json::from_value(value).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: format!("line {}: {e}", n + 1),
            })?;
        docs.push(record.into());
    }
    Ok(docs)
}

/// Held-out fraction and seed for a train/test split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.1,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Largest-remainder allocation of `total` items over groups proportional to
/// `sizes`; ties go to the earlier group.
fn allocate(sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut alloc: Vec<usize> = quotas
        .iter()
        .zip(sizes)
        .map(|(q, &n)| ((q + 1e-9).floor() as usize).min(n))
        .collect();
    let mut remaining = total.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - alloc[a] as f64;
        let fb = quotas[b] - alloc[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    while remaining > 0 {
        let mut progressed = false;
        for &g in &order {
            if remaining == 0 {
                break;
            }
            if alloc[g] < sizes[g] {
                alloc[g] += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    alloc
}

/// Deterministic train/test partition, stratified by gold label when the
/// dataset is labeled. Both id lists follow the dataset's stored order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test_fraction {} outside (0, 1)",
            spec.test_fraction
        )));
    }
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidSplit(format!(
            "test_fraction {} on {n} documents leaves an empty partition",
            spec.test_fraction
        )));
    }

    let mut rng = Rng::new(spec.seed);
    let mut in_test = vec![false; n];
    if dataset.is_labeled() {
        let mut groups: BTreeMap<(bool, String), Vec<usize>> = BTreeMap::new();
        for (i, d) in dataset.documents.iter().enumerate() {
            let key = match &d.gold_label {
                Some(l) => (false, l.clone()),
                None => (true, String::new()),
            };
            groups.entry(key).or_default().push(i);
        }
        let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
        let quotas = allocate(&sizes, spec.test_fraction, n_test);
        for (members, quota) in groups.into_values().zip(quotas) {
            let mut members = members;
            rng.shuffle(&mut members);
            for &i in &members[..quota] {
                in_test[i] = true;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for &i in &order[..n_test] {
            in_test[i] = true;
        }
    }

    let mut out = Split {
        train_ids: Vec::with_capacity(n - n_test),
        test_ids: Vec::with_capacity(n_test),
    };
    for (d, &t) in dataset.documents.iter().zip(&in_test) {
        if t {
            out.test_ids.push(d.id.clone());
        } else {
            out.train_ids.push(d.id.clone());
        }
    }
    Ok(out)
}

/// Deduplicated union of documents, ordered by content hash.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DocSet {
    pub documents: Vec<Document>,
}

impl DocSet {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Gold labels of the documents that have one.
    pub fn gold(&self) -> BTreeMap<String, String> {
        self.documents
            .iter()
            .filter_map(|d| d.gold_label.clone().map(|l| (d.id.clone(), l)))
            .collect()
    }
}

/// Keeps the first document seen for each content hash.
pub fn collocate<'a>(docs: impl IntoIterator<Item = &'a Document>) -> DocSet {
    let mut by_hash: BTreeMap<u64, Document> = BTreeMap::new();
    for d in docs {
        by_hash.entry(d.content_hash).or_insert_with(|| d.clone());
    }
    DocSet {
        documents: by_hash.into_values().collect(),
    }
}

/// Union of the test partitions of several split datasets.
pub fn collocate_test_sets(parts: &[(&Dataset, &Split)]) -> Result<DocSet> {
    let mut docs = Vec::new();
    for (dataset, split) in parts {
        docs.extend(dataset.select(&split.test_ids)?);
    }
    Ok(collocate(docs))
}
