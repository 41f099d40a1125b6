//! Cross-pipeline comparison: the prediction matrix and the explanation,
//! set-based agreement and document-based agreement views built from it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocSet, Document};
use crate::error::{Error, Result};
use crate::evaluation::csv_field;
use crate::pipeline::TrainedPipeline;
use crate::representation::RepresentationKind;

/// A pipeline as the views see it.
pub trait Predictor: Sync {
    fn id(&self) -> &str;
    fn name(&self) -> &str;
    fn kind(&self) -> RepresentationKind;
    fn is_trained(&self) -> bool {
        true
    }
    fn predict_document(&self, doc: &Document) -> Result<String>;
}

impl Predictor for TrainedPipeline {
    fn id(&self) -> &str {
        &self.id
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn kind(&self) -> RepresentationKind {
        TrainedPipeline::kind(self)
    }
    fn predict_document(&self, doc: &Document) -> Result<String> {
        self.predict(doc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineColumn {
    pub id: String,
    pub name: String,
    pub kind: RepresentationKind,
}

/// Documents × pipelines → predicted label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    pub pipelines: Vec<PipelineColumn>,
    pub document_ids: Vec<String>,
    pub texts: Vec<String>,
    /// `predictions[d][p]`: label pipeline `p` assigns to document `d`.
    pub predictions: Vec<Vec<String>>,
}

impl PredictionMatrix {
    pub fn cells(&self) -> usize {
        self.predictions.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.document_ids.is_empty() || self.pipelines.is_empty()
    }
}

pub fn build_prediction_matrix(pipelines: &[&dyn Predictor], docs: &DocSet) -> Result<PredictionMatrix> {
    if docs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(p) = pipelines.iter().find(|p| !p.is_trained()) {
        return Err(Error::Untrained(p.id().to_string()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in pipelines {
        if !seen.insert(p.id()) {
            return Err(Error::InvalidInput(format!("pipeline `{}` listed twice", p.id())));
        }
    }
    let predictions: Vec<Vec<String>> = docs
        .documents
        .par_iter()
        .map(|d| pipelines.iter().map(|p| p.predict_document(d)).collect())
        .collect::<Result<_>>()?;
    Ok(PredictionMatrix {
        pipelines: pipelines
            .iter()
            .map(|p| PipelineColumn {
                id: p.id().to_string(),
                name: p.name().to_string(),
                kind: p.kind(),
            })
            .collect(),
        document_ids: docs.documents.iter().map(|d| d.id.clone()).collect(),
        texts: docs.documents.iter().map(|d| d.text.clone()).collect(),
        predictions,
    })
}

/// Stored explanations keyed by `(pipeline id, document id)`.
pub type ExplanationIndex = BTreeMap<(String, String), String>;

/// Reference used when no stored explanation exists yet; the explanation is
/// then computed on request.
pub fn explanation_key(pipeline_id: &str, document_id: &str) -> String {
    format!("{pipeline_id}/{document_id}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRow {
    pub document_id: String,
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub prediction: String,
    /// Token-level explanation; `None` (N/A) for numeric pipelines.
    pub textual_explanation: Option<String>,
    /// Feature-level explanation; `None` (N/A) for text pipelines.
    pub feature_explanation: Option<String>,
}

pub fn explanation_view(matrix: &PredictionMatrix, index: &ExplanationIndex) -> Vec<ExplanationRow> {
    let mut rows = Vec::with_capacity(matrix.cells());
    for (d, doc_id) in matrix.document_ids.iter().enumerate() {
        for (p, col) in matrix.pipelines.iter().enumerate() {
            let reference = index
                .get(&(col.id.clone(), doc_id.clone()))
                .cloned()
                .unwrap_or_else(|| explanation_key(&col.id, doc_id));
            let (textual, feature) = match col.kind {
                RepresentationKind::Text => (Some(reference), None),
                RepresentationKind::Numeric => (None, Some(reference)),
            };
            rows.push(ExplanationRow {
                document_id: doc_id.clone(),
                pipeline_id: col.id.clone(),
                pipeline_name: col.name.clone(),
                prediction: matrix.predictions[d][p].clone(),
                textual_explanation: textual,
                feature_explanation: feature,
            });
        }
    }
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Correct,
    Wrong,
    Unknown,
}

impl Tag {
    pub fn of(predicted: &str, gold: Option<&String>) -> Self {
        match gold {
            None => Tag::Unknown,
            Some(g) if g == predicted => Tag::Correct,
            Some(_) => Tag::Wrong,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Correct => "correct",
            Tag::Wrong => "wrong",
            Tag::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedDocument {
    pub id: String,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementRow {
    /// Pipeline ids, in matrix column order.
    pub pipelines: Vec<String>,
    pub pipeline_names: Vec<String>,
    pub label: String,
    pub documents: Vec<TaggedDocument>,
}

/// Column indices of the pipelines predicting each label for document `d`.
fn agreeing_sets(row: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut sets: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (p, label) in row.iter().enumerate() {
        sets.entry(label.as_str()).or_default().push(p);
    }
    sets
}

/// Rows keyed by (exact agreeing set, label). Ordered by set size, then
/// document count (both descending), then set and label.
pub fn set_agreement_view(matrix: &PredictionMatrix, gold: &BTreeMap<String, String>) -> Vec<AgreementRow> {
    let mut groups: BTreeMap<(Vec<usize>, String), Vec<TaggedDocument>> = BTreeMap::new();
    for (d, doc_id) in matrix.document_ids.iter().enumerate() {
        for (label, set) in agreeing_sets(&matrix.predictions[d]) {
            groups
                .entry((set, label.to_string()))
                .or_default()
                .push(TaggedDocument {
                    id: doc_id.clone(),
                    tag: Tag::of(label, gold.get(doc_id)),
                });
        }
    }
    let mut keyed: Vec<((Vec<usize>, String), Vec<TaggedDocument>)> = groups.into_iter().collect();
    keyed.sort_by(|((sa, la), da), ((sb, lb), db)| {
        sb.len()
            .cmp(&sa.len())
            .then(db.len().cmp(&da.len()))
            .then_with(|| sa.cmp(sb))
            .then_with(|| la.cmp(lb))
    });
    keyed
        .into_iter()
        .map(|((set, label), documents)| AgreementRow {
            pipelines: set.iter().map(|&p| matrix.pipelines[p].id.clone()).collect(),
            pipeline_names: set.iter().map(|&p| matrix.pipelines[p].name.clone()).collect(),
            label,
            documents,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub label: String,
    pub pipelines: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocAgreementRow {
    pub document_id: String,
    pub text: String,
    /// Pipelines predicting the prevailing label.
    pub largest_set: Vec<String>,
    pub prevailing: String,
    pub gold: Option<String>,
    pub tag: Tag,
    /// Several labels share the largest set size; the smallest label wins.
    pub tie: bool,
    /// Every set of the largest size, by label (only filled on a tie).
    pub tied_sets: Vec<LabelSet>,
}

pub fn doc_agreement_view(matrix: &PredictionMatrix, gold: &BTreeMap<String, String>) -> Vec<DocAgreementRow> {
    matrix
        .document_ids
        .iter()
        .enumerate()
        .map(|(d, doc_id)| {
            let sets = agreeing_sets(&matrix.predictions[d]);
            let top = sets.values().map(Vec::len).max().unwrap_or(0);
            // BTreeMap iteration is label order, so the first is the smallest.
            let tied: Vec<(&str, &Vec<usize>)> = sets
                .iter()
                .filter(|(_, s)| s.len() == top)
                .map(|(l, s)| (*l, s))
                .collect();
            let ids = |s: &[usize]| -> Vec<String> { s.iter().map(|&p| matrix.pipelines[p].id.clone()).collect() };
            let (prevailing, largest) = tied
                .first()
                .map(|(l, s)| (l.to_string(), ids(s)))
                .unwrap_or_default();
            let tie = tied.len() > 1;
            let gold_label = gold.get(doc_id).cloned();
            DocAgreementRow {
                document_id: doc_id.clone(),
                text: matrix.texts[d].clone(),
                tag: Tag::of(&prevailing, gold_label.as_ref()),
                largest_set: largest,
                prevailing,
                gold: gold_label,
                tie,
                tied_sets: if tie {
                    tied.iter()
                        .map(|(l, s)| LabelSet {
                            label: l.to_string(),
                            pipelines: ids(s),
                        })
                        .collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect()
}

fn join(items: &[String]) -> String {
    items.join(" | ")
}

pub fn explanation_view_csv(rows: &[ExplanationRow]) -> String {
    let mut out = String::from("document_id,pipeline_id,pipeline_name,prediction,textual_explanation,feature_explanation\n");
    for r in rows {
        let na = |o: &Option<String>| o.clone().unwrap_or_else(|| "N/A".into());
        out.push_str(
            &[
                csv_field(&r.document_id),
                csv_field(&r.pipeline_id),
                csv_field(&r.pipeline_name),
                csv_field(&r.prediction),
                csv_field(&na(&r.textual_explanation)),
                csv_field(&na(&r.feature_explanation)),
            ]
            .join(","),
        );
        out.push('\n');
    }
    out
}

/// One line per (row, document) so tags stay machine-readable.
pub fn set_agreement_csv(rows: &[AgreementRow]) -> String {
    let mut out = String::from("set_size,pipelines,label,document_id,tag\n");
    for r in rows {
        for d in &r.documents {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.pipelines.len(),
                csv_field(&join(&r.pipeline_names)),
                csv_field(&r.label),
                csv_field(&d.id),
                d.tag.as_str()
            ));
        }
    }
    out
}

pub fn doc_agreement_csv(rows: &[DocAgreementRow]) -> String {
    let mut out = String::from("document_id,text,largest_set,prevailing,gold,tag,tie\n");
    for r in rows {
        out.push_str(
            &[
                csv_field(&r.document_id),
                csv_field(&r.text),
                csv_field(&join(&r.largest_set)),
                csv_field(&r.prevailing),
                csv_field(r.gold.as_deref().unwrap_or("unknown")),
                r.tag.as_str().to_string(),
                r.tie.to_string(),
            ]
            .join(","),
        );
        out.push('\n');
    }
    out
}
