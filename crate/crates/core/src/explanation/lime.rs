//! Local surrogate explanations: perturb one instance, score the
//! perturbations with the black box, fit a weighted ridge regression on
//! interpretable indicators.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::numeric_features::FeatureQuartiles;
use crate::pipeline::TrainedPipeline;
use crate::representation::RepresentationKind;
use crate::rng::Rng;
use crate::text_features::token_spans;

/// Kernel width for text explanations (distances are cosine, in [0, 1]).
pub const TEXT_KERNEL_WIDTH: f64 = 25.0;
/// Tabular kernel width is this factor times the square root of the
/// number of interpretable features.
pub const TABULAR_KERNEL_FACTOR: f64 = 0.75;
pub const RIDGE_LAMBDA: f64 = 1.0;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_TOP_K: usize = 10;
/// Probabilities reported with an explanation.
pub const REPORTED_PROBABILITIES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeOptions {
    pub n_samples: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for LimeOptions {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

/// Anything that maps raw text to class probabilities.
pub trait TextBlackBox: Sync {
    fn classes(&self) -> &[String];
    fn predict_proba(&self, text: &str) -> Result<Vec<f64>>;
    /// Whether the model sees anything at all in `text`.
    fn has_signal(&self, _text: &str) -> Result<bool> {
        Ok(true)
    }
}

/// Anything that maps a raw (unscaled) feature vector to class probabilities.
pub trait TabularBlackBox: Sync {
    fn classes(&self) -> &[String];
    fn predict_proba(&self, raw: &[f64]) -> Result<Vec<f64>>;
}

impl TextBlackBox for TrainedPipeline {
    fn classes(&self) -> &[String] {
        TrainedPipeline::classes(self)
    }

    fn predict_proba(&self, text: &str) -> Result<Vec<f64>> {
        self.predict_proba_text(text)
    }

    fn has_signal(&self, text: &str) -> Result<bool> {
        Ok(self.representation.transform_text(text)?.nnz() > 0)
    }
}

impl TabularBlackBox for TrainedPipeline {
    fn classes(&self) -> &[String] {
        TrainedPipeline::classes(self)
    }

    fn predict_proba(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let numeric = self
            .representation
            .numeric()
            .ok_or_else(|| Error::Unsupported("tabular explanations need a numeric representation".into()))?;
        self.model.predict_proba(&numeric.finish(raw)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationKind {
    Text,
    Tabular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: String,
    pub weight: f64,
    /// The instance's value: token occurrences for text, raw value for tabular.
    pub value: f64,
    /// Human-readable condition for tabular features (e.g. `0.12 < x <= 0.30`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProbability {
    pub label: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub document_id: String,
    pub pipeline_id: String,
    pub kind: ExplanationKind,
    pub predicted_label: String,
    /// Highest class probabilities, descending.
    pub probabilities: Vec<ClassProbability>,
    /// Top-k surrogate coefficients for the predicted class, by |weight|.
    pub attributions: Vec<Attribution>,
    pub intercept: f64,
    /// Weighted R² of the surrogate on the perturbation sample.
    pub fidelity: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub notes: Vec<String>,
}

/// Weighted ridge fit with an unpenalized intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub r2: f64,
}

/// Minimizes `Σ wᵢ (yᵢ − b − xᵢ·β)² + λ‖β‖²`. The intercept is removed by
/// weighted centering, leaving `(XcᵀWXc + λI)β = XcᵀWyc`.
pub fn weighted_ridge(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Result<RidgeFit> {
    let n = x.len();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(Error::InvalidInput("ridge needs matching, non-empty x, y and weights".into()));
    }
    let p = x[0].len();
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::InvalidInput("ridge weights must have a positive sum".into()));
    }
    let mut x_mean = vec![0.0; p];
    let mut y_mean = 0.0;
    for i in 0..n {
        for j in 0..p {
            x_mean[j] += w[i] * x[i][j];
        }
        y_mean += w[i] * y[i];
    }
    x_mean.iter_mut().for_each(|v| *v /= sw);
    y_mean /= sw;

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut xc = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            xc[j] = x[i][j] - x_mean[j];
        }
        let yc = y[i] - y_mean;
        for a in 0..p {
            let wa = w[i] * xc[a];
            if wa == 0.0 {
                continue;
            }
            rhs[a] += wa * yc;
            for b in a..p {
                gram[(a, b)] += wa * xc[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += lambda;
    }
    let coef: Vec<f64> = if p == 0 {
        Vec::new()
    } else {
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("ridge system is not positive definite".into()))?;
        chol.solve(&rhs).iter().copied().collect()
    };
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();

    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let pred = intercept + coef.iter().zip(&x[i]).map(|(c, v)| c * v).sum::<f64>();
        ss_res += w[i] * (y[i] - pred).powi(2);
        ss_tot += w[i] * (y[i] - y_mean).powi(2);
    }
    let r2 = if ss_tot <= f64::EPSILON * sw * (1.0 + y_mean.abs()) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RidgeFit { coef, intercept, r2 })
}

fn top_probabilities(classes: &[String], proba: &[f64]) -> Vec<ClassProbability> {
    let mut order: Vec<usize> = (0..proba.len()).collect();
    order.sort_by(|&a, &b| proba[b].total_cmp(&proba[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(REPORTED_PROBABILITIES)
        .map(|i| ClassProbability {
            label: classes[i].clone(),
            probability: proba[i],
        })
        .collect()
}

fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn check_options(opts: &LimeOptions) -> Result<()> {
    if opts.n_samples < 2 {
        return Err(Error::InvalidInput("n_samples must be >= 2".into()));
    }
    if opts.k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    Ok(())
}

fn check_proba(classes: &[String], proba: &[f64]) -> Result<()> {
    if proba.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            expected: classes.len(),
            found: proba.len(),
        });
    }
    Ok(())
}

fn top_k(mut attributions: Vec<Attribution>, k: usize) -> Vec<Attribution> {
    attributions.sort_by(|a, b| {
        b.weight
            .abs()
            .total_cmp(&a.weight.abs())
            .then_with(|| a.feature.cmp(&b.feature))
    });
    attributions.truncate(k);
    attributions
}

/// Explains a text classification through token deletion.
///
/// The interpretable space is the presence of each distinct token of the
/// document. Sample 0 is the document itself; every other sample deletes a
/// uniformly chosen number (1 to d−1) of distinct tokens, all occurrences.
pub fn lime_text<B: TextBlackBox + ?Sized>(
    black_box: &B,
    pipeline_id: &str,
    doc: &Document,
    opts: &LimeOptions,
) -> Result<LocalExplanation> {
    check_options(opts)?;
    let spans = token_spans(&doc.text);
    if spans.is_empty() || !black_box.has_signal(&doc.text)? {
        return Err(Error::NothingToExplain);
    }
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, t) in &spans {
        let next = vocab.len();
        vocab.entry(t.as_str()).or_insert(next);
    }
    // Feature order = first occurrence.
    let mut features: Vec<(&str, usize)> = vocab.iter().map(|(t, i)| (*t, *i)).collect();
    features.sort_by_key(|(_, i)| *i);
    let names: Vec<String> = features.iter().map(|(t, _)| t.to_string()).collect();
    let d = names.len();
    let mut counts = vec![0usize; d];
    let span_feature: Vec<usize> = spans.iter().map(|(_, t)| vocab[t.as_str()]).collect();
    for &f in &span_feature {
        counts[f] += 1;
    }

    let mut rng = Rng::new(opts.seed);
    let mut masks: Vec<Vec<f64>> = Vec::with_capacity(opts.n_samples);
    masks.push(vec![1.0; d]);
    for _ in 1..opts.n_samples {
        let remove = if d == 1 { 1 } else { 1 + rng.index(d - 1) };
        let mut mask = vec![1.0; d];
        for j in rng.sample_indices(d, remove) {
            mask[j] = 0.0;
        }
        masks.push(mask);
    }

    let render = |mask: &[f64]| -> String {
        let mut out = String::with_capacity(doc.text.len());
        let mut cursor = 0;
        for ((range, _), &f) in spans.iter().zip(&span_feature) {
            if mask[f] == 0.0 {
                out.push_str(&doc.text[cursor..range.start]);
                cursor = range.end;
            }
        }
        out.push_str(&doc.text[cursor..]);
        out
    };
    let classes = black_box.classes();
    let probas: Vec<Vec<f64>> = masks
        .par_iter()
        .map(|m| black_box.predict_proba(&render(m)))
        .collect::<Result<_>>()?;
    for p in &probas {
        check_proba(classes, p)?;
    }
    let target = first_argmax(&probas[0]);

    let weights: Vec<f64> = masks
        .iter()
        .map(|m| {
            let kept: f64 = m.iter().sum();
            let cos = if kept == 0.0 { 0.0 } else { (kept / d as f64).sqrt() };
            let dist = 1.0 - cos;
            (-(dist * dist) / (TEXT_KERNEL_WIDTH * TEXT_KERNEL_WIDTH)).exp()
        })
        .collect();
    let y: Vec<f64> = probas.iter().map(|p| p[target]).collect();
    let fit = weighted_ridge(&masks, &y, &weights, RIDGE_LAMBDA)?;

    let attributions = names
        .iter()
        .zip(&fit.coef)
        .zip(&counts)
        .map(|((n, &w), &c)| Attribution {
            feature: n.clone(),
            weight: w,
            value: c as f64,
            condition: None,
        })
        .collect();
    Ok(LocalExplanation {
        document_id: doc.id.clone(),
        pipeline_id: pipeline_id.to_string(),
        kind: ExplanationKind::Text,
        predicted_label: classes[target].clone(),
        probabilities: top_probabilities(classes, &probas[0]),
        attributions: top_k(attributions, opts.k),
        intercept: fit.intercept,
        fidelity: fit.r2,
        seed: opts.seed,
        n_samples: opts.n_samples,
        notes: Vec::new(),
    })
}

fn condition(edges: &[f64; 5], bin: usize) -> String {
    match bin {
        0 => format!("x <= {}", edges[1]),
        3 => format!("x > {}", edges[3]),
        b => format!("{} < x <= {}", edges[b], edges[b + 1]),
    }
}

/// Explains a classification of a raw feature vector via quartile bins.
///
/// Perturbations draw a bin uniformly per feature and a value uniformly
/// inside it; the indicator is 1 when the value shares the instance's bin.
/// Features constant in training carry no information and are left out.
pub fn lime_tabular<B: TabularBlackBox + ?Sized>(
    black_box: &B,
    pipeline_id: &str,
    document_id: &str,
    raw: &[f64],
    stats: &FeatureQuartiles,
    opts: &LimeOptions,
) -> Result<LocalExplanation> {
    check_options(opts)?;
    let dim = stats.edges.len();
    if raw.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: raw.len(),
        });
    }
    let mut notes = Vec::new();
    let active: Vec<usize> = (0..dim).filter(|&j| !stats.is_degenerate(j)).collect();
    let degenerate: Vec<&str> = (0..dim)
        .filter(|&j| stats.is_degenerate(j))
        .map(|j| stats.names[j].as_str())
        .collect();
    if !degenerate.is_empty() {
        notes.push(format!(
            "excluded constant features: {}",
            degenerate.join(", ")
        ));
    }
    if active.is_empty() {
        return Err(Error::NothingToExplain);
    }
    let instance_bins: Vec<usize> = active.iter().map(|&j| stats.bin(j, raw[j])).collect();

    let mut rng = Rng::new(opts.seed);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(opts.n_samples);
    let mut masks: Vec<Vec<f64>> = Vec::with_capacity(opts.n_samples);
    samples.push(raw.to_vec());
    masks.push(vec![1.0; active.len()]);
    for _ in 1..opts.n_samples {
        let mut s = raw.to_vec();
        let mut mask = Vec::with_capacity(active.len());
        for (a, &j) in active.iter().enumerate() {
            let e = &stats.edges[j];
            let b = rng.index(4);
            let v = rng.uniform(e[b], e[b + 1]);
            s[j] = v;
            mask.push(if stats.bin(j, v) == instance_bins[a] { 1.0 } else { 0.0 });
        }
        samples.push(s);
        masks.push(mask);
    }

    let classes = black_box.classes();
    let probas: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| black_box.predict_proba(s))
        .collect::<Result<_>>()?;
    for p in &probas {
        check_proba(classes, p)?;
    }
    let target = first_argmax(&probas[0]);
    let width = TABULAR_KERNEL_FACTOR * (active.len() as f64).sqrt();
    let weights: Vec<f64> = masks
        .iter()
        .map(|m| {
            let d2: f64 = m.iter().map(|v| (1.0 - v).powi(2)).sum();
            (-d2 / (width * width)).exp()
        })
        .collect();
    let y: Vec<f64> = probas.iter().map(|p| p[target]).collect();
    let fit = weighted_ridge(&masks, &y, &weights, RIDGE_LAMBDA)?;

    let attributions = active
        .iter()
        .zip(&instance_bins)
        .zip(&fit.coef)
        .map(|((&j, &b), &w)| Attribution {
            feature: stats.names[j].clone(),
            weight: w,
            value: raw[j],
            condition: Some(condition(&stats.edges[j], b)),
        })
        .collect();
    Ok(LocalExplanation {
        document_id: document_id.to_string(),
        pipeline_id: pipeline_id.to_string(),
        kind: ExplanationKind::Tabular,
        predicted_label: classes[target].clone(),
        probabilities: top_probabilities(classes, &probas[0]),
        attributions: top_k(attributions, opts.k),
        intercept: fit.intercept,
        fidelity: fit.r2,
        seed: opts.seed,
        n_samples: opts.n_samples,
        notes,
    })
}

/// Picks the variant matching the pipeline's representation: token deletion
/// for TF-IDF, quartile perturbation of the raw features for numeric.
pub fn explain_document(pipeline: &TrainedPipeline, doc: &Document, opts: &LimeOptions) -> Result<LocalExplanation> {
    match pipeline.kind() {
        RepresentationKind::Text => lime_text(pipeline, &pipeline.id, doc, opts),
        RepresentationKind::Numeric => {
            let numeric = pipeline
                .representation
                .numeric()
                .ok_or_else(|| Error::Unsupported("numeric representation missing its model".into()))?;
            let raw = numeric.raw(doc)?;
            lime_tabular(pipeline, &pipeline.id, &doc.id, &raw, &numeric.quartiles, opts)
        }
    }
}
