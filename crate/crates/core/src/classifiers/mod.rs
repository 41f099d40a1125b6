//! Trainable classifiers behind one contract: multinomial Naive Bayes,
//! one-vs-one SVC (linear and RBF) and a random forest.
//!
//! All models consume [`SparseVector`] rows, so TF-IDF matrices and dense
//! curated features go through the same code paths.

pub mod forest;
pub mod linear;
pub mod nb;
mod serialize;
pub mod smo;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

pub use forest::{ForestModel, Node, Tree};
pub use linear::{
    dual_objective, kkt_violations, solve_linear_dual, DualSolution, LinearPair, LinearSvcModel,
    SolverStats, DUAL_GAP_TOL, KKT_TOL,
};
pub use nb::NaiveBayesModel;
pub use serialize::{MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use smo::{RbfPair, RbfSvcModel, SMO_TOL};

/// Smallest smoothing value NB accepts; `alpha = 0` is raised to this.
pub const NB_MIN_ALPHA: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gini,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Nb {
        alpha: f64,
    },
    Svc {
        kernel: Kernel,
        #[serde(rename = "C", alias = "c")]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        /// Seeds the coordinate order of the per-pair solvers.
        #[serde(default)]
        seed: u64,
    },
    Rf {
        n_estimators: usize,
        max_features: usize,
        #[serde(default)]
        criterion: Criterion,
        #[serde(default)]
        seed: u64,
    },
}

/// A single validation failure, keyed by the offending field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl ModelSpec {
    pub fn nb(alpha: f64) -> Self {
        Self::Nb { alpha }
    }

    pub fn svc_linear(c: f64) -> Self {
        Self::Svc {
            kernel: Kernel::Linear,
            c,
            gamma: None,
            seed: 0,
        }
    }

    pub fn svc_rbf(c: f64, gamma: f64) -> Self {
        Self::Svc {
            kernel: Kernel::Rbf,
            c,
            gamma: Some(gamma),
            seed: 0,
        }
    }

    pub fn rf(n_estimators: usize, max_features: usize, seed: u64) -> Self {
        Self::Rf {
            n_estimators,
            max_features,
            criterion: Criterion::Gini,
            seed,
        }
    }

    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        match *self {
            Self::Nb { alpha } => {
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    errs.push(FieldError::new("alpha", "alpha must be a finite value >= 0"));
                }
            }
            Self::Svc { kernel, c, gamma, .. } => {
                if !(c > 0.0 && c.is_finite()) {
                    errs.push(FieldError::new("C", "C must be a finite value > 0"));
                }
                match (kernel, gamma) {
                    (Kernel::Rbf, Some(g)) if g > 0.0 && g.is_finite() => {}
                    (Kernel::Rbf, _) => {
                        errs.push(FieldError::new("gamma", "gamma must be > 0 for the rbf kernel"))
                    }
                    (Kernel::Linear, Some(_)) => errs.push(FieldError::new(
                        "gamma",
                        "gamma is not used by the linear kernel",
                    )),
                    (Kernel::Linear, None) => {}
                }
            }
            Self::Rf {
                n_estimators,
                max_features,
                ..
            } => {
                if n_estimators < 1 {
                    errs.push(FieldError::new("n_estimators", "n_estimators must be >= 1"));
                }
                if max_features < 1 {
                    errs.push(FieldError::new("max_features", "max_features must be >= 1"));
                }
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.field_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(
                errs.iter()
                    .map(|e| format!("{}: {}", e.field, e.message))
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    /// Short name used in pipeline names, e.g. `SVC LIN 3`, `RF 50 5`.
    pub fn short_name(&self) -> String {
        match *self {
            Self::Nb { alpha } => format!("NB {}", fmt_num(alpha)),
            Self::Svc {
                kernel: Kernel::Linear,
                c,
                ..
            } => format!("SVC LIN {}", fmt_num(c)),
            Self::Svc {
                kernel: Kernel::Rbf,
                c,
                gamma,
                ..
            } => format!("SVC RBF {} {}", fmt_num(c), fmt_num(gamma.unwrap_or(0.0))),
            Self::Rf {
                n_estimators,
                max_features,
                ..
            } => format!("RF {n_estimators} {max_features}"),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            Self::Svc {
                kernel: Kernel::Linear,
                ..
            }
        )
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_name())
    }
}

/// Integers print without a fractional part, everything else in shortest form.
pub fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    NaiveBayes(NaiveBayesModel),
    LinearSvc(LinearSvcModel),
    RbfSvc(RbfSvcModel),
    Forest(ForestModel),
}

/// A fitted classifier with its class list (sorted) and input dimensionality.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub classes: Vec<String>,
    pub dim: usize,
    pub params: ModelParams,
    /// Non-fatal notes from training (clamped parameters and the like).
    pub warnings: Vec<String>,
}

/// Maps string labels to indices into the sorted distinct label list.
pub fn encode_labels(y: &[String]) -> (Vec<String>, Vec<usize>) {
    let classes: Vec<String> = y.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let codes = y
        .iter()
        .map(|l| classes.binary_search(l).expect("label from its own set"))
        .collect();
    (classes, codes)
}

pub fn train(spec: &ModelSpec, x: &[SparseVector], y: &[String]) -> Result<TrainedModel> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("training needs at least 2 rows".into()));
    }
    let dim = x[0].dim();
    for row in x {
        row.check_dim(dim)?;
    }
    let (classes, codes) = encode_labels(y);
    if classes.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let mut warnings = Vec::new();
    let params = match *spec {
        ModelSpec::Nb { alpha } => {
            ModelParams::NaiveBayes(NaiveBayesModel::fit(x, &codes, classes.len(), alpha)?)
        }
        ModelSpec::Svc {
            kernel: Kernel::Linear,
            c,
            seed,
            ..
        } => ModelParams::LinearSvc(LinearSvcModel::fit(x, &codes, classes.len(), c, seed)),
        ModelSpec::Svc {
            kernel: Kernel::Rbf,
            c,
            gamma,
            ..
        } => ModelParams::RbfSvc(RbfSvcModel::fit(
            x,
            &codes,
            classes.len(),
            c,
            gamma.expect("validated"),
        )),
        ModelSpec::Rf {
            n_estimators,
            max_features,
            seed,
            ..
        } => {
            let mf = if max_features > dim {
                let msg = format!(
                    "max_features {max_features} exceeds {dim} features; clamped to {dim}"
                );
                log::warn!("{msg}");
                warnings.push(msg);
                dim
            } else {
                max_features
            };
            ModelParams::Forest(ForestModel::fit(x, &codes, classes.len(), n_estimators, mf, seed))
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        classes,
        dim,
        params,
        warnings,
    })
}

/// Combines one-vs-one pair decisions into per-class scores: the vote count
/// plus a bounded confidence term, `s / (3 (|s| + 1))`, where `s` is the
/// summed signed margin in favour of the class. The term lies in (-1/3, 1/3)
/// so it only ever separates tied vote counts.
pub(crate) fn ovo_scores(n_classes: usize, margins: impl Iterator<Item = (usize, usize, f64)>) -> Vec<f64> {
    let mut votes = vec![0.0; n_classes];
    let mut conf = vec![0.0; n_classes];
    for (a, b, m) in margins {
        if m > 0.0 {
            votes[a] += 1.0;
        } else {
            votes[b] += 1.0;
        }
        conf[a] += m;
        conf[b] -= m;
    }
    votes
        .iter()
        .zip(&conf)
        .map(|(v, s)| v + s / (3.0 * (s.abs() + 1.0)))
        .collect()
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Row order for a pair problem that depends only on the rows' contents:
/// sorted by label, then by the sparse entries. Solvers then shuffle this
/// order with their own seed, so permuting the training set changes nothing.
pub(crate) fn canonical_order(rows: &[&SparseVector], y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        y[i].total_cmp(&y[j])
            .then_with(|| cmp_sparse(rows[i], rows[j]))
    });
    order
}

fn cmp_sparse(a: &SparseVector, b: &SparseVector) -> std::cmp::Ordering {
    for ((ia, va), (ib, vb)) in a.iter().zip(b.iter()) {
        let ord = ia.cmp(&ib).then_with(|| va.total_cmp(&vb));
        if ord.is_ne() {
            return ord;
        }
    }
    a.nnz().cmp(&b.nnz())
}

/// Enumerates class pairs `(a, b)` with `a < b` in the fixed OvO order.
pub fn class_pairs(n_classes: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n_classes * n_classes.saturating_sub(1) / 2);
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            out.push((a, b));
        }
    }
    out
}

impl TrainedModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(label))
            .map_err(|_| Error::UnknownLabel(label.to_string()))
    }

    /// NB: log-posteriors (up to the shared evidence term). SVC: OvO votes
    /// plus margin tie-break. RF: tree vote fractions.
    pub fn decision_scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        x.check_dim(self.dim)?;
        Ok(match &self.params {
            ModelParams::NaiveBayes(m) => m.joint_log_likelihood(x),
            ModelParams::LinearSvc(m) => ovo_scores(self.n_classes(), m.pair_margins(x)),
            ModelParams::RbfSvc(m) => ovo_scores(self.n_classes(), m.pair_margins(x).into_iter()),
            ModelParams::Forest(m) => m.vote_fractions(x),
        })
    }

    /// NB: exact posterior. RF: vote fractions. SVC: softmax over the
    /// decision scores, an uncalibrated surrogate.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        let scores = self.decision_scores(x)?;
        Ok(match self.params {
            ModelParams::Forest(_) => scores,
            _ => softmax(&scores),
        })
    }

    pub fn predict_index(&self, x: &SparseVector) -> Result<usize> {
        Ok(argmax(&self.decision_scores(x)?))
    }

    pub fn predict(&self, x: &SparseVector) -> Result<&str> {
        Ok(&self.classes[self.predict_index(x)?])
    }

    pub fn predict_batch(&self, rows: &[SparseVector]) -> Result<Vec<String>> {
        use rayon::prelude::*;
        rows.par_iter()
            .map(|r| self.predict(r).map(str::to_string))
            .collect()
    }

    /// Primal weights of the `(a, b)` pair problem; positive weights push
    /// towards `class_a`. Requesting `(b, a)` returns the negation.
    pub fn linear_pair_weights(&self, class_a: &str, class_b: &str) -> Result<Vec<f64>> {
        self.linear_pair(class_a, class_b).map(|(w, _)| w)
    }

    /// Weights and bias of the `(a, b)` pair, sign convention as above.
    pub fn linear_pair(&self, class_a: &str, class_b: &str) -> Result<(Vec<f64>, f64)> {
        let ModelParams::LinearSvc(m) = &self.params else {
            return Err(Error::Unsupported("no global linear weights".into()));
        };
        let a = self.class_index(class_a)?;
        let b = self.class_index(class_b)?;
        if a == b {
            return Err(Error::InvalidInput(format!(
                "class pair needs two different classes, got `{class_a}` twice"
            )));
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let pair = m.pair(lo, hi);
        if a < b {
            Ok((pair.weights.clone(), pair.bias))
        } else {
            Ok((pair.weights.iter().map(|w| -w).collect(), -pair.bias))
        }
    }

    /// Mean decrease in impurity, normalized to sum 1 (random forest only).
    pub fn feature_importances(&self) -> Result<Vec<f64>> {
        match &self.params {
            ModelParams::Forest(m) => Ok(m.feature_importances(self.dim)),
            _ => Err(Error::Unsupported(
                "impurity importances exist only for random forests".into(),
            )),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        serialize::to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serialize::from_bytes(bytes, "<memory>")
    }

    /// Like [`TrainedModel::from_bytes`], naming `origin` in errors.
    pub fn from_bytes_named(bytes: &[u8], origin: &str) -> Result<Self> {
        serialize::from_bytes(bytes, origin)
    }
}
