//! Stratified k-fold cross-validation and grid search.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{fmt_num, train, Kernel, ModelSpec};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::evaluation::{confusion, csv_field, metrics, ConfusionMatrix, MetricPanel, Provenance};
use crate::representation::{Representation, RepresentationConfig};
use crate::rng::Rng;
use crate::sparse::SparseVector;

/// Stream id separating fold shuffles from other uses of the same seed.
const FOLD_STREAM: u64 = 0x666f_6c64;

/// Assigns every index to one of `k` folds, class by class.
///
/// Labels are visited in sorted order; each class's members are shuffled
/// and dealt round-robin starting where the previous class stopped, so fold
/// sizes differ by at most one and so do each class's per-fold counts.
pub fn stratified_kfold<S: AsRef<str>>(y: &[S], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be >= 2, got {k}")));
    }
    if k > y.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the number of documents ({})",
            y.len()
        )));
    }
    let labels: BTreeSet<&str> = y.iter().map(AsRef::as_ref).collect();
    let mut rng = Rng::derive(seed, FOLD_STREAM);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0;
    for label in labels {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i].as_ref() == label).collect();
        rng.shuffle(&mut members);
        for m in members {
            folds[cursor % k].push(m);
            cursor += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Accuracy,
    PrecisionMicro,
    RecallMicro,
    F1Micro,
}

impl Scorer {
    pub const ALL: [Scorer; 4] = [
        Scorer::Accuracy,
        Scorer::PrecisionMicro,
        Scorer::RecallMicro,
        Scorer::F1Micro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::Accuracy => "accuracy",
            Scorer::PrecisionMicro => "precision_micro",
            Scorer::RecallMicro => "recall_micro",
            Scorer::F1Micro => "f1_micro",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub f1_micro: f64,
}

impl Scores {
    pub fn from_panel(p: &MetricPanel) -> Self {
        Self {
            accuracy: p.accuracy,
            precision_micro: p.micro.precision,
            recall_micro: p.micro.recall,
            f1_micro: p.micro.f1,
        }
    }

    pub fn get(&self, s: Scorer) -> f64 {
        match s {
            Scorer::Accuracy => self.accuracy,
            Scorer::PrecisionMicro => self.precision_micro,
            Scorer::RecallMicro => self.recall_micro,
            Scorer::F1Micro => self.f1_micro,
        }
    }

    fn from_fn(f: impl Fn(Scorer) -> f64) -> Self {
        Self {
            accuracy: f(Scorer::Accuracy),
            precision_micro: f(Scorer::PrecisionMicro),
            recall_micro: f(Scorer::RecallMicro),
            f1_micro: f(Scorer::F1Micro),
        }
    }

    /// Mean and population standard deviation of each scorer.
    pub fn summarize(all: &[Scores]) -> (Scores, Scores) {
        let n = all.len() as f64;
        let mean = Self::from_fn(|s| all.iter().map(|x| x.get(s)).sum::<f64>() / n);
        let std = Self::from_fn(|s| {
            let m = mean.get(s);
            (all.iter().map(|x| (x.get(s) - m).powi(2)).sum::<f64>() / n).sqrt()
        });
        (mean, std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub index: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub confusion: ConfusionMatrix,
    pub scores: Scores,
    /// Classes with no member in this fold's validation part.
    pub missing_classes: Vec<String>,
    /// True when no validation document contributed to the fitted
    /// representation (vocabulary, idf, scaler statistics).
    pub leakage_free: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    /// Elementwise sum of the fold matrices.
    pub pooled: ConfusionMatrix,
    pub panel: MetricPanel,
    pub mean: Scores,
    pub std: Scores,
    pub warnings: Vec<String>,
}

pub(crate) fn gold_labels(docs: &[&Document]) -> Result<Vec<String>> {
    docs.iter()
        .map(|d| {
            d.gold_label
                .clone()
                .ok_or_else(|| Error::InvalidInput(format!("document `{}` has no gold label", d.id)))
        })
        .collect()
}

/// One fold's fitted representation and vectors, shared by all candidates.
struct PreparedFold {
    train_x: Vec<SparseVector>,
    train_y: Vec<String>,
    val_x: Vec<SparseVector>,
    val_y: Vec<String>,
    leakage_free: bool,
    missing: Vec<String>,
}

fn prepare_folds(
    rep: &RepresentationConfig,
    docs: &[&Document],
    y: &[String],
    k: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<Vec<usize>>, Vec<PreparedFold>)> {
    let labels: Vec<String> = y.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let folds = stratified_kfold(y, k, seed)?;
    let prepared = folds
        .par_iter()
        .map(|val| {
            let in_val: BTreeSet<usize> = val.iter().copied().collect();
            let train_idx: Vec<usize> = (0..docs.len()).filter(|i| !in_val.contains(i)).collect();
            let train_docs: Vec<&Document> = train_idx.iter().map(|&i| docs[i]).collect();
            let val_docs: Vec<&Document> = val.iter().map(|&i| docs[i]).collect();
            let fitted = Representation::fit(rep, &train_docs)?;
            let leakage_free = val_docs.iter().all(|d| !fitted.fit_ids.contains(&d.id));
            let present: BTreeSet<&String> = val.iter().map(|&i| &y[i]).collect();
            Ok(PreparedFold {
                train_x: fitted.transform_all(&train_docs)?,
                train_y: train_idx.iter().map(|&i| y[i].clone()).collect(),
                val_x: fitted.transform_all(&val_docs)?,
                val_y: val.iter().map(|&i| y[i].clone()).collect(),
                leakage_free,
                missing: labels.iter().filter(|l| !present.contains(l)).cloned().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((labels, folds, prepared))
}

fn run_fold(spec: &ModelSpec, fold: &PreparedFold, labels: &[String]) -> Result<ConfusionMatrix> {
    let model = train(spec, &fold.train_x, &fold.train_y)?;
    let pred = model.predict_batch(&fold.val_x)?;
    confusion(&fold.val_y, &pred, labels)
}

fn assemble_cv(
    k: usize,
    seed: u64,
    labels: &[String],
    prepared: &[PreparedFold],
    matrices: Vec<ConfusionMatrix>,
) -> Result<CvReport> {
    let mut pooled = ConfusionMatrix::zeros(labels.to_vec());
    let mut folds = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    for (i, (fold, m)) in prepared.iter().zip(matrices).enumerate() {
        pooled.add(&m)?;
        if !fold.missing.is_empty() {
            warnings.push(format!(
                "fold {i} has no validation documents for: {}",
                fold.missing.join(", ")
            ));
        }
        folds.push(FoldReport {
            index: i,
            train_size: fold.train_x.len(),
            validation_size: fold.val_x.len(),
            scores: Scores::from_panel(&metrics(&m, Provenance::Cv)?),
            confusion: m,
            missing_classes: fold.missing.clone(),
            leakage_free: fold.leakage_free,
        });
    }
    let all: Vec<Scores> = folds.iter().map(|f| f.scores).collect();
    let (mean, std) = Scores::summarize(&all);
    Ok(CvReport {
        k,
        seed,
        panel: metrics(&pooled, Provenance::Cv)?,
        pooled,
        folds,
        mean,
        std,
        warnings,
    })
}

/// k-fold cross-validation; the representation is refitted inside every
/// fold on that fold's training part.
pub fn cross_validate(
    rep: &RepresentationConfig,
    spec: &ModelSpec,
    docs: &[&Document],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let y = gold_labels(docs)?;
    let (labels, _, prepared) = prepare_folds(rep, docs, &y, k, seed)?;
    let matrices = prepared
        .par_iter()
        .map(|f| run_fold(spec, f, &labels))
        .collect::<Result<Vec<_>>>()?;
    assemble_cv(k, seed, &labels, &prepared, matrices)
}

fn svc_kernels() -> Vec<Kernel> {
    vec![Kernel::Linear, Kernel::Rbf]
}
fn svc_c() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 5.0, 10.0]
}
fn svc_gamma() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}
fn nb_alpha() -> Vec<f64> {
    vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
}
fn rf_estimators() -> Vec<usize> {
    vec![50, 100, 1000]
}
fn rf_features() -> Vec<usize> {
    (1..=6).collect()
}

/// Hyper-parameter grid. Missing lists default to the standard grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase", deny_unknown_fields)]
pub enum Grid {
    Svc {
        #[serde(default = "svc_kernels")]
        kernel: Vec<Kernel>,
        #[serde(default = "svc_c", rename = "C", alias = "c")]
        c: Vec<f64>,
        #[serde(default = "svc_gamma")]
        gamma: Vec<f64>,
    },
    Nb {
        #[serde(default = "nb_alpha")]
        alpha: Vec<f64>,
    },
    Rf {
        #[serde(default = "rf_estimators")]
        n_estimators: Vec<usize>,
        #[serde(default = "rf_features")]
        max_features: Vec<usize>,
        #[serde(default)]
        seed: u64,
    },
}

impl Grid {
    pub fn svc() -> Self {
        Self::Svc {
            kernel: svc_kernels(),
            c: svc_c(),
            gamma: svc_gamma(),
        }
    }

    pub fn nb() -> Self {
        Self::Nb { alpha: nb_alpha() }
    }

    pub fn rf(seed: u64) -> Self {
        Self::Rf {
            n_estimators: rf_estimators(),
            max_features: rf_features(),
            seed,
        }
    }

    pub fn algorithm(&self) -> &'static str {
        match self {
            Self::Svc { .. } => "svc",
            Self::Nb { .. } => "nb",
            Self::Rf { .. } => "rf",
        }
    }

    /// Candidates in a fixed order: per kernel in listed order, linear over
    /// C, rbf over C (outer) × gamma (inner); NB over alpha; RF over
    /// n_estimators (outer) × max_features (inner).
    pub fn expand(&self) -> Vec<ModelSpec> {
        match self {
            Self::Svc { kernel, c, gamma } => {
                let mut out = Vec::new();
                for k in kernel {
                    for &cv in c {
                        match k {
                            Kernel::Linear => out.push(ModelSpec::svc_linear(cv)),
                            Kernel::Rbf => {
                                out.extend(gamma.iter().map(|&g| ModelSpec::svc_rbf(cv, g)))
                            }
                        }
                    }
                }
                out
            }
            Self::Nb { alpha } => alpha.iter().map(|&a| ModelSpec::nb(a)).collect(),
            Self::Rf {
                n_estimators,
                max_features,
                seed,
            } => n_estimators
                .iter()
                .flat_map(|&n| max_features.iter().map(move |&m| ModelSpec::rf(n, m, *seed)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub spec: ModelSpec,
    pub name: String,
    pub mean: Scores,
    pub std: Scores,
    pub fold_scores: Vec<Scores>,
    /// Sum of the candidate's per-fold training and prediction time.
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPerScorer {
    pub accuracy: usize,
    pub precision_micro: usize,
    pub recall_micro: usize,
    pub f1_micro: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub algorithm: String,
    pub representation: RepresentationConfig,
    pub k: usize,
    pub seed: u64,
    pub candidates: Vec<CandidateResult>,
    /// Candidate index of the best mean per scorer (first on ties).
    pub best: BestPerScorer,
    /// Default choice: best by accuracy.
    pub selected: usize,
    pub warnings: Vec<String>,
}

impl GridReport {
    pub fn selected_spec(&self) -> &ModelSpec {
        &self.candidates[self.selected].spec
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,name,algorithm,kernel,C,gamma,alpha,n_estimators,max_features");
        for s in Scorer::ALL {
            out.push_str(&format!(",mean_{0},std_{0}", s.name()));
        }
        out.push_str(",wall_time_ms\n");
        for c in &self.candidates {
            let (kernel, cv, gamma, alpha, n_est, max_f) = match &c.spec {
                ModelSpec::Svc { kernel, c, gamma, .. } => (
                    format!("{kernel:?}").to_lowercase(),
                    fmt_num(*c),
                    gamma.map(fmt_num).unwrap_or_default(),
                    String::new(),
                    String::new(),
                    String::new(),
                ),
                ModelSpec::Nb { alpha } => {
                    (String::new(), String::new(), String::new(), fmt_num(*alpha), String::new(), String::new())
                }
                ModelSpec::Rf {
                    n_estimators,
                    max_features,
                    ..
                } => (
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    n_estimators.to_string(),
                    max_features.to_string(),
                ),
            };
            out.push_str(&format!(
                "{},{},{},{kernel},{cv},{gamma},{alpha},{n_est},{max_f}",
                c.index,
                csv_field(&c.name),
                self.algorithm
            ));
            for s in Scorer::ALL {
                out.push_str(&format!(",{},{}", c.mean.get(s), c.std.get(s)));
            }
            out.push_str(&format!(",{:.3}\n", c.wall_time_ms));
        }
        out
    }
}

fn best_index(candidates: &[CandidateResult], scorer: Scorer) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.mean.get(scorer) > candidates[best].mean.get(scorer) {
            best = i;
        }
    }
    best
}

/// Evaluates every grid candidate by k-fold cross-validation. Fold
/// representations are fitted once and shared across candidates; the
/// (candidate, fold) jobs run in parallel and are reduced in expansion order.
pub fn grid_search(
    grid: &Grid,
    rep: &RepresentationConfig,
    docs: &[&Document],
    k: usize,
    seed: u64,
) -> Result<GridReport> {
    let specs = grid.expand();
    if specs.is_empty() {
        return Err(Error::Config("grid expands to no candidates".into()));
    }
    for s in &specs {
        s.validate()?;
    }
    let y = gold_labels(docs)?;
    let (labels, _, prepared) = prepare_folds(rep, docs, &y, k, seed)?;
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|c| (0..prepared.len()).map(move |f| (c, f)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, f)| {
            let start = Instant::now();
            let m = run_fold(&specs[c], &prepared[f], &labels)?;
            let scores = Scores::from_panel(&metrics(&m, Provenance::Cv)?);
            Ok((scores, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings: Vec<String> = prepared
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.missing.is_empty())
        .map(|(i, f)| format!("fold {i} has no validation documents for: {}", f.missing.join(", ")))
        .collect();
    let mut candidates = Vec::with_capacity(specs.len());
    for (c, spec) in specs.into_iter().enumerate() {
        let per_fold = &results[c * prepared.len()..(c + 1) * prepared.len()];
        let fold_scores: Vec<Scores> = per_fold.iter().map(|r| r.0).collect();
        let (mean, std) = Scores::summarize(&fold_scores);
        candidates.push(CandidateResult {
            index: c,
            name: spec.short_name(),
            spec,
            mean,
            std,
            fold_scores,
            wall_time_ms: per_fold.iter().map(|r| r.1).sum(),
        });
    }
    let best = BestPerScorer {
        accuracy: best_index(&candidates, Scorer::Accuracy),
        precision_micro: best_index(&candidates, Scorer::PrecisionMicro),
        recall_micro: best_index(&candidates, Scorer::RecallMicro),
        f1_micro: best_index(&candidates, Scorer::F1Micro),
    };
    warnings.dedup();
    Ok(GridReport {
        algorithm: grid.algorithm().into(),
        representation: rep.clone(),
        k,
        seed,
        selected: best.accuracy,
        best,
        candidates,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_shape_folds() {
        let y: Vec<String> = (0..480).map(|i| format!("g{}", i % 8)).collect();
        let folds = stratified_kfold(&y, 10, 7).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 48);
            for c in 0..8 {
                let label = format!("g{c}");
                assert_eq!(f.iter().filter(|&&i| y[i] == label).count(), 6);
            }
        }
        assert_eq!(folds, stratified_kfold(&y, 10, 7).unwrap());
    }

    #[test]
    fn leave_one_out_and_errors() {
        let y = ["a", "b", "a", "b", "c"];
        let folds = stratified_kfold(&y, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        assert!(stratified_kfold(&y, 6, 1).is_err());
        assert!(stratified_kfold(&y, 1, 1).is_err());
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(Grid::svc().expand().len(), 20);
        assert_eq!(Grid::nb().expand().len(), 8);
        assert_eq!(Grid::rf(0).expand().len(), 18);
        let first_rbf = &Grid::svc().expand()[5];
        assert_eq!(first_rbf, &ModelSpec::svc_rbf(1.0, 0.1));
        let g: Grid = serde_json::from_str(r#"{"algorithm":"svc","kernel":["linear"]}"#).unwrap();
        assert_eq!(g.expand().len(), 5);
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(counts in proptest::collection::vec(1usize..30, 1..6), k in 2usize..8, seed in any::<u64>()) {
            let y: Vec<String> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(format!("c{c}"), n)).collect();
            prop_assume!(k <= y.len());
            let folds = stratified_kfold(&y, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for (c, &n) in counts.iter().enumerate() {
                let label = format!("c{c}");
                let share = n as f64 / k as f64;
                for f in &folds {
                    let got = f.iter().filter(|&&i| y[i] == label).count() as f64;
                    prop_assert!((got - share).abs() < 1.0);
                }
            }
        }
    }
}
