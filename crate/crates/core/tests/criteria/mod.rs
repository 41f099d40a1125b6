//! Acceptance checks for the algorithmic core. Each returns a one-line
//! detail on success and the first violation on failure. Used by the core
//! integration tests and by the acceptance target.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::Instant;

use glassbox::classifiers::forest::ForestModel;
use glassbox::classifiers::linear::{dual_objective, kkt_violations, solve_linear_dual, KKT_TOL};
use glassbox::classifiers;
use glassbox::corpus::{generate_synthetic, indicative_tokens, topic_tokens, SyntheticShape, SyntheticSpec};
use glassbox::evaluation::{metrics, ConfusionMatrix, Provenance};
use glassbox::explanation::{global_linear_for_class, global_rf_importance, lime_text, LimeOptions, TextBlackBox};
use glassbox::hypothesis::{distribution, reestimate, PrecisionRecall, ReestimationInput};
use glassbox::rng::Rng;
use glassbox::text_features::{Norm, TfidfConfig, TfidfModel};
use glassbox::tuning::{grid_search, Grid};
use glassbox::views::{doc_agreement_view, set_agreement_view, PipelineColumn, PredictionMatrix};
use glassbox::{Document, ModelSpec, PipelineConfig, RepresentationConfig, RepresentationKind, SparseVector, TrainedPipeline};

use super::oracles;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

/// Re-estimating predicted counts with a matrix's own P/R gives back the
/// gold counts.
pub fn reestimation_recovery() -> Check {
    let start = Instant::now();
    let mut rng = Rng::new(7);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let k = 3 + rng.index(8);
        let m = oracles::random_confusion(&mut rng, k, true);
        let names = labels(k);
        let gold: Vec<f64> = (0..k).map(|i| m[i].iter().sum::<u64>() as f64).collect();
        let pred: Vec<u64> = (0..k).map(|j| (0..k).map(|i| m[i][j]).sum()).collect();
        let mut items: Vec<(Option<&str>, &str)> = Vec::new();
        for j in 0..k {
            for _ in 0..pred[j] {
                items.push((Some("s"), names[j].as_str()));
            }
        }
        let dist = distribution(&items);
        let input = ReestimationInput {
            per_label: (0..k)
                .map(|i| {
                    let tp = m[i][i] as f64;
                    (
                        names[i].clone(),
                        PrecisionRecall {
                            precision: tp / pred[i] as f64,
                            recall: tp / gold[i],
                        },
                    )
                })
                .collect(),
        };
        let est = reestimate(&dist, &input).map_err(|e| format!("trial {trial}: {e}"))?;
        for i in 0..k {
            let err = (est.count("s", &names[i]) - gold[i]).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-9, "trial {trial}: label {} re-estimated {} vs gold {}", names[i], est.count("s", &names[i]), gold[i]);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3}s");
    Ok(format!("200 matrices, max abs error {worst:.1e}, {secs:.3}s"))
}

/// Micro P = micro R = micro F1 = accuracy and weighted recall = accuracy.
pub fn metric_identities() -> Check {
    let mut rng = Rng::new(11);
    for trial in 0..200 {
        let k = 2 + rng.index(9);
        let m = oracles::random_confusion(&mut rng, k, false);
        let total: u64 = m.iter().flatten().sum();
        if total == 0 {
            continue;
        }
        let correct: u64 = (0..k).map(|i| m[i][i]).sum();
        let cm = ConfusionMatrix::from_counts(labels(k), m.clone()).map_err(|e| e.to_string())?;
        let p = metrics(&cm, Provenance::Cv).map_err(|e| e.to_string())?;
        let acc = correct as f64 / total as f64;
        ensure!(p.accuracy == acc, "trial {trial}: accuracy {} vs {acc}", p.accuracy);
        ensure!(p.micro.precision == acc && p.micro.recall == acc && p.micro.f1 == acc, "trial {trial}: micro {:?} vs {acc}", p.micro);
        ensure!(p.weighted.recall == acc, "trial {trial}: weighted recall {} vs {acc}", p.weighted.recall);
        // The same identity recomputed from the per-class fields.
        let weighted: f64 = p.per_class.iter().map(|c| c.support as f64 * c.recall).sum::<f64>() / total as f64;
        ensure!((weighted - acc).abs() < 1e-12, "trial {trial}: per-class weighted recall {weighted} vs {acc}");
    }
    Ok("200 matrices, exact equality".into())
}

/// Library TF-IDF equals the brute-force formula.
pub fn tfidf_oracle() -> Check {
    let mut rng = Rng::new(3);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let n_docs = 1 + rng.index(20);
        let n_terms = 1 + rng.index(50);
        let corpus: Vec<Vec<String>> = (0..n_docs)
            .map(|_| (0..1 + rng.index(30)).map(|_| format!("t{:02}", rng.index(n_terms))).collect())
            .collect();
        let ngram = if trial % 2 == 0 { (1, 1) } else { (1, 2) };
        let min_df = 1 + trial % 2;
        let config = TfidfConfig {
            sublinear_tf: true,
            min_df,
            norm: Norm::L2,
            ngram_range: ngram,
            stopwords: None,
        };
        let (vocab, rows) = oracles::tfidf(&corpus, ngram, min_df);
        let model = match TfidfModel::fit(&corpus, &config) {
            Ok(m) => m,
            Err(e) if vocab.is_empty() => {
                let _ = e;
                continue;
            }
            Err(e) => return Err(format!("trial {trial}: {e}")),
        };
        ensure!(model.terms() == vocab.as_slice(), "trial {trial}: vocabulary differs");
        for (d, toks) in corpus.iter().enumerate() {
            let got = model.transform(toks).to_dense();
            for (a, b) in got.iter().zip(&rows[d]) {
                worst = worst.max((a - b).abs());
                ensure!((a - b).abs() <= 1e-9, "trial {trial} doc {d}: {a} vs {b}");
            }
        }
    }
    Ok(format!("20 corpora, max abs error {worst:.1e}"))
}

/// NB argmax matches exhaustive posterior enumeration.
pub fn nb_enumeration() -> Check {
    let mut rng = Rng::new(5);
    let mut checked = 0usize;
    let alphas: Vec<f64> = Grid::nb()
        .expand()
        .iter()
        .map(|s| match s {
            ModelSpec::Nb { alpha } => *alpha,
            _ => unreachable!(),
        })
        .collect();
    for trial in 0..10 {
        let v = 2 + rng.index(4);
        let n_classes = 2 + rng.index(2);
        let n_docs = (n_classes * 2).max(4 + rng.index(17)).min(20);
        let x: Vec<Vec<f64>> = (0..n_docs).map(|_| (0..v).map(|_| rng.below(4) as f64).collect()).collect();
        let y: Vec<usize> = (0..n_docs).map(|i| i % n_classes).collect();
        let names: Vec<String> = y.iter().map(|c| format!("k{c}")).collect();
        let rows: Vec<SparseVector> = x.iter().map(|r| SparseVector::from_dense(r)).collect();
        let queries = oracles::count_vectors(v, 3);
        for &alpha in &alphas {
            let model = classifiers::train(&ModelSpec::nb(alpha), &rows, &names).map_err(|e| e.to_string())?;
            for q in &queries {
                let post = oracles::nb_posterior(&x, &y, n_classes, alpha.max(1e-10), q);
                let got = model.predict_index(&SparseVector::from_dense(q)).map_err(|e| e.to_string())?;
                let got_class: usize = model.classes[got][1..].parse().unwrap();
                let best = post.iter().cloned().fold(f64::MIN, f64::max);
                ensure!(
                    (post[got_class] - best).abs() <= 1e-9 * best.max(1e-300),
                    "trial {trial} alpha {alpha} query {q:?}: picked k{got_class} ({}) but best is {best}",
                    post[got_class]
                );
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} enumerated queries, 100% argmax agreement"))
}

/// Linear SVC on separable blobs and RBF SVC on XOR.
pub fn svc_checks() -> Check {
    let start = Instant::now();
    let mut rng = Rng::new(17);
    let (x, y) = oracles::blobs(&mut rng, 100, 2.0);
    let rows: Vec<SparseVector> = x.iter().map(|r| SparseVector::from_dense(r)).collect();
    let refs: Vec<&SparseVector> = rows.iter().collect();
    let c = 1.0;
    let sol = solve_linear_dual(&refs, &y, c, 0);
    let ours = dual_objective(&rows, &y, &sol.alpha);
    let (_, oracle) = oracles::svm_dual_pg(&x, &y, c, 20_000);
    ensure!((ours - oracle).abs() <= 1e-3, "dual objective {ours} vs oracle {oracle}");
    let kkt = kkt_violations(&rows, &y, &sol.alpha, c).into_iter().fold(0.0, f64::max);
    ensure!(kkt <= KKT_TOL, "max KKT violation {kkt}");
    let names: Vec<String> = y.iter().map(|v| if *v > 0.0 { "pos".into() } else { "neg".into() }).collect();
    let model = classifiers::train(&ModelSpec::svc_linear(c), &rows, &names).map_err(|e| e.to_string())?;
    let preds = model.predict_batch(&rows).map_err(|e| e.to_string())?;
    let train_acc = preds.iter().zip(&names).filter(|(a, b)| a == b).count() as f64 / names.len() as f64;
    ensure!(train_acc == 1.0, "linear training accuracy {train_acc}");

    let (xt, yt) = oracles::xor(&mut rng, 200, 2.0, 1.0);
    let (xe, ye) = oracles::xor(&mut rng, 200, 2.0, 1.0);
    let rt: Vec<SparseVector> = xt.iter().map(|r| SparseVector::from_dense(r)).collect();
    let re: Vec<SparseVector> = xe.iter().map(|r| SparseVector::from_dense(r)).collect();
    let rbf = classifiers::train(&ModelSpec::svc_rbf(10.0, 0.1), &rt, &yt).map_err(|e| e.to_string())?;
    let pe = rbf.predict_batch(&re).map_err(|e| e.to_string())?;
    let xor_acc = pe.iter().zip(&ye).filter(|(a, b)| a == b).count() as f64 / ye.len() as f64;
    ensure!(xor_acc >= 0.95, "RBF XOR held-out accuracy {xor_acc}");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2}s");
    Ok(format!(
        "dual {ours:.6} vs oracle {oracle:.6}, KKT {kkt:.1e}, linear acc 1.0, XOR acc {xor_acc:.3}, {secs:.2}s"
    ))
}

/// Seeded forests repeat; a single full tree fits its bootstrap rows.
pub fn rf_checks() -> Check {
    let mut rng = Rng::new(23);
    let mut seen = std::collections::BTreeSet::new();
    let mut x = Vec::new();
    while x.len() < 150 {
        let row: Vec<u64> = (0..4).map(|_| rng.below(10)).collect();
        if seen.insert(row.clone()) {
            x.push(row);
        }
    }
    let label = |r: &[u64]| -> usize {
        if r[0] + r[1] > r[2] + 6 {
            0
        } else if r[3] % 3 == 0 {
            1
        } else {
            2
        }
    };
    let y: Vec<usize> = x.iter().map(|r| label(r)).collect();
    let rows: Vec<SparseVector> = x
        .iter()
        .map(|r| SparseVector::from_dense(&r.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    let names: Vec<String> = y.iter().map(|c| format!("r{c}")).collect();

    let spec = ModelSpec::rf(50, 2, 99);
    let a = classifiers::train(&spec, &rows, &names).map_err(|e| e.to_string())?;
    let b = classifiers::train(&spec, &rows, &names).map_err(|e| e.to_string())?;
    ensure!(
        a.predict_batch(&rows).map_err(|e| e.to_string())? == b.predict_batch(&rows).map_err(|e| e.to_string())?,
        "two runs with seed 99 disagree"
    );

    let seed = 4;
    let forest = ForestModel::fit(&rows, &y, 3, 1, 4, seed);
    let n = rows.len();
    let mut boot = Rng::derive(seed, 0);
    let mut in_bag = vec![false; n];
    for _ in 0..n {
        in_bag[boot.index(n)] = true;
    }
    let tree = &forest.trees[0];
    let bag: Vec<usize> = (0..n).filter(|&i| in_bag[i]).collect();
    let wrong = bag.iter().filter(|&&i| tree.leaf_class(&rows[i]) != y[i]).count();
    ensure!(wrong == 0, "{wrong} of {} bootstrap rows misclassified", bag.len());
    Ok(format!("identical predictions across runs; tree depth {}, {} bootstrap rows all correct", tree.depth(), bag.len()))
}

/// Linear black box over present tokens, probabilities in [0.5, 1].
struct SparseLinearBox {
    classes: Vec<String>,
    weights: BTreeMap<String, f64>,
    total: f64,
}

impl TextBlackBox for SparseLinearBox {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict_proba(&self, text: &str) -> glassbox::Result<Vec<f64>> {
        let present: std::collections::BTreeSet<&str> = text.split_whitespace().collect();
        let s: f64 = present.iter().filter_map(|t| self.weights.get(*t)).sum();
        let p = 0.5 + 0.5 * s / self.total;
        Ok(vec![1.0 - p, p])
    }
}

struct ConstantBox(Vec<String>);

impl TextBlackBox for ConstantBox {
    fn classes(&self) -> &[String] {
        &self.0
    }

    fn predict_proba(&self, _text: &str) -> glassbox::Result<Vec<f64>> {
        Ok(vec![0.3, 0.7])
    }
}

/// LIME recovers the strongest present token of a sparse linear box.
pub fn lime_consistency() -> Check {
    let vocab: Vec<String> = (0..30).map(|i| format!("word{i:02}")).collect();
    let weights: BTreeMap<String, f64> = (0..6).map(|i| (vocab[i * 5].clone(), 1.0 + i as f64)).collect();
    let total = weights.values().sum();
    let bb = SparseLinearBox {
        classes: vec!["neg".into(), "pos".into()],
        weights: weights.clone(),
        total,
    };
    let mut rng = Rng::new(31);
    let mut hits = 0;
    let docs = 100;
    for d in 0..docs {
        let len = 8 + rng.index(13);
        let mut words: Vec<String> = (0..len).map(|_| rng.choose(&vocab).clone()).collect();
        // Guarantee a weighted token.
        words.push(vocab[5 * rng.index(6)].clone());
        let best = words
            .iter()
            .filter_map(|w| weights.get(w).map(|v| (*v, w.clone())))
            .fold((0.0, String::new()), |acc, x| if x.0 > acc.0 { x } else { acc });
        let doc = Document::new(format!("d{d}"), words.join(" "));
        let opts = LimeOptions {
            n_samples: 1000,
            k: 10,
            seed: d as u64,
        };
        let e = lime_text(&bb, "box", &doc, &opts).map_err(|e| e.to_string())?;
        if e.attributions.first().map(|a| a.feature.as_str()) == Some(best.1.as_str()) {
            hits += 1;
        }
    }
    let rate = hits as f64 / docs as f64;
    ensure!(rate >= 0.95, "top-1 matched in {hits}/{docs}");

    let cb = ConstantBox(vec!["neg".into(), "pos".into()]);
    let doc = Document::new("c", "alpha beta gamma delta alpha epsilon");
    let e = lime_text(&cb, "const", &doc, &LimeOptions::default()).map_err(|e| e.to_string())?;
    let max = e.attributions.iter().map(|a| a.weight.abs()).fold(0.0, f64::max);
    ensure!(max < 1e-6, "constant box attribution {max}");
    Ok(format!("top-1 matched {hits}/{docs}; constant box max |w| {max:.1e}"))
}

fn matrix(predictions: Vec<Vec<String>>, n_pipelines: usize) -> PredictionMatrix {
    let n = predictions.len();
    PredictionMatrix {
        pipelines: (0..n_pipelines)
            .map(|p| PipelineColumn {
                id: format!("p{p}"),
                name: format!("P{p}"),
                kind: RepresentationKind::Text,
            })
            .collect(),
        document_ids: (0..n).map(|d| format!("doc{d:03}")).collect(),
        texts: (0..n).map(|d| format!("text {d}")).collect(),
        predictions,
    }
}

/// Views equal brute-force grouping on random prediction matrices.
pub fn views_oracle() -> Check {
    let mut rng = Rng::new(41);
    let mut rows_seen = 0;
    for trial in 0..200 {
        let n_pipelines = 1 + rng.index(9);
        let n_docs = 1 + rng.index(100);
        let n_labels = 1 + rng.index(5);
        let preds = oracles::random_predictions(&mut rng, n_docs, n_pipelines, n_labels);
        let m = matrix(preds.clone(), n_pipelines);
        let mut gold = BTreeMap::new();
        for id in &m.document_ids {
            if rng.bernoulli(0.7) {
                gold.insert(id.clone(), format!("L{}", rng.index(n_labels)));
            }
        }

        let view = set_agreement_view(&m, &gold);
        let expected = oracles::exact_set_groups(&preds, &m.document_ids, n_pipelines);
        let got: Vec<serde_json::Value> = view
            .iter()
            .map(|r| {
                let mut docs: Vec<&String> = r.documents.iter().map(|d| &d.id).collect();
                docs.sort();
                serde_json::json!({ "set": r.pipelines, "label": r.label, "docs": docs })
            })
            .collect();
        let want: Vec<serde_json::Value> = expected
            .iter()
            .map(|g| {
                let ids: Vec<String> = g.set.iter().map(|p| format!("p{p}")).collect();
                serde_json::json!({ "set": ids, "label": g.label, "docs": g.documents })
            })
            .collect();
        let (a, b) = (serde_json::to_string(&got).unwrap(), serde_json::to_string(&want).unwrap());
        ensure!(a == b, "trial {trial}: set-agreement rows differ");
        for r in &view {
            for d in &r.documents {
                let tag = match gold.get(&d.id) {
                    None => "unknown",
                    Some(g) if *g == r.label => "correct",
                    Some(_) => "wrong",
                };
                ensure!(d.tag.as_str() == tag, "trial {trial}: tag of {} is {}", d.id, d.tag.as_str());
            }
        }
        rows_seen += view.len();

        let docs = doc_agreement_view(&m, &gold);
        ensure!(docs.len() == n_docs, "trial {trial}: {} doc rows", docs.len());
        for (row, p) in docs.iter().zip(&preds) {
            let (label, size, tie) = oracles::plurality(p);
            ensure!(
                row.prevailing == label && row.largest_set.len() == size && row.tie == tie,
                "trial {trial}: doc {} prevailing {} vs {label}",
                row.document_id,
                row.prevailing
            );
        }
    }
    Ok(format!("200 matrices, {rows_seen} rows, byte-identical"))
}

fn topic_hits(p: &TrainedPipeline, n_classes: usize) -> glassbox::Result<usize> {
    let mut hits = 0;
    for c in 0..n_classes {
        let class = &p.classes()[c];
        let topics = topic_tokens(c);
        for r in global_linear_for_class(p, class, 10)? {
            hits += r.positive.iter().filter(|f| topics.contains(&f.feature)).count();
        }
    }
    Ok(hits)
}

/// Grid search, indicative tokens in global rankings, and the confound sweep.
pub fn synthetic_workflow() -> Check {
    let start = Instant::now();
    let spec = |confound: f64| SyntheticSpec {
        name: "BGS".into(),
        shape: SyntheticShape::balanced_gold(),
        confound_strength: confound,
        seed: 42,
    };
    let ds = generate_synthetic(&spec(0.0)).map_err(|e| e.to_string())?;
    let docs: Vec<&Document> = ds.documents().iter().collect();
    let report = grid_search(&Grid::svc(), &RepresentationConfig::tfidf(), &docs, 10, 42).map_err(|e| e.to_string())?;
    ensure!(report.candidates.len() == 20, "{} candidates", report.candidates.len());
    let grid_secs = start.elapsed().as_secs_f64();
    ensure!(grid_secs < 300.0, "grid search took {grid_secs:.1}s");
    let best_linear = report
        .candidates
        .iter()
        .filter(|c| c.spec.is_linear())
        .max_by(|a, b| a.mean.accuracy.total_cmp(&b.mean.accuracy).then(b.index.cmp(&a.index)))
        .ok_or("no linear candidate")?;
    ensure!(best_linear.mean.accuracy >= 0.90, "best linear 10-fold accuracy {:.4}", best_linear.mean.accuracy);

    let config = PipelineConfig::new("BGS", RepresentationConfig::tfidf(), best_linear.spec.clone());
    let p = TrainedPipeline::train("bgs", &config, &ds).map_err(|e| e.to_string())?;
    let classes = p.classes().to_vec();
    for (c, class) in classes.iter().enumerate() {
        let token = &indicative_tokens(c)[0];
        let rankings = global_linear_for_class(&p, class, 10).map_err(|e| e.to_string())?;
        ensure!(
            rankings.iter().any(|r| r.positive.iter().any(|f| &f.feature == token)),
            "`{token}` missing from every top-10 ranking of {class}"
        );
    }

    let mut sweep = Vec::new();
    for confound in [0.0, 0.5, 0.9] {
        let ds = generate_synthetic(&spec(confound)).map_err(|e| e.to_string())?;
        let text = TrainedPipeline::train("t", &PipelineConfig::new("BGS", RepresentationConfig::tfidf(), ModelSpec::svc_linear(1.0)), &ds)
            .map_err(|e| e.to_string())?;
        let hits = topic_hits(&text, classes.len()).map_err(|e| e.to_string())?;
        let rf = TrainedPipeline::train("n", &PipelineConfig::new("BGS", RepresentationConfig::numeric(), ModelSpec::rf(50, 5, 1)), &ds)
            .map_err(|e| e.to_string())?;
        let imp = global_rf_importance(&rf).map_err(|e| e.to_string())?;
        let leaked = imp
            .iter()
            .filter(|f| f.weight > 0.0)
            .filter(|f| (0..classes.len()).any(|t| topic_tokens(t).contains(&f.feature)))
            .count();
        ensure!(leaked == 0, "confound {confound}: {leaked} topic tokens among curated-feature importances");
        sweep.push((confound, hits));
    }
    ensure!(sweep[0].1 < sweep[2].1, "topic tokens in rankings did not grow with the confound: {sweep:?}");
    let secs = start.elapsed().as_secs_f64();
    Ok(format!(
        "grid {grid_secs:.1}s, best linear {} acc {:.4}; topic tokens in top-10 by confound {:?}; {secs:.1}s",
        best_linear.name, best_linear.mean.accuracy, sweep
    ))
}
