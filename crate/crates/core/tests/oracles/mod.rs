//! Brute-force reference implementations, written without looking at the
//! library internals. Shared by the core integration tests and the
//! acceptance target.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use glassbox::rng::Rng;

/// Dense TF-IDF rows: vocabulary of all n-grams with df ≥ `min_df` (sorted),
/// idf = ln((1+N)/(1+df)) + 1, tf weight 1 + ln(tf), l2 row normalization.
pub fn tfidf(corpus: &[Vec<String>], ngram: (usize, usize), min_df: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let grams: Vec<Vec<String>> = corpus
        .iter()
        .map(|toks| {
            let mut out = Vec::new();
            for n in ngram.0..=ngram.1 {
                if toks.len() >= n {
                    for i in 0..=toks.len() - n {
                        out.push(toks[i..i + n].join(" "));
                    }
                }
            }
            out
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for g in &grams {
        let uniq: BTreeSet<&str> = g.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<String> = df.iter().filter(|(_, &d)| d >= min_df).map(|(t, _)| t.to_string()).collect();
    let n = corpus.len() as f64;
    let rows = grams
        .iter()
        .map(|g| {
            let mut row: Vec<f64> = vocab
                .iter()
                .map(|term| {
                    let tf = g.iter().filter(|x| *x == term).count() as f64;
                    if tf == 0.0 {
                        0.0
                    } else {
                        let idf = ((1.0 + n) / (1.0 + df[term.as_str()] as f64)).ln() + 1.0;
                        (1.0 + tf.ln()) * idf
                    }
                })
                .collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            row
        })
        .collect();
    (vocab, rows)
}

/// Multinomial NB posteriors (unnormalized, in probability space via
/// log-sum-exp) for count vector `x`, from raw training counts.
pub fn nb_posterior(train_x: &[Vec<f64>], train_y: &[usize], n_classes: usize, alpha: f64, x: &[f64]) -> Vec<f64> {
    let v = x.len();
    let n = train_x.len() as f64;
    let mut logs = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let members: Vec<&Vec<f64>> = train_x.iter().zip(train_y).filter(|(_, &y)| y == c).map(|(r, _)| r).collect();
        let prior = members.len() as f64 / n;
        let counts: Vec<f64> = (0..v).map(|t| members.iter().map(|r| r[t]).sum()).collect();
        let total: f64 = counts.iter().sum();
        let mut lp = prior.ln();
        for t in 0..v {
            let theta = (counts[t] + alpha) / (total + alpha * v as f64);
            // Product of θ over every occurrence, counted one at a time.
            let mut k = 0.0;
            while k < x[t] {
                lp += theta.ln();
                k += 1.0;
            }
        }
        logs.push(lp);
    }
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    logs.iter().map(|l| (l - m).exp() / z).collect()
}

/// Every count vector over `v` terms with total length 1..=`max_len`.
pub fn count_vectors(v: usize, max_len: usize) -> Vec<Vec<f64>> {
    fn rec(v: usize, left: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == v {
            if cur.iter().sum::<f64>() > 0.0 {
                out.push(cur.clone());
            }
            return;
        }
        for c in 0..=left {
            cur.push(c as f64);
            rec(v, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(v, max_len, &mut Vec::new(), &mut out);
    out
}

/// Random confusion matrix with `k` classes; diagonal ≥ 1 when `tp_positive`.
pub fn random_confusion(rng: &mut Rng, k: usize, tp_positive: bool) -> Vec<Vec<u64>> {
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let v = rng.below(30);
                    if i == j && tp_positive {
                        v + 1
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

/// Box-constrained dual `min ½αᵀQα − Σα, 0 ≤ α ≤ C` with `Q = yyᵀ∘(XXᵀ+1)`,
/// solved by accelerated projected gradient.
pub fn svm_dual_pg(x: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| y[i] * y[j] * (x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>() + 1.0))
                .collect()
        })
        .collect();
    // Lipschitz bound: largest absolute row sum.
    let lip = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip;
    let objective = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[i] * q[i][j] * a[j];
            }
        }
        0.5 * s - a.iter().sum::<f64>()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| q[i].iter().zip(&z).map(|(qv, zv)| qv * zv).sum::<f64>() - 1.0).collect();
        let next: Vec<f64> = z.iter().zip(&grad).map(|(zv, g)| (zv - step * g).clamp(0.0, c)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&a).map(|(nv, av)| nv + (t - 1.0) / t_next * (nv - av)).collect();
        a = next;
        t = t_next;
    }
    let obj = objective(&a);
    (a, obj)
}

/// Two Gaussian-ish blobs in 2-D, labels ±1, separated along the diagonal.
pub fn blobs(rng: &mut Rng, n: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.push(vec![s * gap + rng.uniform(-1.0, 1.0), s * gap + rng.uniform(-1.0, 1.0)]);
        y.push(s);
    }
    (x, y)
}

/// XOR layout: four clusters at (±r, ±r), label = sign(x·y).
pub fn xor(rng: &mut Rng, n: usize, r: f64, spread: f64) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (sx, sy) = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)][i % 4];
        x.push(vec![sx * r + rng.uniform(-spread, spread), sy * r + rng.uniform(-spread, spread)]);
        y.push(if sx * sy > 0.0 { "same".to_string() } else { "diff".to_string() });
    }
    (x, y)
}

/// One set-agreement row: pipeline column indices, label, document ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroupRow {
    pub set: Vec<usize>,
    pub label: String,
    pub documents: Vec<String>,
}

/// Enumerates every pipeline subset and label, keeping the documents for
/// which exactly that subset predicts that label.
pub fn exact_set_groups(predictions: &[Vec<String>], doc_ids: &[String], n_pipelines: usize) -> Vec<GroupRow> {
    let labels: BTreeSet<&String> = predictions.iter().flatten().collect();
    let mut rows = Vec::new();
    for mask in 1u32..(1 << n_pipelines) {
        let set: Vec<usize> = (0..n_pipelines).filter(|p| mask & (1 << p) != 0).collect();
        for &label in &labels {
            let documents: Vec<String> = doc_ids
                .iter()
                .zip(predictions)
                .filter(|(_, row)| {
                    let agreeing: Vec<usize> = (0..n_pipelines).filter(|&p| &row[p] == label).collect();
                    agreeing == set
                })
                .map(|(id, _)| id.clone())
                .collect();
            if !documents.is_empty() {
                rows.push(GroupRow {
                    set: set.clone(),
                    label: label.clone(),
                    documents,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        b.set
            .len()
            .cmp(&a.set.len())
            .then(b.documents.len().cmp(&a.documents.len()))
            .then_with(|| a.set.cmp(&b.set))
            .then_with(|| a.label.cmp(&b.label))
    });
    rows
}

/// Plurality label per document; ties go to the smallest label.
pub fn plurality(row: &[String]) -> (String, usize, bool) {
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for l in row {
        *counts.entry(l).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let winners: Vec<&&String> = counts.iter().filter(|(_, &c)| c == top).map(|(l, _)| l).collect();
    ((*winners[0]).clone(), top, winners.len() > 1)
}

/// Random prediction matrix over a small label alphabet.
pub fn random_predictions(rng: &mut Rng, n_docs: usize, n_pipelines: usize, n_labels: usize) -> Vec<Vec<String>> {
    (0..n_docs)
        .map(|_| (0..n_pipelines).map(|_| format!("L{}", rng.index(n_labels))).collect())
        .collect()
}
