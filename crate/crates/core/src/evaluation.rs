//! Confusion matrices, metric panels and heatmap payloads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[i][j]` = documents with gold label `labels[i]` predicted as `labels[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Builds a matrix from raw counts, checking the shape.
    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "confusion counts must be {n}×{n}"
            )));
        }
        Ok(Self { labels, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// Elementwise sum; both matrices must share the label list.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::InvalidInput("confusion matrices have different labels".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Reorders labels according to `perm` (new position `k` holds old label `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: perm.iter().map(|&p| self.labels[p].clone()).collect(),
            counts: perm
                .iter()
                .map(|&i| perm.iter().map(|&j| self.counts[i][j]).collect())
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(&csv_field(l));
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn confusion<S: AsRef<str>, T: AsRef<str>>(
    y_true: &[S],
    y_pred: &[T],
    labels: &[String],
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let index = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let mut m = ConfusionMatrix::zeros(labels.to_vec());
    for (t, p) in y_true.iter().zip(y_pred) {
        let i = index(t.as_ref())?;
        let j = index(p.as_ref())?;
        m.counts[i][j] += 1;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Cv,
    Heldout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when a ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPanel {
    pub provenance: Provenance,
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub micro: Aggregate,
    #[serde(rename = "macro")]
    pub macro_avg: Aggregate,
    pub weighted: Aggregate,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Metric panel of a confusion matrix.
///
/// Every document carries exactly one gold and one predicted label from the
/// label list, so micro precision, micro recall and micro F1 all reduce to
/// `Σ TP / N`; they are computed through that form so the identity with
/// accuracy is exact in floating point. Likewise the support-weighted mean
/// of per-class recall is `Σ_c (n_c / N)(TP_c / n_c) = Σ TP / N`.
pub fn metrics(matrix: &ConfusionMatrix, provenance: Provenance) -> Result<MetricPanel> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::InvalidInput("metrics need at least one document".into()));
    }
    let n = matrix.labels.len();
    let mut per_class = Vec::with_capacity(n);
    for i in 0..n {
        let tp = matrix.counts[i][i];
        let predicted = matrix.col_sum(i);
        let support = matrix.row_sum(i);
        let (precision, zp) = ratio(tp, predicted);
        let (recall, zr) = ratio(tp, support);
        let (f1, zf) = ratio(2 * tp, predicted + support);
        per_class.push(ClassMetrics {
            label: matrix.labels[i].clone(),
            precision,
            recall,
            f1,
            support,
            zero_division: zp || zr || zf,
        });
    }
    let correct = matrix.correct();
    let accuracy = correct as f64 / total as f64;
    let micro_f1 = (2 * correct) as f64 / (2 * total) as f64;
    let micro = Aggregate {
        precision: accuracy,
        recall: accuracy,
        f1: micro_f1,
    };
    let k = n as f64;
    let macro_avg = Aggregate {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
    };
    let w = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| c.support as f64 * f(c))
            .sum::<f64>()
            / total as f64
    };
    let weighted = Aggregate {
        precision: w(|c| c.precision),
        recall: accuracy,
        f1: w(|c| c.f1),
    };
    Ok(MetricPanel {
        provenance,
        total,
        accuracy,
        per_class,
        micro,
        macro_avg,
        weighted,
    })
}

impl MetricPanel {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,precision,recall,f1,support,zero_division\n");
        for c in &self.per_class {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                csv_field(&c.label),
                c.precision,
                c.recall,
                c.f1,
                c.support,
                c.zero_division
            ));
        }
        for (name, a) in [("micro", self.micro), ("macro", self.macro_avg), ("weighted", self.weighted)] {
            out.push_str(&format!("{name},{},{},{},{},false\n", a.precision, a.recall, a.f1, self.total));
        }
        out.push_str(&format!("accuracy,,,{},{},false\n", self.accuracy, self.total));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    #[default]
    None,
    Row,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapPayload {
    /// Row labels (gold) and column labels (predicted) share this list.
    pub labels: Vec<String>,
    pub normalize: Normalize,
    /// `values[i][j]`: count, or share of row `i` when row-normalized.
    pub values: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
}

pub fn heatmap_payload(matrix: &ConfusionMatrix, normalize: Normalize) -> HeatmapPayload {
    let row_totals: Vec<u64> = (0..matrix.labels.len()).map(|i| matrix.row_sum(i)).collect();
    let values = matrix
        .counts
        .iter()
        .zip(&row_totals)
        .map(|(row, &t)| {
            row.iter()
                .map(|&c| match normalize {
                    Normalize::None => c as f64,
                    Normalize::Row if t == 0 => 0.0,
                    Normalize::Row => c as f64 / t as f64,
                })
                .collect()
        })
        .collect();
    HeatmapPayload {
        labels: matrix.labels.clone(),
        normalize,
        values,
        counts: matrix.counts.clone(),
        row_totals,
    }
}
