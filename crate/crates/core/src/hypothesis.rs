//! Label distributions over strata (e.g. publication year), count
//! re-estimation from precision and recall, and share-based verdicts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::MetricPanel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Raw,
    Reestimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub kind: DistributionKind,
    /// All labels, sorted; every stratum carries an entry for each.
    pub labels: Vec<String>,
    /// stratum → label → count.
    pub strata: BTreeMap<String, BTreeMap<String, f64>>,
    /// Label counts of documents without a stratum.
    pub unstratified: BTreeMap<String, f64>,
    /// Labels whose re-estimate is undefined (recall 0 with a nonzero count).
    pub unavailable: Vec<String>,
    pub warnings: Vec<String>,
}

impl LabelDistribution {
    pub fn count(&self, stratum: &str, label: &str) -> f64 {
        self.strata
            .get(stratum)
            .and_then(|m| m.get(label))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn stratum_total(&self, stratum: &str) -> f64 {
        self.strata.get(stratum).map_or(0.0, |m| m.values().sum())
    }

    /// Adds zero-count entries for labels that never occurred.
    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Self {
        let mut all: BTreeSet<String> = self.labels.iter().cloned().collect();
        all.extend(labels.iter().map(|l| l.as_ref().to_string()));
        for m in self.strata.values_mut() {
            for l in &all {
                m.entry(l.clone()).or_insert(0.0);
            }
        }
        self.labels = all.into_iter().collect();
        self
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in out.strata.values_mut().chain(std::iter::once(&mut out.unstratified)) {
            m.values_mut().for_each(|v| *v *= factor);
        }
        out
    }
}

/// Tallies `(stratum, label)` pairs. Items without a stratum go to the
/// unstratified bucket with a warning.
pub fn distribution<S: AsRef<str>, L: AsRef<str>>(items: &[(Option<S>, L)]) -> LabelDistribution {
    let labels: BTreeSet<String> = items.iter().map(|(_, l)| l.as_ref().to_string()).collect();
    let mut strata: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut unstratified: BTreeMap<String, f64> = BTreeMap::new();
    for (stratum, label) in items {
        let slot = match stratum {
            Some(s) => strata.entry(s.as_ref().to_string()).or_default(),
            None => &mut unstratified,
        };
        *slot.entry(label.as_ref().to_string()).or_insert(0.0) += 1.0;
    }
    for m in strata.values_mut() {
        for l in &labels {
            m.entry(l.clone()).or_insert(0.0);
        }
    }
    let missing: f64 = unstratified.values().sum();
    let warnings = if missing > 0.0 {
        vec![format!("{missing} documents have no stratum and are counted as unstratified")]
    } else {
        Vec::new()
    };
    LabelDistribution {
        kind: DistributionKind::Raw,
        labels: labels.into_iter().collect(),
        strata,
        unstratified,
        unavailable: Vec::new(),
        warnings,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReestimationInput {
    pub per_label: BTreeMap<String, PrecisionRecall>,
}

impl ReestimationInput {
    pub fn from_panel(panel: &MetricPanel) -> Self {
        Self {
            per_label: panel
                .per_class
                .iter()
                .map(|c| {
                    (
                        c.label.clone(),
                        PrecisionRecall {
                            precision: c.precision,
                            recall: c.recall,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (label, pr) in &self.per_label {
            for (name, v) in [("precision", pr.precision), ("recall", pr.recall)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("{name} of `{label}` must lie in [0, 1], got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// `new = old · precision / recall` for every label in every stratum.
///
/// A label with a nonzero count and zero (or unknown) recall cannot be
/// corrected: its counts are left as they were and it is listed in
/// `unavailable`.
pub fn reestimate(dist: &LabelDistribution, input: &ReestimationInput) -> Result<LabelDistribution> {
    input.validate()?;
    let mut out = dist.clone();
    out.kind = DistributionKind::Reestimated;
    let mut unavailable: BTreeSet<String> = dist.unavailable.iter().cloned().collect();
    for label in &dist.labels {
        let seen = dist
            .strata
            .values()
            .chain(std::iter::once(&dist.unstratified))
            .any(|m| m.get(label).copied().unwrap_or(0.0) > 0.0);
        let factor = match input.per_label.get(label) {
            Some(pr) if pr.recall > 0.0 => Some(pr.precision / pr.recall),
            _ => None,
        };
        for m in out.strata.values_mut().chain(std::iter::once(&mut out.unstratified)) {
            if let (Some(v), Some(f)) = (m.get_mut(label), factor) {
                *v *= f;
            }
        }
        if factor.is_none() && seen {
            unavailable.insert(label.clone());
            out.warnings.push(match input.per_label.get(label) {
                Some(_) => format!("`{label}` has recall 0; its counts cannot be re-estimated"),
                None => format!("no precision/recall for `{label}`; its counts cannot be re-estimated"),
            });
        }
    }
    out.unavailable = unavailable.into_iter().collect();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Increase,
    Decrease,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub label: String,
    pub comparator: Comparator,
    pub baseline: String,
    pub comparison: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Supported,
    Refuted,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub spec: HypothesisSpec,
    pub kind: DistributionKind,
    pub outcome: Outcome,
    pub baseline_share: Option<f64>,
    pub comparison_share: Option<f64>,
    pub notes: Vec<String>,
}

fn share(dist: &LabelDistribution, stratum: &str, label: &str) -> Result<f64> {
    let m = dist
        .strata
        .get(stratum)
        .ok_or_else(|| Error::InvalidInput(format!("stratum `{stratum}` is not in the distribution")))?;
    let total: f64 = m
        .iter()
        .filter(|(l, _)| !dist.unavailable.contains(l))
        .map(|(_, v)| v)
        .sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(format!("stratum `{stratum}` has no documents")));
    }
    Ok(m.get(label).copied().unwrap_or(0.0) / total)
}

/// Compares the label's relative share between two strata; the comparator
/// must hold strictly. Shares are taken over the labels that could be
/// re-estimated.
pub fn verdict(dist: &LabelDistribution, spec: &HypothesisSpec) -> Result<Verdict> {
    for s in [&spec.baseline, &spec.comparison] {
        if !dist.strata.contains_key(s) {
            return Err(Error::InvalidInput(format!("stratum `{s}` is not in the distribution")));
        }
    }
    if !dist.labels.contains(&spec.label) {
        return Err(Error::UnknownLabel(spec.label.clone()));
    }
    let mut notes = Vec::new();
    if dist.unavailable.contains(&spec.label) {
        notes.push(format!("`{}` could not be re-estimated", spec.label));
        return Ok(Verdict {
            spec: spec.clone(),
            kind: dist.kind,
            outcome: Outcome::Indeterminate,
            baseline_share: None,
            comparison_share: None,
            notes,
        });
    }
    if !dist.unavailable.is_empty() {
        notes.push(format!(
            "shares exclude labels that could not be re-estimated: {}",
            dist.unavailable.join(", ")
        ));
    }
    let b = share(dist, &spec.baseline, &spec.label)?;
    let c = share(dist, &spec.comparison, &spec.label)?;
    let holds = match spec.comparator {
        Comparator::Increase => c > b,
        Comparator::Decrease => c < b,
    };
    Ok(Verdict {
        spec: spec.clone(),
        kind: dist.kind,
        outcome: if holds { Outcome::Supported } else { Outcome::Refuted },
        baseline_share: Some(b),
        comparison_share: Some(c),
        notes,
    })
}
