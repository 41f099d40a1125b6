//! Plot-ready payloads: accuracy bars across pipelines, confusion heatmaps,
//! two-sided pair rankings, importance bars and label distributions over
//! strata. Each carries a chart type tag and a schema version.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{heatmap_payload, HeatmapPayload, Normalize, Provenance};
use crate::explanation::{GlobalRanking, RankedFeature};
use crate::hypothesis::{LabelDistribution, Verdict};
use crate::pipeline::EvaluationReport;

pub const CHART_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBar {
    pub pipeline_id: String,
    pub pipeline_name: String,
    /// Pooled cross-validation accuracy.
    pub cv_accuracy: f64,
    /// Mean and standard deviation of the per-fold accuracies.
    pub cv_fold_mean: f64,
    pub cv_fold_std: f64,
    pub heldout_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyChart {
    pub schema_version: u32,
    pub chart: String,
    pub bars: Vec<AccuracyBar>,
}

pub fn accuracy_chart(reports: &[&EvaluationReport]) -> AccuracyChart {
    AccuracyChart {
        schema_version: CHART_SCHEMA_VERSION,
        chart: "accuracy-bars".into(),
        bars: reports
            .iter()
            .map(|r| AccuracyBar {
                pipeline_id: r.pipeline_id.clone(),
                pipeline_name: r.pipeline_name.clone(),
                cv_accuracy: r.cv.panel.accuracy,
                cv_fold_mean: r.cv.mean.accuracy,
                cv_fold_std: r.cv.std.accuracy,
                heldout_accuracy: r.heldout.panel.accuracy,
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapChart {
    pub schema_version: u32,
    pub chart: String,
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub provenance: Provenance,
    pub accuracy: f64,
    pub heatmap: HeatmapPayload,
}

pub fn heatmap_chart(report: &EvaluationReport, source: Provenance, normalize: Normalize) -> HeatmapChart {
    let matrix = match source {
        Provenance::Cv => &report.cv.pooled,
        Provenance::Heldout => &report.heldout.confusion,
    };
    HeatmapChart {
        schema_version: CHART_SCHEMA_VERSION,
        chart: "confusion-heatmap".into(),
        pipeline_id: report.pipeline_id.clone(),
        pipeline_name: report.pipeline_name.clone(),
        provenance: source,
        accuracy: report.panel(source).accuracy,
        heatmap: heatmap_payload(matrix, normalize),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingChart {
    pub schema_version: u32,
    pub chart: String,
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub class_a: String,
    pub class_b: String,
    /// Evidence for `class_a`, strongest first.
    pub positive: Vec<RankedFeature>,
    /// Evidence for `class_b`, strongest first.
    pub negative: Vec<RankedFeature>,
}

pub fn ranking_chart(ranking: &GlobalRanking) -> RankingChart {
    RankingChart {
        schema_version: CHART_SCHEMA_VERSION,
        chart: "pair-ranking".into(),
        pipeline_id: ranking.pipeline_id.clone(),
        pipeline_name: ranking.pipeline_name.clone(),
        class_a: ranking.class_a.clone(),
        class_b: ranking.class_b.clone(),
        positive: ranking.positive.clone(),
        negative: ranking.negative.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceChart {
    pub schema_version: u32,
    pub chart: String,
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub features: Vec<RankedFeature>,
}

pub fn importance_chart(pipeline_id: &str, pipeline_name: &str, features: &[RankedFeature], k: usize) -> ImportanceChart {
    ImportanceChart {
        schema_version: CHART_SCHEMA_VERSION,
        chart: "importance-bars".into(),
        pipeline_id: pipeline_id.to_string(),
        pipeline_name: pipeline_name.to_string(),
        features: features.iter().take(k).cloned().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSeries {
    pub name: String,
    /// `counts[s][l]` for stratum `s` and label `l`.
    pub counts: Vec<Vec<f64>>,
    /// Counts as a fraction of the stratum total.
    pub shares: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionChart {
    pub schema_version: u32,
    pub chart: String,
    pub title: String,
    pub strata: Vec<String>,
    pub labels: Vec<String>,
    pub series: Vec<DistributionSeries>,
    pub unavailable: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<Verdict>,
}

fn series(name: &str, dist: &LabelDistribution, strata: &[String], labels: &[String]) -> DistributionSeries {
    let counts: Vec<Vec<f64>> = strata
        .iter()
        .map(|s| labels.iter().map(|l| dist.count(s, l)).collect())
        .collect();
    let shares = counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            row.iter()
                .map(|c| if total > 0.0 { c / total } else { 0.0 })
                .collect()
        })
        .collect();
    DistributionSeries {
        name: name.to_string(),
        counts,
        shares,
    }
}

/// Grouped bars per stratum. `series` pairs a display name with a
/// distribution (e.g. raw and re-estimated output, or gold counts); all
/// must share strata and labels.
pub fn distribution_chart(
    title: &str,
    distributions: &[(&str, &LabelDistribution)],
    verdicts: Vec<Verdict>,
) -> Result<DistributionChart> {
    let (_, first) = distributions
        .first()
        .ok_or_else(|| Error::InvalidInput("a distribution chart needs at least one series".into()))?;
    let strata: Vec<String> = first.strata.keys().cloned().collect();
    let mut labels = first.labels.clone();
    for (_, d) in &distributions[1..] {
        if d.strata.keys().ne(first.strata.keys()) {
            return Err(Error::InvalidInput("series disagree on strata".into()));
        }
        for l in &d.labels {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    labels.sort();
    let mut unavailable: Vec<String> = distributions
        .iter()
        .flat_map(|(_, d)| d.unavailable.iter().cloned())
        .collect();
    unavailable.sort();
    unavailable.dedup();
    Ok(DistributionChart {
        schema_version: CHART_SCHEMA_VERSION,
        chart: "label-distribution".into(),
        title: title.to_string(),
        series: distributions
            .iter()
            .map(|(n, d)| series(n, d, &strata, &labels))
            .collect(),
        strata,
        labels,
        unavailable,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::distribution;

    #[test]
    fn distribution_series_line_up() {
        let raw = distribution(&[(Some("1965"), "A"), (Some("1965"), "B"), (Some("1985"), "A")]);
        let c = distribution_chart("t", &[("raw", &raw), ("again", &raw)], Vec::new()).unwrap();
        assert_eq!(c.strata, vec!["1965", "1985"]);
        assert_eq!(c.series[0].counts, vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(c.series[0].shares[0], vec![0.5, 0.5]);
        assert!(distribution_chart("t", &[], Vec::new()).is_err());
    }
}
