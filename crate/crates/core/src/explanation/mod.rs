//! Global rankings (linear pair weights, forest impurity importances) and
//! local surrogate explanations.

mod lime;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::TrainedPipeline;

pub use lime::{
    explain_document, ClassProbability,
    lime_tabular, lime_text, weighted_ridge, Attribution, ExplanationKind, LimeOptions,
    LocalExplanation, RidgeFit, TabularBlackBox, TextBlackBox,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub weight: f64,
}

/// Top features on each side of a class pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalRanking {
    pub pipeline_id: String,
    pub pipeline_name: String,
    pub class_a: String,
    pub class_b: String,
    /// Largest positive weights: evidence for `class_a`.
    pub positive: Vec<RankedFeature>,
    /// Most negative weights: evidence for `class_b`.
    pub negative: Vec<RankedFeature>,
}

fn by_magnitude(a: &RankedFeature, b: &RankedFeature) -> Ordering {
    b.weight
        .abs()
        .total_cmp(&a.weight.abs())
        .then_with(|| a.feature.cmp(&b.feature))
}

/// Splits weights into the top-`k` positive and top-`k` negative entries,
/// ordered by magnitude (ties by feature name). Zero weights are skipped.
pub fn rank_weights(names: &[String], weights: &[f64], k: usize) -> (Vec<RankedFeature>, Vec<RankedFeature>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (name, &w) in names.iter().zip(weights) {
        let f = RankedFeature {
            feature: name.clone(),
            weight: w,
        };
        if w > 0.0 {
            pos.push(f);
        } else if w < 0.0 {
            neg.push(f);
        }
    }
    pos.sort_by(by_magnitude);
    neg.sort_by(by_magnitude);
    pos.truncate(k);
    neg.truncate(k);
    (pos, neg)
}

pub fn global_linear(
    pipeline: &TrainedPipeline,
    class_a: &str,
    class_b: &str,
    k: usize,
) -> Result<GlobalRanking> {
    let weights = pipeline
        .model
        .linear_pair_weights(class_a, class_b)
        .map_err(|e| match e {
            Error::Unsupported(_) => Error::Unsupported(
                "global ranking unavailable; use local explanations".into(),
            ),
            other => other,
        })?;
    let (positive, negative) = rank_weights(pipeline.representation.feature_names(), &weights, k);
    Ok(GlobalRanking {
        pipeline_id: pipeline.id.clone(),
        pipeline_name: pipeline.name.clone(),
        class_a: class_a.to_string(),
        class_b: class_b.to_string(),
        positive,
        negative,
    })
}

/// Every class pair's ranking for one class (`class` on the positive side).
pub fn global_linear_for_class(pipeline: &TrainedPipeline, class: &str, k: usize) -> Result<Vec<GlobalRanking>> {
    pipeline
        .classes()
        .iter()
        .filter(|c| c.as_str() != class)
        .map(|other| global_linear(pipeline, class, other, k))
        .collect()
}

/// Mean decrease in impurity per feature, highest first (ties by name).
/// An extension beyond linear models, for forest pipelines.
pub fn global_rf_importance(pipeline: &TrainedPipeline) -> Result<Vec<RankedFeature>> {
    let imp = pipeline.model.feature_importances()?;
    let mut out: Vec<RankedFeature> = pipeline
        .representation
        .feature_names()
        .iter()
        .zip(imp)
        .map(|(n, w)| RankedFeature {
            feature: n.clone(),
            weight: w,
        })
        .collect();
    out.sort_by(by_magnitude);
    Ok(out)
}
