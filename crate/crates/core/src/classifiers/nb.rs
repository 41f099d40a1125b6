use crate::error::{Error, Result};
use crate::sparse::SparseVector;

use super::NB_MIN_ALPHA;

/// Multinomial Naive Bayes: class log-priors and per-class log θ(t|c).
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveBayesModel {
    pub alpha: f64,
    pub class_log_prior: Vec<f64>,
    /// `feature_log_prob[c][t] = ln θ(t|c)`.
    pub feature_log_prob: Vec<Vec<f64>>,
}

impl NaiveBayesModel {
    /// θ(t|c) = (count(t,c) + α) / (total(c) + α·V), with α clamped to 1e-10.
    pub fn fit(x: &[SparseVector], y: &[usize], n_classes: usize, alpha: f64) -> Result<Self> {
        let dim = x[0].dim();
        let alpha = alpha.max(NB_MIN_ALPHA);
        let mut counts = vec![vec![0.0; dim]; n_classes];
        let mut docs = vec![0usize; n_classes];
        for (row, &c) in x.iter().zip(y) {
            docs[c] += 1;
            for (t, v) in row.iter() {
                if v < 0.0 {
                    return Err(Error::InvalidInput(
                        "Naive Bayes needs non-negative features".into(),
                    ));
                }
                counts[c][t] += v;
            }
        }
        let n = x.len() as f64;
        let class_log_prior = docs.iter().map(|&d| (d as f64 / n).ln()).collect();
        let feature_log_prob = counts
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                let denom = (total + alpha * dim as f64).ln();
                row.iter().map(|c| (c + alpha).ln() - denom).collect()
            })
            .collect();
        Ok(Self {
            alpha,
            class_log_prior,
            feature_log_prob,
        })
    }

    pub fn joint_log_likelihood(&self, x: &SparseVector) -> Vec<f64> {
        self.class_log_prior
            .iter()
            .zip(&self.feature_log_prob)
            .map(|(prior, logp)| prior + x.dot_dense(logp))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{train, ModelSpec};
    use super::*;

    #[test]
    fn worked_example() {
        // vocab {a, b}; P: "a a", Q: "b"
        let x = vec![
            SparseVector::from_dense(&[2.0, 0.0]),
            SparseVector::from_dense(&[0.0, 1.0]),
        ];
        let y = vec!["P".to_string(), "Q".to_string()];
        let m = train(&ModelSpec::nb(1.0), &x, &y).unwrap();
        let super::super::ModelParams::NaiveBayes(nb) = &m.params else {
            unreachable!()
        };
        assert!((nb.feature_log_prob[0][0].exp() - 0.75).abs() < 1e-15);
        assert_eq!(m.predict(&SparseVector::from_dense(&[1.0, 0.0])).unwrap(), "P");
        assert_eq!(m.predict(&SparseVector::from_dense(&[0.0, 1.0])).unwrap(), "Q");
        let p = m.predict_proba(&SparseVector::from_dense(&[1.0, 1.0])).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_is_clamped() {
        let x = vec![
            SparseVector::from_dense(&[1.0, 0.0]),
            SparseVector::from_dense(&[0.0, 1.0]),
        ];
        let m = NaiveBayesModel::fit(&x, &[0, 1], 2, 0.0).unwrap();
        assert_eq!(m.alpha, NB_MIN_ALPHA);
        assert!(m.feature_log_prob.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn negative_features_are_rejected() {
        let x = vec![
            SparseVector::from_dense(&[-1.0]),
            SparseVector::from_dense(&[1.0]),
        ];
        assert!(NaiveBayesModel::fit(&x, &[0, 1], 2, 1.0).is_err());
    }
}
