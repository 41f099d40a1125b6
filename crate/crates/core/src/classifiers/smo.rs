//! One-vs-one RBF SVC; each pair is solved by SMO with second-order
//! working-set selection.
//!
//! Pair problem (dual): `min ½ αᵀQα − Σα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`,
//! `Qᵢⱼ = yᵢyⱼ exp(−γ‖xᵢ − xⱼ‖²)`. Decision: `f(x) = Σ αᵢyᵢK(xᵢ, x) − ρ`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::sparse::SparseVector;

use super::{canonical_order, class_pairs};

/// Stop once the maximal KKT violating pair differs by less than this.
pub const SMO_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RbfPair {
    pub a: usize,
    pub b: usize,
    /// Indices into [`RbfSvcModel::support`].
    pub support: Vec<usize>,
    /// `αᵢ yᵢ` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbfSvcModel {
    pub c: f64,
    pub gamma: f64,
    /// Distinct training rows that are support vectors of some pair.
    pub support: Vec<SparseVector>,
    pub pairs: Vec<RbfPair>,
}

pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

fn rbf(gamma: f64, a: &SparseVector, b: &SparseVector) -> f64 {
    (-gamma * a.dist_sq(b)).exp()
}

pub(crate) fn solve_smo(rows: &[&SparseVector], y: &[f64], c: f64, gamma: f64) -> SmoSolution {
    let n = rows.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(gamma, rows[i], rows[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;
    let max_iter = (100 * n).max(10_000_000);
    let mut iter = 0;

    while iter < max_iter {
        // i maximizes −yG over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && -y[t] * grad[t] >= gmax {
                if -y[t] * grad[t] > gmax || i_sel == usize::MAX {
                    gmax = -y[t] * grad[t];
                    i_sel = t;
                }
            }
        }
        // j minimizes the second-order objective over I_low
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_sel != usize::MAX {
            for t in 0..n {
                let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = 2.0 - 2.0 * kernel[i_sel * n + t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < SMO_TOL {
            break;
        }
        iter += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    if iter >= max_iter {
        log::warn!("SMO reached the iteration limit ({max_iter})");
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alpha,
        rho,
        iterations: iter,
    }
}

impl RbfSvcModel {
    pub fn fit(x: &[SparseVector], y: &[usize], n_classes: usize, c: f64, gamma: f64) -> Self {
        let solved: Vec<(usize, usize, Vec<(usize, f64)>, f64)> = class_pairs(n_classes)
            .into_par_iter()
            .map(|(a, b)| {
                let members: Vec<usize> = (0..x.len()).filter(|&i| y[i] == a || y[i] == b).collect();
                let rows: Vec<&SparseVector> = members.iter().map(|&i| &x[i]).collect();
                let signs: Vec<f64> = members
                    .iter()
                    .map(|&i| if y[i] == a { 1.0 } else { -1.0 })
                    .collect();
                let order = canonical_order(&rows, &signs);
                let members: Vec<usize> = order.iter().map(|&i| members[i]).collect();
                let rows: Vec<&SparseVector> = order.iter().map(|&i| rows[i]).collect();
                let signs: Vec<f64> = order.iter().map(|&i| signs[i]).collect();
                let sol = solve_smo(&rows, &signs, c, gamma);
                log::debug!("SMO pair ({a}, {b}): {} iterations", sol.iterations);
                let sv = (0..members.len())
                    .filter(|&k| sol.alpha[k] > 0.0)
                    .map(|k| (members[k], sol.alpha[k] * signs[k]))
                    .collect();
                (a, b, sv, sol.rho)
            })
            .collect();

        // Support rows are keyed by content so duplicate rows share one slot
        // regardless of where they sat in the training set.
        let mut slots: BTreeMap<Vec<(usize, u64)>, usize> = BTreeMap::new();
        let mut support = Vec::new();
        let mut pairs = Vec::with_capacity(solved.len());
        for (a, b, sv, rho) in solved {
            let mut idx = Vec::with_capacity(sv.len());
            let mut coef = Vec::with_capacity(sv.len());
            for (row, co) in sv {
                let key: Vec<(usize, u64)> = x[row].iter().map(|(i, v)| (i, v.to_bits())).collect();
                let slot = *slots.entry(key).or_insert_with(|| {
                    support.push(x[row].clone());
                    support.len() - 1
                });
                idx.push(slot);
                coef.push(co);
            }
            pairs.push(RbfPair {
                a,
                b,
                support: idx,
                coef,
                rho,
            });
        }
        Self {
            c,
            gamma,
            support,
            pairs,
        }
    }

    pub fn pair_margins(&self, x: &SparseVector) -> Vec<(usize, usize, f64)> {
        let k: Vec<f64> = self.support.iter().map(|s| rbf(self.gamma, s, x)).collect();
        self.pairs
            .iter()
            .map(|p| {
                let f: f64 = p.support.iter().zip(&p.coef).map(|(&s, co)| co * k[s]).sum();
                (p.a, p.b, f - p.rho)
            })
            .collect()
    }
}
