//! One-vs-one linear SVC solved per pair by dual coordinate descent.
//!
//! Each pair problem is the L2-regularized hinge-loss SVM
//! `min ½‖w̃‖² + C Σ max(0, 1 − yᵢ w̃·x̃ᵢ)` with `x̃ = [x, 1]`, so the bias is
//! the last coordinate of `w̃` (and is regularized along with the weights).
//! Its dual is `min ½ αᵀQα − Σα` subject to `0 ≤ α ≤ C`, with
//! `Qᵢⱼ = yᵢyⱼ x̃ᵢ·x̃ⱼ`.

use rayon::prelude::*;

use crate::rng::Rng;
use crate::sparse::SparseVector;

use super::{canonical_order, class_pairs};

/// Relative primal-dual gap at which a pair problem counts as solved.
pub const DUAL_GAP_TOL: f64 = 1e-4;
/// Largest projected-gradient magnitude tolerated at the solution.
pub const KKT_TOL: f64 = 1e-3;
const MAX_EPOCHS: usize = 20_000;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
    pub max_kkt_violation: f64,
    pub converged: bool,
}

impl SolverStats {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

/// Weights of one pair problem; positive margin favours class `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPair {
    pub a: usize,
    pub b: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvcModel {
    pub c: f64,
    pub pairs: Vec<LinearPair>,
}

/// Dual variables and the primal solution they imply.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub stats: SolverStats,
}

fn margin(w: &[f64], b: f64, x: &SparseVector) -> f64 {
    x.dot_dense(w) + b
}

/// Dual objective `½ αᵀQα − Σα` for the bias-augmented problem.
pub fn dual_objective(rows: &[SparseVector], y: &[f64], alpha: &[f64]) -> f64 {
    let dim = rows.first().map_or(0, SparseVector::dim);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for ((x, &yi), &ai) in rows.iter().zip(y).zip(alpha) {
        for (j, v) in x.iter() {
            w[j] += ai * yi * v;
        }
        b += ai * yi;
    }
    0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b) - alpha.iter().sum::<f64>()
}

/// Projected-gradient magnitude of each dual coordinate at `alpha`.
pub fn kkt_violations(rows: &[SparseVector], y: &[f64], alpha: &[f64], c: f64) -> Vec<f64> {
    let dim = rows.first().map_or(0, SparseVector::dim);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for ((x, &yi), &ai) in rows.iter().zip(y).zip(alpha) {
        for (j, v) in x.iter() {
            w[j] += ai * yi * v;
        }
        b += ai * yi;
    }
    rows.iter()
        .zip(y)
        .zip(alpha)
        .map(|((x, &yi), &ai)| projected_gradient(yi * margin(&w, b, x) - 1.0, ai, c).abs())
        .collect()
}

fn projected_gradient(g: f64, a: f64, c: f64) -> f64 {
    if a <= 0.0 {
        g.min(0.0)
    } else if a >= c {
        g.max(0.0)
    } else {
        g
    }
}

/// Dual coordinate descent on one binary problem (`y ∈ {−1, +1}`).
///
/// Coordinates are visited in a fresh seeded permutation each epoch. The
/// solver stops once the relative duality gap is at most [`DUAL_GAP_TOL`]
/// and every projected gradient is within [`KKT_TOL`].
pub fn solve_linear_dual(rows: &[&SparseVector], y: &[f64], c: f64, seed: u64) -> DualSolution {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.dim());
    let q_diag: Vec<f64> = rows.iter().map(|x| x.norm_sq() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = SolverStats::default();

    for epoch in 1..=MAX_EPOCHS {
        rng.shuffle(&mut order);
        for &i in &order {
            let g = y[i] * margin(&w, b, rows[i]) - 1.0;
            if projected_gradient(g, alpha[i], c) == 0.0 {
                continue;
            }
            let old = alpha[i];
            let new = (old - g / q_diag[i]).clamp(0.0, c);
            let delta = (new - old) * y[i];
            if delta != 0.0 {
                for (j, v) in rows[i].iter() {
                    w[j] += delta * v;
                }
                b += delta;
                alpha[i] = new;
            }
        }

        let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
        let mut hinge = 0.0;
        let mut max_pg: f64 = 0.0;
        for i in 0..n {
            let m = y[i] * margin(&w, b, rows[i]);
            hinge += (1.0 - m).max(0.0);
            max_pg = max_pg.max(projected_gradient(m - 1.0, alpha[i], c).abs());
        }
        stats = SolverStats {
            iterations: epoch,
            primal: reg + c * hinge,
            dual: alpha.iter().sum::<f64>() - reg,
            max_kkt_violation: max_pg,
            converged: false,
        };
        if stats.gap() <= DUAL_GAP_TOL * stats.primal.abs().max(1.0) && max_pg <= KKT_TOL {
            stats.converged = true;
            break;
        }
    }
    if !stats.converged {
        log::warn!(
            "linear SVC stopped after {} epochs (gap {:.3e}, KKT {:.3e})",
            stats.iterations,
            stats.gap(),
            stats.max_kkt_violation
        );
    }
    DualSolution {
        alpha,
        weights: w,
        bias: b,
        stats,
    }
}

impl LinearSvcModel {
    pub fn fit(x: &[SparseVector], y: &[usize], n_classes: usize, c: f64, seed: u64) -> Self {
        let pairs = class_pairs(n_classes)
            .into_par_iter()
            .enumerate()
            .map(|(p, (a, b))| {
                let members: Vec<usize> = (0..x.len()).filter(|&i| y[i] == a || y[i] == b).collect();
                let rows: Vec<&SparseVector> = members.iter().map(|&i| &x[i]).collect();
                let signs: Vec<f64> = members
                    .iter()
                    .map(|&i| if y[i] == a { 1.0 } else { -1.0 })
                    .collect();
                let order = canonical_order(&rows, &signs);
                let rows: Vec<&SparseVector> = order.iter().map(|&i| rows[i]).collect();
                let signs: Vec<f64> = order.iter().map(|&i| signs[i]).collect();
                let sol = solve_linear_dual(&rows, &signs, c, Rng::derive(seed, p as u64).next_u64());
                LinearPair {
                    a,
                    b,
                    weights: sol.weights,
                    bias: sol.bias,
                }
            })
            .collect();
        Self { c, pairs }
    }

    pub fn pair(&self, a: usize, b: usize) -> &LinearPair {
        self.pairs
            .iter()
            .find(|p| p.a == a && p.b == b)
            .expect("every class pair is trained")
    }

    pub fn pair_margins<'a>(&'a self, x: &'a SparseVector) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        self.pairs
            .iter()
            .map(move |p| (p.a, p.b, margin(&p.weights, p.bias, x)))
    }
}
