//! Random forest of CART trees (Gini criterion, bootstrap rows, a fixed
//! number of candidate features per split, grown until leaves are pure).

use rayon::prelude::*;

use crate::rng::Rng;
use crate::sparse::SparseVector;

use super::argmax;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    /// `None` for a leaf.
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Majority class of the (bootstrap-weighted) samples reaching the node.
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_class(&self, x: &SparseVector) -> usize {
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            match node.feature {
                None => return node.class,
                Some(f) => at = if x.get(f) <= node.threshold { node.left } else { node.right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match t.nodes[at].feature {
                None => 0,
                Some(_) => 1 + walk(t, t.nodes[at].left).max(walk(t, t.nodes[at].right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub n_classes: usize,
    pub max_features: usize,
    pub trees: Vec<Tree>,
    /// Mean decrease in impurity per feature, summing to 1 (or all zero
    /// when no tree ever split).
    pub importances: Vec<f64>,
}

/// Column-major view of the training rows: `(row, value)` per feature.
struct Columns {
    cols: Vec<Vec<(usize, f64)>>,
}

impl Columns {
    fn new(x: &[SparseVector], dim: usize) -> Self {
        let mut cols = vec![Vec::new(); dim];
        for (r, row) in x.iter().enumerate() {
            for (f, v) in row.iter() {
                cols[f].push((r, v));
            }
        }
        Self { cols }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    improvement: f64,
}

struct TreeBuilder<'a> {
    x: &'a [SparseVector],
    y: &'a [usize],
    cols: &'a Columns,
    n_classes: usize,
    max_features: usize,
    /// Bootstrap multiplicity of each row (0 = not drawn).
    weight: Vec<f64>,
    /// Multiplicity of rows in the node currently being split.
    in_node: Vec<f64>,
    features: Vec<usize>,
    rng: Rng,
    importance: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += self.weight[r];
        }
        counts
    }

    fn best_split(&mut self, rows: &[usize], counts: &[f64]) -> Option<Split> {
        let total: f64 = counts.iter().sum();
        let parent_score: f64 = counts.iter().map(|c| c * c).sum::<f64>() / total;
        for &r in rows {
            self.in_node[r] = self.weight[r];
        }
        let dim = self.features.len();
        let mut best: Option<Split> = None;
        let mut visited = 0;
        let mut entries: Vec<(f64, usize, f64)> = Vec::new();
        for k in 0..dim {
            if visited == self.max_features {
                break;
            }
            let pick = k + self.rng.index(dim - k);
            self.features.swap(k, pick);
            let f = self.features[k];

            entries.clear();
            let mut zero_counts = counts.to_vec();
            for &(r, v) in &self.cols.cols[f] {
                let w = self.in_node[r];
                if w > 0.0 {
                    entries.push((v, self.y[r], w));
                    zero_counts[self.y[r]] -= w;
                }
            }
            for (c, &w) in zero_counts.iter().enumerate() {
                if w > 0.5 {
                    entries.push((0.0, c, w));
                }
            }
            entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if entries.first().map(|e| e.0) == entries.last().map(|e| e.0) {
                continue;
            }
            visited += 1;

            let mut left = vec![0.0; self.n_classes];
            let mut left_w = 0.0;
            let mut left_sq = 0.0;
            let mut right_sq: f64 = counts.iter().map(|c| c * c).sum();
            for i in 0..entries.len() - 1 {
                let (v, c, w) = entries[i];
                let right_c = counts[c] - left[c];
                right_sq += (right_c - w) * (right_c - w) - right_c * right_c;
                left_sq += (left[c] + w) * (left[c] + w) - left[c] * left[c];
                left[c] += w;
                left_w += w;
                let next = entries[i + 1].0;
                if next <= v {
                    continue;
                }
                let right_w = total - left_w;
                let improvement = left_sq / left_w + right_sq / right_w - parent_score;
                if best.as_ref().is_none_or(|b| improvement > b.improvement) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        improvement,
                    });
                }
            }
        }
        for &r in rows {
            self.in_node[r] = 0.0;
        }
        best
    }

    fn build(mut self, rows: Vec<usize>) -> (Tree, Vec<f64>) {
        let mut nodes: Vec<Node> = Vec::new();
        let mut stack = vec![(rows, usize::MAX, false)];
        while let Some((rows, parent, is_left)) = stack.pop() {
            let counts = self.class_counts(&rows);
            let id = nodes.len();
            nodes.push(Node {
                feature: None,
                threshold: 0.0,
                left: 0,
                right: 0,
                class: argmax(&counts),
            });
            if parent != usize::MAX {
                if is_left {
                    nodes[parent].left = id;
                } else {
                    nodes[parent].right = id;
                }
            }
            if counts.iter().filter(|&&c| c > 0.0).count() <= 1 {
                continue;
            }
            let Some(split) = self.best_split(&rows, &counts) else {
                continue;
            };
            self.importance[split.feature] += split.improvement;
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&i| self.x[i].get(split.feature) <= split.threshold);
            nodes[id].feature = Some(split.feature);
            nodes[id].threshold = split.threshold;
            stack.push((r, id, false));
            stack.push((l, id, true));
        }
        (Tree { nodes }, self.importance)
    }
}

impl ForestModel {
    pub fn fit(
        x: &[SparseVector],
        y: &[usize],
        n_classes: usize,
        n_estimators: usize,
        max_features: usize,
        seed: u64,
    ) -> Self {
        let dim = x[0].dim();
        let cols = Columns::new(x, dim);
        let n = x.len();
        let built: Vec<(Tree, Vec<f64>)> = (0..n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = Rng::derive(seed, t as u64);
                let mut weight = vec![0.0; n];
                for _ in 0..n {
                    weight[rng.index(n)] += 1.0;
                }
                let rows: Vec<usize> = (0..n).filter(|&r| weight[r] > 0.0).collect();
                let builder = TreeBuilder {
                    x,
                    y,
                    cols: &cols,
                    n_classes,
                    max_features,
                    weight,
                    in_node: vec![0.0; n],
                    features: (0..dim).collect(),
                    rng,
                    importance: vec![0.0; dim],
                };
                builder.build(rows)
            })
            .collect();

        let mut importances = vec![0.0; dim];
        let mut trees = Vec::with_capacity(built.len());
        for (tree, imp) in built {
            let total: f64 = imp.iter().sum();
            if total > 0.0 {
                for (acc, v) in importances.iter_mut().zip(&imp) {
                    *acc += v / total;
                }
            }
            trees.push(tree);
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            for v in &mut importances {
                *v /= total;
            }
        }
        Self {
            n_classes,
            max_features,
            trees,
            importances,
        }
    }

    pub fn vote_fractions(&self, x: &SparseVector) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.leaf_class(x)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter().map(|v| v / n).collect()
    }

    pub fn feature_importances(&self, dim: usize) -> Vec<f64> {
        let mut out = self.importances.clone();
        out.resize(dim, 0.0);
        out
    }
}
