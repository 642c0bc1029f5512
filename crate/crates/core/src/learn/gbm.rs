//! Gradient-boosted regression trees for the logistic loss.
//!
//! Trees grow best-first: the leaf with the largest second-order gain is
//! split next, until `max_leaves` leaves exist or no admissible split
//! remains. Leaf values are penalised Newton steps `-G / (H + l2)`.

use serde::{Deserialize, Serialize};

use crate::calibrate::sigmoid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub n_estimators: usize,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub l2: f64,
    /// Recorded for reproducibility; training uses every row and column, so
    /// the fit does not depend on it.
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            n_estimators: 150,
            max_leaves: 8,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 50,
            l2: 1.0,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be positive");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub n_features: usize,
    /// Initial log-odds.
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbmModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }
}

impl Model for GbmModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Number of rows going left.
    n_left: usize,
}

struct GrowingLeaf {
    node: usize,
    depth: usize,
    /// Row indices sorted by each feature.
    sorted: Vec<Vec<usize>>,
    grad: f64,
    hess: f64,
    best: Option<SplitCandidate>,
}

struct Grower<'a> {
    x: &'a [f64],
    p: usize,
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbmConfig,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.l2)
    }

    fn best_split(&self, leaf: &GrowingLeaf) -> Option<SplitCandidate> {
        let n = leaf.sorted[0].len();
        let min = self.cfg.min_samples_leaf;
        if leaf.depth >= self.cfg.max_depth || n < 2 * min {
            return None;
        }
        let parent = self.score(leaf.grad, leaf.hess);
        let mut best: Option<SplitCandidate> = None;
        for (f, order) in leaf.sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..n - 1 {
                let r = order[k];
                gl += self.grad[r];
                hl += self.hess[r];
                let n_left = k + 1;
                if n_left < min || n - n_left < min {
                    continue;
                }
                let v = self.x[r * self.p + f];
                let next = self.x[order[k + 1] * self.p + f];
                if next <= v {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(leaf.grad - gl, leaf.hess - hl) - parent;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate { gain, feature: f, threshold: 0.5 * (v + next), n_left });
                }
            }
        }
        best
    }

    fn leaf(&self, node: usize, depth: usize, sorted: Vec<Vec<usize>>) -> GrowingLeaf {
        let (grad, hess) = sorted[0].iter().fold((0.0, 0.0), |(g, h), &r| (g + self.grad[r], h + self.hess[r]));
        let mut leaf = GrowingLeaf { node, depth, sorted, grad, hess, best: None };
        leaf.best = self.best_split(&leaf);
        leaf
    }

    /// Returns the tree and, per training row, the value of the leaf it lands in.
    fn grow_from(&self, sorted: Vec<Vec<usize>>, n_rows: usize) -> (Tree, Vec<f64>) {
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut open = vec![self.leaf(0, 0, sorted)];
        let mut going_left = vec![false; n_rows];
        while open.len() < self.cfg.max_leaves {
            // pick the leaf with the largest gain; ties go to the older node
            let pick = open
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.map(|b| (i, b.gain, l.node)))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
            let Some((i, _, _)) = pick else { break };
            let leaf = open.swap_remove(i);
            let split = leaf.best.expect("picked leaf has a split");
            for &r in &leaf.sorted[split.feature][..split.n_left] {
                going_left[r] = true;
            }
            let (mut left, mut right) = (Vec::with_capacity(self.p), Vec::with_capacity(self.p));
            for order in leaf.sorted {
                let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&r| going_left[r]);
                left.push(l);
                right.push(r);
            }
            for &r in &left[0] {
                going_left[r] = false;
            }
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaf.node] = Node::Split { feature: split.feature, threshold: split.threshold, left: li, right: ri };
            open.push(self.leaf(li, leaf.depth + 1, left));
            open.push(self.leaf(ri, leaf.depth + 1, right));
        }
        let mut fitted = vec![0.0; n_rows];
        for leaf in open {
            let value = -leaf.grad / (leaf.hess + self.cfg.l2);
            nodes[leaf.node] = Node::Leaf { value };
            for &r in &leaf.sorted[0] {
                fitted[r] = value;
            }
        }
        (Tree { nodes }, fitted)
    }
}

/// Fits a boosted classifier of `y` on the predictors of `data` (never on `g`).
pub fn train_gbm(data: &Dataset, cfg: &GbmConfig) -> Result<GbmModel> {
    cfg.validate()?;
    let y = data.y();
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if let Some(&v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryLabel(v));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    if mean == 0.0 || mean == 1.0 {
        return Err(Error::DegenerateLabels);
    }
    let p = data.n_features();
    let init = (mean / (1.0 - mean)).ln();
    let mut raw = vec![init; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let x = data.x();
    let presorted = presort(x, p, n);
    for _ in 0..cfg.n_estimators {
        for k in 0..n {
            let s = sigmoid(raw[k]);
            grad[k] = s - y[k];
            hess[k] = (s * (1.0 - s)).max(1e-16);
        }
        let grower = Grower { x, p, grad: &grad, hess: &hess, cfg };
        let (tree, fitted) = if p == 0 {
            let g: f64 = grad.iter().sum();
            let h: f64 = hess.iter().sum();
            let v = -g / (h + cfg.l2);
            (Tree { nodes: vec![Node::Leaf { value: v }] }, vec![v; n])
        } else {
            grower.grow_from(presorted.clone(), n)
        };
        for (r, f) in raw.iter_mut().zip(&fitted) {
            *r += cfg.learning_rate * f;
        }
        trees.push(tree);
    }
    Ok(GbmModel { n_features: p, init, learning_rate: cfg.learning_rate, trees })
}

/// Row indices sorted by each feature column.
fn presort(x: &[f64], p: usize, n: usize) -> Vec<Vec<usize>> {
    (0..p)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a * p + f].total_cmp(&x[b * p + f]));
            idx
        })
        .collect()
}
