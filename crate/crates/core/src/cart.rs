//! Deterministic CART classification trees with Gini impurity.
//!
//! Splits test `x[feature] < threshold` (left) against `>=` (right), with the
//! threshold at the midpoint between adjacent distinct values. Among
//! candidate splits the lowest weighted child impurity wins; ties go to the
//! smaller feature index, then the smaller threshold.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum number of samples in each child of a split.
    pub min_leaf: usize,
    /// Per-class sample weights used for impurity and leaf votes.
    pub class_weights: Option<Vec<f64>>,
}

impl TreeParams {
    pub fn new(max_depth: usize) -> Self {
        TreeParams {
            max_depth,
            min_leaf: 1,
            class_weights: None,
        }
    }

    pub fn min_leaf(mut self, min_leaf: usize) -> Self {
        self.min_leaf = min_leaf.max(1);
        self
    }

    pub fn class_weights(mut self, weights: Vec<f64>) -> Self {
        self.class_weights = Some(weights);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        depth: usize,
    },
    Leaf {
        class: usize,
        probabilities: Vec<f64>,
        samples: usize,
        depth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    max_depth: usize,
    feature_count: usize,
    num_classes: usize,
}

/// One condition on a root-to-leaf path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub threshold: f64,
    /// `true` for `x >= threshold`, `false` for `x < threshold`.
    pub at_least: bool,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        (x[self.feature] >= self.threshold) == self.at_least
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafPath {
    pub conditions: Vec<Condition>,
    pub class: usize,
    pub leaf: usize,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    weights: Vec<f64>,
    num_classes: usize,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts
        .iter()
        .map(|c| (c / total) * (c / total))
        .sum::<f64>()
}

impl Builder<'_> {
    fn class_totals(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_classes];
        for &i in rows {
            counts[self.y[i]] += self.weights[self.y[i]];
        }
        counts
    }

    fn leaf(&mut self, rows: &[usize], depth: usize) -> usize {
        let counts = self.class_totals(rows);
        let total: f64 = counts.iter().sum();
        let mut class = 0;
        for c in 1..self.num_classes {
            if counts[c] > counts[class] {
                class = c;
            }
        }
        let probabilities = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            vec![0.0; self.num_classes]
        };
        self.nodes.push(Node::Leaf {
            class,
            probabilities,
            samples: rows.len(),
            depth,
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let d = self.x[rows[0]].len();
        let total = self.class_totals(rows);
        let total_w: f64 = total.iter().sum();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for f in 0..d {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.num_classes];
            for i in 0..order.len() - 1 {
                let r = order[i];
                left[self.y[r]] += self.weights[self.y[r]];
                let (lo, hi) = (self.x[r][f], self.x[order[i + 1]][f]);
                if lo == hi || i + 1 < min_leaf || order.len() - (i + 1) < min_leaf {
                    continue;
                }
                let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let lw: f64 = left.iter().sum();
                let rw = total_w - lw;
                let impurity = if total_w > 0.0 {
                    (lw * gini(&left) + rw * gini(&right)) / total_w
                } else {
                    0.0
                };
                let threshold = lo + (hi - lo) / 2.0;
                if best.is_none_or(|(b, _, _)| impurity < b - TIE_EPS) {
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&i| self.y[i] == first);
        if pure || depth >= self.params.max_depth {
            return self.leaf(rows, depth);
        }
        let Some((feature, threshold)) = self.best_split(rows) else {
            return self.leaf(rows, depth);
        };
        let id = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
            depth,
        });
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] < threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        if let Node::Split {
            left: ls,
            right: rs,
            ..
        } = &mut self.nodes[id]
        {
            *ls = left;
            *rs = right;
        }
        id
    }
}

impl DecisionTree {
    /// Fits a tree on `x` (rows) against `y` in `0..num_classes`.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        num_classes: usize,
        params: &TreeParams,
    ) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Contract(format!(
                "tree fit needs matching non-empty inputs ({} rows, {} labels)",
                x.len(),
                y.len()
            )));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::Contract("ragged feature matrix".into()));
        }
        if let Some(bad) = y.iter().find(|&&c| c >= num_classes) {
            return Err(Error::Contract(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        let weights = match &params.class_weights {
            Some(w) if w.len() == num_classes => w.clone(),
            Some(w) => {
                return Err(Error::Contract(format!(
                    "{} class weights for {num_classes} classes",
                    w.len()
                )))
            }
            None => vec![1.0; num_classes],
        };
        let mut builder = Builder {
            x,
            y,
            weights,
            num_classes,
            params,
            nodes: Vec::new(),
        };
        let rows: Vec<usize> = (0..x.len()).collect();
        builder.grow(&rows, 0);
        Ok(DecisionTree {
            nodes: builder.nodes,
            max_depth: params.max_depth,
            feature_count: d,
            num_classes,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { depth, .. } => *depth,
                Node::Split { depth, .. } => *depth + 1,
            })
            .max()
            .unwrap_or(0)
    }

    /// Index of the leaf reached by `x`; `x` must have `feature_count` entries.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_count {
            return Err(Error::Contract(format!(
                "tree expects {} features, got {}",
                self.feature_count,
                x.len()
            )));
        }
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { class, .. } => Ok(*class),
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let hits = x
            .iter()
            .zip(y)
            .filter(|(r, &c)| self.predict(r).ok() == Some(c))
            .count();
        hits as f64 / x.len() as f64
    }

    /// Split features in breadth-first order of first use, each with the
    /// threshold of its shallowest (then leftmost) split.
    pub fn informative_dims(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = &self.nodes[i]
            {
                if !out.iter().any(|(f, _)| f == feature) {
                    out.push((*feature, *threshold));
                }
                queue.push_back(*left);
                queue.push_back(*right);
            }
        }
        out
    }

    /// Root-to-leaf paths, left subtree first.
    pub fn paths(&self) -> Vec<LeafPath> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((i, conds)) = stack.pop() {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => out.push(LeafPath {
                    conditions: conds,
                    class: *class,
                    leaf: i,
                }),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let mut r = conds.clone();
                    r.push(Condition {
                        feature: *feature,
                        threshold: *threshold,
                        at_least: true,
                    });
                    let mut l = conds;
                    l.push(Condition {
                        feature: *feature,
                        threshold: *threshold,
                        at_least: false,
                    });
                    stack.push((*right, r));
                    stack.push((*left, l));
                }
            }
        }
        out
    }

    /// Text rendering, one line per node.
    pub fn render(&self, feature_name: &dyn Fn(usize) -> String) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize, String::new())];
        while let Some((i, indent, prefix)) = stack.pop() {
            let pad = "  ".repeat(indent);
            match &self.nodes[i] {
                Node::Leaf { class, samples, .. } => {
                    out.push_str(&format!("{pad}{prefix}class {class} ({samples} samples)\n"))
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let name = feature_name(*feature);
                    out.push_str(&format!("{pad}{prefix}split on {name} at {threshold}\n"));
                    stack.push((*right, indent + 1, format!("{name} >= {threshold}: ")));
                    stack.push((*left, indent + 1, format!("{name} < {threshold}: ")));
                }
            }
        }
        out
    }
}

/// Outcome of growing a tree depth by depth until a target accuracy.
#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: DecisionTree,
    pub depth: usize,
    pub train_accuracy: f64,
    pub reached_target: bool,
}

/// Fits trees of depth 1, 2, ... up to `max_depth`, stopping at the first
/// one whose training accuracy reaches `target`.
pub fn fit_until_accurate(
    x: &[Vec<f64>],
    y: &[usize],
    num_classes: usize,
    target: f64,
    max_depth: usize,
    min_leaf: usize,
) -> Result<GrownTree> {
    let mut last = None;
    for depth in 1..=max_depth.max(1) {
        let tree = DecisionTree::fit(
            x,
            y,
            num_classes,
            &TreeParams::new(depth).min_leaf(min_leaf),
        )?;
        let acc = tree.accuracy(x, y);
        let grown = GrownTree {
            tree,
            depth,
            train_accuracy: acc,
            reached_target: acc >= target,
        };
        if grown.reached_target {
            return Ok(grown);
        }
        last = Some(grown);
    }
    Ok(last.expect("at least one depth tried"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            vec![0, 1, 1, 0],
        )
    }

    #[test]
    fn constant_labels_give_single_leaf() {
        let t =
            DecisionTree::fit(&[vec![1.0], vec![2.0]], &[1, 1], 2, &TreeParams::new(4)).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[7.0]).unwrap(), 1);
        assert!(t.informative_dims().is_empty());
    }

    #[test]
    fn toy_threshold_is_midpoint() {
        let t =
            DecisionTree::fit(&[vec![0.1], vec![0.26]], &[0, 1], 2, &TreeParams::new(1)).unwrap();
        let dims = t.informative_dims();
        assert_eq!(dims.len(), 1);
        assert_eq!(dims[0].0, 0);
        assert!((dims[0].1 - 0.18).abs() < 1e-12);
        assert_eq!(t.predict(&[dims[0].1]).unwrap(), 1);
    }

    #[test]
    fn xor_needs_depth_two() {
        let (x, y) = xor();
        let d1 = DecisionTree::fit(&x, &y, 2, &TreeParams::new(1)).unwrap();
        assert_eq!(d1.accuracy(&x, &y), 0.5);
        let d2 = DecisionTree::fit(&x, &y, 2, &TreeParams::new(2)).unwrap();
        assert_eq!(d2.accuracy(&x, &y), 1.0);
        for (r, c) in x.iter().zip(&y) {
            assert_eq!(d2.predict(r).unwrap(), *c);
        }
    }

    #[test]
    fn shallowest_threshold_wins() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![0, 0, 1, 1, 0, 0];
        let t = DecisionTree::fit(&x, &y, 2, &TreeParams::new(3)).unwrap();
        let dims = t.informative_dims();
        assert_eq!(dims.len(), 1);
        let Node::Split { threshold, .. } = &t.nodes()[0] else {
            panic!("root should split")
        };
        assert_eq!(dims[0].1, *threshold);
        assert_eq!(t.accuracy(&x, &y), 1.0);
    }

    #[test]
    fn paths_are_exclusive() {
        let (x, y) = xor();
        let t = DecisionTree::fit(&x, &y, 2, &TreeParams::new(2)).unwrap();
        let paths = t.paths();
        assert_eq!(paths.len(), 4);
        for r in &x {
            let hits = paths
                .iter()
                .filter(|p| p.conditions.iter().all(|c| c.holds(r)))
                .count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let t = DecisionTree::fit(&x, &[0, 0, 1], 2, &TreeParams::new(3).min_leaf(2)).unwrap();
        assert_eq!(t.nodes().len(), 1);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let t = DecisionTree::fit(&[vec![0.0]], &[0], 2, &TreeParams::new(1)).unwrap();
        assert!(t.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let (x, y) = xor();
        let t = DecisionTree::fit(&x, &y, 2, &TreeParams::new(2)).unwrap();
        let back: DecisionTree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
