//! CART decision tree: greedy binary splits on Gini gain with midpoint
//! thresholds. Rows with `x[feature] <= threshold` go left.

use super::{check_arity, counts_from_text, laplace, Classifier, Learner, Params, Proba, TrainedModel};
use crate::dataset::Dataset;
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use crate::seeds::Rng;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features drawn per node; `None` means all.
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: usize::MAX,
            min_leaf: 1,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[0] as f64 / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Best split of `rows` over `features`; ties keep the earliest feature and
/// the lowest threshold. `None` when no split with positive gain respects `min_leaf`.
pub(crate) fn best_split(
    x: &[&[f64]],
    y: &[usize],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let mut total = [0usize; 2];
    for &r in rows {
        total[y[r]] += 1;
    }
    let n = rows.len() as f64;
    let parent = gini(total);
    let mut best: Option<Split> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = [0usize; 2];
        for k in 0..sorted.len() - 1 {
            left[y[sorted[k]]] += 1;
            let (v, next) = (x[sorted[k]][f], x[sorted[k + 1]][f]);
            let n_left = k + 1;
            if v == next || n_left < min_leaf || sorted.len() - n_left < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let gain = parent
                - (n_left as f64 / n) * gini(left)
                - ((sorted.len() - n_left) as f64 / n) * gini(right);
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                let mid = 0.5 * (v + next);
                // adjacent floats: the midpoint may round up onto `next`
                let threshold = if mid < next { mid } else { v };
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) fn grow(
    x: &[&[f64]],
    y: &[usize],
    rows: Vec<usize>,
    arity: usize,
    params: &TreeParams,
    mut rng: Option<&mut Rng>,
) -> DecisionTree {
    let mut nodes: Vec<TreeNode> = Vec::new();
    // (node slot, rows, depth)
    let mut work = vec![(0usize, rows, 0usize)];
    nodes.push(TreeNode::Leaf { counts: [0, 0] });
    let all_features: Vec<usize> = (0..arity).collect();
    while let Some((slot, rows, depth)) = work.pop() {
        let mut counts = [0usize; 2];
        for &r in &rows {
            counts[y[r]] += 1;
        }
        let pure = counts[0] == 0 || counts[1] == 0;
        let splittable = !pure && depth < params.max_depth && rows.len() >= 2 * params.min_leaf.max(1);
        let split = if splittable {
            let features = match (params.features_per_split, rng.as_deref_mut()) {
                (Some(k), Some(rng)) if k < arity => {
                    let mut f = rand::seq::index::sample(rng, arity, k).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => all_features.clone(),
            };
            best_split(x, y, &rows, &features, params.min_leaf.max(1))
        } else {
            None
        };
        match split {
            None => nodes[slot] = TreeNode::Leaf { counts },
            Some(s) => {
                let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| x[r][s.feature] <= s.threshold);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                let right = nodes.len();
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                nodes[slot] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
                work.push((right, r_rows, depth + 1));
                work.push((left, l_rows, depth + 1));
            }
        }
    }
    DecisionTree { nodes, arity }
}

pub(crate) fn class_indices(d: &Dataset) -> Result<Vec<usize>> {
    Ok(d.labels()?.into_iter().map(|l| l.index()).collect())
}

/// Trains a CART tree on all rows of `d`.
pub fn train_cart(d: &Dataset, max_depth: usize, min_leaf: usize) -> Result<DecisionTree> {
    let params = TreeParams {
        max_depth,
        min_leaf,
        features_per_split: None,
    };
    train_cart_with(d, &params, None)
}

pub(crate) fn train_cart_with(d: &Dataset, params: &TreeParams, rng: Option<&mut Rng>) -> Result<DecisionTree> {
    if params.min_leaf == 0 {
        return config_err("min_leaf must be >= 1");
    }
    let y = class_indices(d)?;
    let x: Vec<&[f64]> = d.rows().iter().map(|r| r.features.as_slice()).collect();
    Ok(grow(&x, &y, (0..d.len()).collect(), d.arity(), params, rng))
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            TreeNode::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_counts(&self, leaf: usize) -> [usize; 2] {
        match self.nodes[leaf] {
            TreeNode::Leaf { counts } => counts,
            TreeNode::Split { .. } => panic!("node {} is not a leaf", leaf),
        }
    }

    pub(crate) fn write_nodes(&self, doc: &mut Document) {
        doc.push("arity", self.arity);
        for n in &self.nodes {
            match n {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => doc.push("node", format!("split {} {} {} {}", feature, threshold, left, right)),
                TreeNode::Leaf { counts } => doc.push("node", format!("leaf {} {}", counts[0], counts[1])),
            }
        }
    }

    pub(crate) fn read_nodes(doc: &Document) -> Result<DecisionTree> {
        let arity: usize = doc.parse("arity")?;
        let bad = |line: &str| Error::Document(format!("bad tree node '{}'", line));
        let nodes = doc
            .get_all("node")
            .map(|line| {
                let (tag, rest) = line.split_once(' ').ok_or_else(|| bad(line))?;
                match tag {
                    "leaf" => Ok(TreeNode::Leaf {
                        counts: counts_from_text(rest)?,
                    }),
                    "split" => {
                        let t: Vec<&str> = rest.split_whitespace().collect();
                        if t.len() != 4 {
                            return Err(bad(line));
                        }
                        Ok(TreeNode::Split {
                            feature: t[0].parse().map_err(|_| bad(line))?,
                            threshold: t[1].parse().map_err(|_| bad(line))?,
                            left: t[2].parse().map_err(|_| bad(line))?,
                            right: t[3].parse().map_err(|_| bad(line))?,
                        })
                    }
                    _ => Err(bad(line)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if nodes.is_empty() {
            return Err(Error::Document("tree has no nodes".into()));
        }
        let n = nodes.len();
        for node in &nodes {
            if let TreeNode::Split {
                feature, left, right, ..
            } = node
            {
                if *left >= n || *right >= n || *feature >= arity {
                    return Err(Error::Document("tree node index out of range".into()));
                }
            }
        }
        Ok(DecisionTree { nodes, arity })
    }
}

impl Classifier for DecisionTree {
    fn arity(&self) -> usize {
        self.arity
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.arity, x)?;
        Ok(laplace(self.leaf_counts(self.leaf_of(x))))
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("tree");
        self.write_nodes(&mut doc);
        doc
    }
}

struct CartLearner {
    max_depth: Option<usize>,
    min_leaf: usize,
}

impl Learner for CartLearner {
    fn name(&self) -> String {
        match self.max_depth {
            Some(d) => format!("tree:depth={},min_leaf={}", d, self.min_leaf),
            None => format!("tree:min_leaf={}", self.min_leaf),
        }
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<TrainedModel> {
        Ok(Box::new(train_cart(d, self.max_depth.unwrap_or(usize::MAX), self.min_leaf)?))
    }
}

pub(super) fn build(mut params: Params) -> Result<Arc<dyn Learner>> {
    let max_depth = params.take("depth")?;
    let min_leaf = params.take("min_leaf")?.unwrap_or(1);
    params.finish()?;
    if min_leaf == 0 {
        return config_err("tree: min_leaf must be >= 1");
    }
    Ok(Arc::new(CartLearner { max_depth, min_leaf }))
}

pub(super) fn load(doc: &Document, _: &super::Registry) -> Result<TrainedModel> {
    doc.expect_kind("tree")?;
    Ok(Box::new(DecisionTree::read_nodes(doc)?))
}
