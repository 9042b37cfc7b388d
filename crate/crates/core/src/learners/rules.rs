//! Ordered rule list learned by separate-and-conquer over partial trees.
//!
//! Each round grows a shallow CART tree on the rows not yet covered, turns
//! the leaf covering the most rows into a rule (the conjunction of its path
//! tests), and removes the rows it covers. A final default rule predicts the
//! class distribution of whatever remains.

use super::tree::{class_indices, grow, DecisionTree, TreeNode, TreeParams};
use super::{check_arity, counts_from_text, laplace, Classifier, Learner, Params, Proba, TrainedModel};
use crate::dataset::Dataset;
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub feature: usize,
    /// true: `x <= threshold`; false: `x > threshold`.
    pub at_most: bool,
    pub threshold: f64,
}

impl Condition {
    fn holds(&self, x: &[f64]) -> bool {
        (x[self.feature] <= self.threshold) == self.at_most
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub counts: [usize; 2],
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleList {
    pub rules: Vec<Rule>,
    pub default_counts: [usize; 2],
    arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleParams {
    /// Depth of each partial tree.
    pub depth: usize,
    pub min_leaf: usize,
    pub max_rules: usize,
}

impl Default for RuleParams {
    fn default() -> Self {
        RuleParams {
            depth: 3,
            min_leaf: 2,
            max_rules: 64,
        }
    }
}

fn path_to(tree: &DecisionTree, target: usize) -> Vec<Condition> {
    // parent links from the node arena
    let nodes = tree.nodes();
    let mut parent = vec![None; nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        if let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } = *n
        {
            parent[left] = Some((i, Condition { feature, at_most: true, threshold }));
            parent[right] = Some((i, Condition { feature, at_most: false, threshold }));
        }
    }
    let mut conds = Vec::new();
    let mut at = target;
    while let Some((p, c)) = parent[at] {
        conds.push(c);
        at = p;
    }
    conds.reverse();
    conds
}

pub fn train_rule_list(d: &Dataset, params: &RuleParams) -> Result<RuleList> {
    if params.min_leaf == 0 || params.depth == 0 {
        return config_err("rule list: depth and min_leaf must be >= 1");
    }
    let y = class_indices(d)?;
    let x: Vec<&[f64]> = d.rows().iter().map(|r| r.features.as_slice()).collect();
    let tree_params = TreeParams {
        max_depth: params.depth,
        min_leaf: params.min_leaf,
        features_per_split: None,
    };
    let mut remaining: Vec<usize> = (0..d.len()).collect();
    let mut rules = Vec::new();
    while !remaining.is_empty() && rules.len() < params.max_rules {
        let tree = grow(&x, &y, remaining.clone(), d.arity(), &tree_params, None);
        if tree.nodes().len() == 1 {
            break;
        }
        // leaf covering the most rows; earliest leaf on ties
        let (leaf, counts) = tree
            .nodes()
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                TreeNode::Leaf { counts } => Some((i, *counts)),
                _ => None,
            })
            .fold(None, |best: Option<(usize, [usize; 2])>, (i, c)| match best {
                Some((_, bc)) if bc[0] + bc[1] >= c[0] + c[1] => best,
                _ => Some((i, c)),
            })
            .expect("tree has leaves");
        remaining.retain(|&r| tree.leaf_of(x[r]) != leaf);
        rules.push(Rule {
            conditions: path_to(&tree, leaf),
            counts,
        });
    }
    let source = if remaining.is_empty() {
        (0..d.len()).collect()
    } else {
        remaining
    };
    let mut default_counts = [0usize; 2];
    for r in source {
        default_counts[y[r]] += 1;
    }
    Ok(RuleList {
        rules,
        default_counts,
        arity: d.arity(),
    })
}

impl RuleList {
    /// Index of the first matching rule, `None` for the default rule.
    pub fn matching_rule(&self, x: &[f64]) -> Option<usize> {
        self.rules.iter().position(|r| r.matches(x))
    }
}

impl Classifier for RuleList {
    fn arity(&self) -> usize {
        self.arity
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.arity, x)?;
        Ok(laplace(match self.matching_rule(x) {
            Some(i) => self.rules[i].counts,
            None => self.default_counts,
        }))
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("rules");
        doc.push("arity", self.arity);
        for r in &self.rules {
            let mut line = format!("{} {}", r.counts[0], r.counts[1]);
            for c in &r.conditions {
                let op = if c.at_most { "<=" } else { ">" };
                line.push_str(&format!(" {} {} {}", c.feature, op, c.threshold));
            }
            doc.push("rule", line);
        }
        doc.push("default", format!("{} {}", self.default_counts[0], self.default_counts[1]));
        doc
    }
}

fn parse_rule(line: &str, arity: usize) -> Result<Rule> {
    let bad = || Error::Document(format!("bad rule '{}'", line));
    let t: Vec<&str> = line.split_whitespace().collect();
    if t.len() < 2 || (t.len() - 2) % 3 != 0 {
        return Err(bad());
    }
    let counts = counts_from_text(&format!("{} {}", t[0], t[1]))?;
    let conditions = t[2..]
        .chunks(3)
        .map(|c| {
            let feature: usize = c[0].parse().map_err(|_| bad())?;
            if feature >= arity {
                return Err(bad());
            }
            let at_most = match c[1] {
                "<=" => true,
                ">" => false,
                _ => return Err(bad()),
            };
            Ok(Condition {
                feature,
                at_most,
                threshold: c[2].parse().map_err(|_| bad())?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Rule { conditions, counts })
}

struct RuleListLearner {
    params: RuleParams,
}

impl Learner for RuleListLearner {
    fn name(&self) -> String {
        let p = &self.params;
        format!("part:depth={},min_leaf={},max_rules={}", p.depth, p.min_leaf, p.max_rules)
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<TrainedModel> {
        Ok(Box::new(train_rule_list(d, &self.params)?))
    }
}

pub(super) fn build(mut params: Params) -> Result<Arc<dyn Learner>> {
    let dflt = RuleParams::default();
    let p = RuleParams {
        depth: params.take("depth")?.unwrap_or(dflt.depth),
        min_leaf: params.take("min_leaf")?.unwrap_or(dflt.min_leaf),
        max_rules: params.take("max_rules")?.unwrap_or(dflt.max_rules),
    };
    params.finish()?;
    if p.depth == 0 || p.min_leaf == 0 {
        return config_err("part: depth and min_leaf must be >= 1");
    }
    Ok(Arc::new(RuleListLearner { params: p }))
}

pub(super) fn load(doc: &Document, _: &super::Registry) -> Result<TrainedModel> {
    doc.expect_kind("rules")?;
    let arity = doc.parse("arity")?;
    let rules = doc
        .get_all("rule")
        .map(|l| parse_rule(l, arity))
        .collect::<Result<_>>()?;
    Ok(Box::new(RuleList {
        rules,
        default_counts: counts_from_text(doc.get("default")?)?,
        arity,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel::{Failure, Normal};
    use crate::dataset::{generate_synthetic, SyntheticGenConfig};

    #[test]
    fn single_class_gives_default_only() {
        let d = Dataset::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]], vec![Normal; 3]).unwrap();
        let rl = train_rule_list(&d, &RuleParams::default()).unwrap();
        assert!(rl.rules.is_empty());
        assert_eq!(rl.default_counts, [3, 0]);
    }

    #[test]
    fn rules_are_total_and_beat_majority() {
        let d = generate_synthetic(&SyntheticGenConfig::sensor_default(300, 0.2, 8, 1.5)).unwrap();
        let rl = train_rule_list(&d, &RuleParams::default()).unwrap();
        assert!(!rl.rules.is_empty());
        let labels = d.labels().unwrap();
        let correct = (0..d.len())
            .filter(|&i| rl.predict(d.features(i)).unwrap() == labels[i])
            .count();
        let counts = d.class_counts().unwrap();
        assert!(correct >= counts[0].max(counts[1]));
    }

    #[test]
    fn separable_data_single_rule() {
        let d = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0]],
            vec![Normal, Normal, Normal, Failure, Failure],
        )
        .unwrap();
        let rl = train_rule_list(&d, &RuleParams::default()).unwrap();
        assert_eq!(rl.rules.len(), 1);
        assert_eq!(rl.predict(&[0.5]).unwrap(), Normal);
        assert_eq!(rl.predict(&[10.5]).unwrap(), Failure);
    }

    #[test]
    fn document_round_trip() {
        let d = generate_synthetic(&SyntheticGenConfig::sensor_default(120, 0.3, 2, 1.0)).unwrap();
        let rl = train_rule_list(&d, &RuleParams::default()).unwrap();
        let back = load(
            &Document::from_text(&rl.to_document().to_text()).unwrap(),
            &super::super::Registry::empty(),
        )
        .unwrap();
        for i in 0..d.len() {
            assert_eq!(back.predict_proba(d.features(i)).unwrap(), rl.predict_proba(d.features(i)).unwrap());
        }
    }
}
