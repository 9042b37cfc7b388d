//! Random forest: bagged CART trees with per-node feature subsampling.

use super::tree::{class_indices, grow, DecisionTree, TreeParams};
use super::{check_arity, Classifier, Learner, Params, Proba, TrainedModel};
use crate::dataset::Dataset;
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use crate::seeds;
use rand::Rng as _;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Defaults to `ceil(sqrt(arity))`.
    pub features_per_split: Option<usize>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: None,
            max_depth: usize::MAX,
            min_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    arity: usize,
}

/// Tree `t` uses seed `derive(seed, t)`, so trees train independently and
/// in parallel with the same result as a sequential loop.
pub fn train_random_forest(d: &Dataset, params: &ForestParams, seed: u64) -> Result<RandomForest> {
    if params.n_trees == 0 {
        return config_err("random forest needs at least one tree");
    }
    if params.min_leaf == 0 {
        return config_err("min_leaf must be >= 1");
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let arity = d.arity();
    let mut mtry = params
        .features_per_split
        .unwrap_or_else(|| (arity as f64).sqrt().ceil() as usize)
        .max(1);
    if mtry > arity {
        log::warn!(
            "features_per_split {} exceeds arity {}; clamped",
            mtry,
            arity
        );
        mtry = arity;
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        features_per_split: Some(mtry),
    };
    let y = class_indices(d)?;
    let x: Vec<&[f64]> = d.rows().iter().map(|r| r.features.as_slice()).collect();
    let n = d.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng(seeds::derive(seed, t as u64));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&x, &y, rows, arity, &tree_params, Some(&mut rng))
        })
        .collect();
    Ok(RandomForest { trees, arity })
}

impl Classifier for RandomForest {
    fn arity(&self) -> usize {
        self.arity
    }

    /// Mean of the trees' probability vectors.
    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.arity, x)?;
        let mut acc = [0.0; 2];
        for t in &self.trees {
            let p = t.predict_proba(x)?;
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let k = self.trees.len() as f64;
        Ok([acc[0] / k, acc[1] / k])
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("forest");
        doc.push("arity", self.arity);
        for t in &self.trees {
            doc.push_child(t.to_document());
        }
        doc
    }
}

struct ForestLearner {
    params: ForestParams,
}

impl Learner for ForestLearner {
    fn name(&self) -> String {
        let p = &self.params;
        let mut s = format!("rf:trees={},min_leaf={}", p.n_trees, p.min_leaf);
        if let Some(m) = p.features_per_split {
            s.push_str(&format!(",mtry={}", m));
        }
        if p.max_depth != usize::MAX {
            s.push_str(&format!(",depth={}", p.max_depth));
        }
        if !p.bootstrap {
            s.push_str(",bootstrap=false");
        }
        s
    }

    fn fit(&self, d: &Dataset, seed: u64) -> Result<TrainedModel> {
        Ok(Box::new(train_random_forest(d, &self.params, seed)?))
    }
}

pub(super) fn build(mut params: Params) -> Result<Arc<dyn Learner>> {
    let defaults = ForestParams::default();
    let p = ForestParams {
        n_trees: params.take("trees")?.unwrap_or(defaults.n_trees),
        features_per_split: params.take("mtry")?,
        max_depth: params.take("depth")?.unwrap_or(defaults.max_depth),
        min_leaf: params.take("min_leaf")?.unwrap_or(defaults.min_leaf),
        bootstrap: params.take("bootstrap")?.unwrap_or(defaults.bootstrap),
    };
    params.finish()?;
    if p.n_trees == 0 || p.min_leaf == 0 {
        return config_err("rf: trees and min_leaf must be >= 1");
    }
    Ok(Arc::new(ForestLearner { params: p }))
}

pub(super) fn load(doc: &Document, _: &super::Registry) -> Result<TrainedModel> {
    doc.expect_kind("forest")?;
    let arity = doc.parse("arity")?;
    let trees = doc
        .children()
        .iter()
        .map(|c| {
            c.expect_kind("tree")?;
            DecisionTree::read_nodes(c)
        })
        .collect::<Result<Vec<_>>>()?;
    if trees.is_empty() {
        return Err(Error::Document("forest has no trees".into()));
    }
    Ok(Box::new(RandomForest { trees, arity }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticGenConfig};
    use crate::learners::tree::train_cart;

    fn data() -> Dataset {
        generate_synthetic(&SyntheticGenConfig::sensor_default(200, 0.2, 4, 2.0)).unwrap()
    }

    #[test]
    fn single_full_tree_without_bootstrap_is_cart() {
        let d = data();
        let p = ForestParams {
            n_trees: 1,
            features_per_split: Some(d.arity()),
            bootstrap: false,
            ..ForestParams::default()
        };
        let f = train_random_forest(&d, &p, 99).unwrap();
        let t = train_cart(&d, usize::MAX, 1).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn probability_is_mean_of_trees() {
        let d = data();
        let p = ForestParams {
            n_trees: 7,
            ..ForestParams::default()
        };
        let f = train_random_forest(&d, &p, 5).unwrap();
        let x = d.features(3);
        let mut mean = 0.0;
        for t in &f.trees {
            mean += t.predict_proba(x).unwrap()[0];
        }
        mean /= 7.0;
        assert!((f.predict_proba(x).unwrap()[0] - mean).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_forest() {
        let d = data();
        let p = ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        };
        assert_eq!(
            train_random_forest(&d, &p, 17).unwrap(),
            train_random_forest(&d, &p, 17).unwrap()
        );
        assert_ne!(
            train_random_forest(&d, &p, 17).unwrap(),
            train_random_forest(&d, &p, 18).unwrap()
        );
    }

    #[test]
    fn oversized_mtry_is_clamped() {
        let d = data();
        let p = ForestParams {
            n_trees: 2,
            features_per_split: Some(50),
            ..ForestParams::default()
        };
        assert!(train_random_forest(&d, &p, 1).is_ok());
    }
}
