//! Stacked generalization: base classifiers' out-of-fold class probabilities
//! become the training rows of a meta classifier.

use crate::dataset::{stratified_folds, Column, Dataset, Instance};
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use crate::learners::{check_arity, split_spec, Classifier, Learner, Proba, Registry, TrainedModel};
use crate::seeds;
use rayon::prelude::*;
use std::sync::Arc;

/// Named presets: (name, base learners). All use [`DEFAULT_META`].
pub const PRESETS: [(&str, &[&str]); 5] = [
    ("model1", &["tree", "mlp"]),
    ("model2", &["rf", "nb"]),
    ("model3", &["part", "mlp", "nb"]),
    ("model4", &["rf", "part"]),
    ("model5", &["rf", "nb", "mlp"]),
];

pub const DEFAULT_FOLDS: usize = 5;

/// Meta learner unless a spec names another. Linear, because an rbf
/// machine's margins flatten to its bias far from the support vectors, and
/// standardized probability features put much of the data there.
pub const DEFAULT_META: &str = "smo:kernel=linear";

pub fn is_stack_spec(spec: &str) -> bool {
    let spec = spec.trim();
    spec == "stack" || spec.starts_with("stack:") || PRESETS.iter().any(|(n, _)| *n == spec)
}

#[derive(Clone)]
pub struct StackSpec {
    pub bases: Vec<Arc<dyn Learner>>,
    pub meta: Arc<dyn Learner>,
    pub folds: usize,
    preset: Option<&'static str>,
}

impl std::fmt::Debug for StackSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "StackSpec({})", self.name())
    }
}

impl StackSpec {
    pub fn new(bases: Vec<Arc<dyn Learner>>, meta: Arc<dyn Learner>, folds: usize) -> Result<StackSpec> {
        if bases.is_empty() {
            return config_err("a stack needs at least one base learner");
        }
        if folds < 2 {
            return config_err("a stack needs at least 2 folds");
        }
        Ok(StackSpec {
            bases,
            meta,
            folds,
            preset: None,
        })
    }

    /// `model1`..`model5`, or `stack:meta=smo;base=part,mlp,nb;folds=5`
    /// (`meta` defaults to [`DEFAULT_META`]).
    /// Base learners are given by name and use their defaults; the meta
    /// learner may carry parameters (`meta=smo:c=2,kernel=linear`).
    pub fn parse(spec: &str, registry: &Registry) -> Result<StackSpec> {
        let spec = spec.trim();
        if let Some((name, bases)) = PRESETS.iter().find(|(n, _)| *n == spec) {
            let bases = bases.iter().map(|b| registry.learner(b)).collect::<Result<_>>()?;
            let mut s = StackSpec::new(bases, registry.learner(DEFAULT_META)?, DEFAULT_FOLDS)?;
            s.preset = Some(name);
            return Ok(s);
        }
        let body = match spec.strip_prefix("stack") {
            Some(rest) => rest.strip_prefix(':').unwrap_or(rest),
            None => return config_err(format!("'{}' is not a stack spec", spec)),
        };
        let mut meta = DEFAULT_META.to_string();
        let mut bases: Option<Vec<String>> = None;
        let mut folds = DEFAULT_FOLDS;
        for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("stack: '{}' is not key=value", part)))?;
            match k.trim() {
                "meta" => meta = v.trim().to_string(),
                "base" => bases = Some(v.split(',').map(|b| b.trim().to_string()).collect()),
                "folds" => {
                    folds = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("stack: bad folds '{}'", v.trim())))?
                }
                other => return config_err(format!("stack: unknown key '{}'", other)),
            }
        }
        let bases = bases.ok_or_else(|| Error::Config("stack: missing base=...".into()))?;
        if is_stack_spec(&meta) || bases.iter().any(|b| is_stack_spec(b)) {
            return config_err("stacks cannot be nested");
        }
        let bases = bases
            .iter()
            .map(|b| {
                if split_spec(b).1.is_empty() {
                    registry.learner(b)
                } else {
                    config_err(format!("stack: base '{}' must be a bare learner name", b))
                }
            })
            .collect::<Result<_>>()?;
        StackSpec::new(bases, registry.learner(&meta)?, folds)
    }

    fn base_names(&self) -> Vec<String> {
        self.bases.iter().map(|b| split_spec(&b.name()).0.to_string()).collect()
    }
}

/// Level-one training data plus the fold each row was held out in.
#[derive(Debug, Clone)]
pub struct MetaFeatures {
    pub data: Dataset,
    pub fold_of: Vec<usize>,
    pub folds: usize,
}

fn base_seed(seed: u64, base: usize) -> u64 {
    seeds::derive(seed, base as u64 + 1)
}

fn meta_schema(names: &[String]) -> Vec<Column> {
    names
        .iter()
        .enumerate()
        .flat_map(|(t, n)| {
            [
                Column::new(&format!("{}{}_p_normal", n, t), None),
                Column::new(&format!("{}{}_p_failure", n, t), None),
            ]
        })
        .collect()
}

/// Out-of-fold class probabilities from every base learner: each row's
/// features come from base models trained on the other folds only.
pub fn build_meta_features(d: &Dataset, spec: &StackSpec, seed: u64) -> Result<MetaFeatures> {
    let labels = d.labels()?;
    let counts = d.class_counts()?;
    let smallest = counts[0].min(counts[1]);
    if smallest < 2 {
        return Err(Error::MissingClass("stacking needs at least 2 rows of each class".into()));
    }
    let mut folds = spec.folds;
    if smallest < folds {
        log::warn!("smallest class has {} rows; using {} folds instead of {}", smallest, smallest, folds);
        folds = smallest;
    }
    let fold_of = stratified_folds(&labels, folds, seeds::derive(seed, 0x57AC));
    let t = spec.bases.len();
    let mut features = vec![vec![0.0; 2 * t]; d.len()];
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..d.len()).filter(|&i| fold_of[i] != fold).collect();
        let held_out: Vec<usize> = (0..d.len()).filter(|&i| fold_of[i] == fold).collect();
        let train = d.select(&train_idx);
        let models: Vec<TrainedModel> = spec
            .bases
            .par_iter()
            .enumerate()
            .map(|(b, l)| l.fit(&train, seeds::derive(base_seed(seed, b), fold as u64)))
            .collect::<Result<_>>()?;
        for &i in &held_out {
            for (b, m) in models.iter().enumerate() {
                let p = m.predict_proba(d.features(i))?;
                features[i][2 * b] = p[0];
                features[i][2 * b + 1] = p[1];
            }
        }
    }
    let rows = d
        .rows()
        .iter()
        .zip(features)
        .map(|(r, f)| Instance::new(r.id, f, r.label))
        .collect();
    Ok(MetaFeatures {
        data: Dataset::new(meta_schema(&spec.base_names()), rows, true)?,
        fold_of,
        folds,
    })
}

/// Base models refit on all of the training data, plus the meta model.
#[derive(Debug)]
pub struct StackedModel {
    pub names: Vec<String>,
    pub bases: Vec<TrainedModel>,
    pub meta: TrainedModel,
}

pub fn train_stack(d: &Dataset, spec: &StackSpec, seed: u64) -> Result<StackedModel> {
    let level_one = build_meta_features(d, spec, seed)?;
    let meta = spec.meta.fit(&level_one.data, seeds::derive(seed, 0x3E7A))?;
    let bases = spec
        .bases
        .par_iter()
        .enumerate()
        .map(|(b, l)| l.fit(d, seeds::derive(base_seed(seed, b), u64::MAX)))
        .collect::<Result<_>>()?;
    Ok(StackedModel {
        names: spec.base_names(),
        bases,
        meta,
    })
}

impl StackedModel {
    /// Concatenated base probability vectors, in base order.
    pub fn meta_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_arity(self.arity(), x)?;
        let mut row = Vec::with_capacity(2 * self.bases.len());
        for b in &self.bases {
            row.extend(b.predict_proba(x)?);
        }
        Ok(row)
    }
}

impl Classifier for StackedModel {
    fn arity(&self) -> usize {
        self.bases[0].arity()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        self.meta.predict_proba(&self.meta_row(x)?)
    }

    fn predict(&self, x: &[f64]) -> Result<crate::dataset::ClassLabel> {
        self.meta.predict(&self.meta_row(x)?)
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("stack");
        doc.push("bases", self.names.join(" "));
        for b in &self.bases {
            doc.push_child(b.to_document());
        }
        doc.push_child(self.meta.to_document());
        doc
    }
}

pub(crate) fn load_stack(doc: &Document, registry: &Registry) -> Result<TrainedModel> {
    doc.expect_kind("stack")?;
    let names: Vec<String> = doc.get("bases")?.split_whitespace().map(String::from).collect();
    let children = doc.children();
    if names.is_empty() || children.len() != names.len() + 1 {
        return Err(Error::Document("stack needs one child per base plus the meta model".into()));
    }
    let bases: Vec<TrainedModel> = children[..names.len()]
        .iter()
        .map(|c| registry.load(c))
        .collect::<Result<_>>()?;
    let arity = bases[0].arity();
    if bases.iter().any(|b| b.arity() != arity) {
        return Err(Error::Document("stack base models disagree on arity".into()));
    }
    let meta = registry.load(&children[names.len()])?;
    Ok(Box::new(StackedModel { names, bases, meta }))
}

impl Learner for StackSpec {
    fn name(&self) -> String {
        match self.preset {
            Some(p) => p.to_string(),
            None => format!(
                "stack:meta={};base={};folds={}",
                self.meta.name(),
                self.base_names().join(","),
                self.folds
            ),
        }
    }

    fn fit(&self, d: &Dataset, seed: u64) -> Result<TrainedModel> {
        Ok(Box::new(train_stack(d, self, seed)?))
    }
}
