//! Classifiers behind one interface, selected by name at runtime.
//!
//! A [`Learner`] is a configured training strategy; fitting it yields a
//! [`Classifier`] (boxed as [`TrainedModel`]) that emits class probabilities
//! and serializes to a [`Document`]. The [`Registry`] maps learner names to
//! constructors and document kinds to loaders, so the CLI can pick learners
//! from strings like `rf:trees=50` and read saved models back.

pub mod forest;
pub mod mlp;
pub mod naive_bayes;
pub mod rules;
pub mod svm;
pub mod tree;

use crate::dataset::{ClassLabel, Dataset, Standardizer};
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Probabilities for (normal, failure).
pub type Proba = [f64; 2];

pub trait Classifier: Send + Sync + fmt::Debug {
    fn arity(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> Result<Proba>;

    /// Class decision; argmax of `predict_proba` unless overridden.
    fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        Ok(argmax(self.predict_proba(x)?))
    }

    fn to_document(&self) -> Document;
}

pub type TrainedModel = Box<dyn Classifier>;

pub trait Learner: Send + Sync {
    /// Canonical spec string; parsing it through a [`Registry`] rebuilds this learner.
    fn name(&self) -> String;

    fn fit(&self, d: &Dataset, seed: u64) -> Result<TrainedModel>;
}

impl fmt::Debug for dyn Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Learner({})", self.name())
    }
}

/// Ties go to normal.
pub fn argmax(p: Proba) -> ClassLabel {
    if p[1] > p[0] {
        ClassLabel::Failure
    } else {
        ClassLabel::Normal
    }
}

pub(crate) fn check_arity(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

/// Laplace-smoothed class probabilities from counts.
pub(crate) fn laplace(counts: [usize; 2]) -> Proba {
    let n = (counts[0] + counts[1]) as f64 + 2.0;
    [(counts[0] as f64 + 1.0) / n, (counts[1] as f64 + 1.0) / n]
}

pub(crate) fn counts_from_text(raw: &str) -> Result<[usize; 2]> {
    let v: Vec<usize> = raw
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Document(format!("bad count '{}'", t))))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::Document("expected two class counts".into())),
    }
}

/// Key-value parameters from a spec like `rf:trees=50,mtry=2`.
/// Values are consumed with [`Params::take`]; leftovers are reported as unknown.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    learner: String,
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn parse(learner: &str, raw: &str) -> Result<Params> {
        let mut values = BTreeMap::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("'{}' is not key=value", item)))?;
            values.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        Ok(Params {
            learner: learner.to_string(),
            values,
        })
    }

    pub fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::Config(format!("{}: bad value '{}' for '{}'", self.learner, raw, key))
            }),
        }
    }

    pub fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            None => Ok(()),
            Some(k) => config_err(format!("{}: unknown parameter '{}'", self.learner, k)),
        }
    }
}

/// Splits `name:params` into its parts.
pub fn split_spec(spec: &str) -> (&str, &str) {
    match spec.split_once(':') {
        Some((n, p)) => (n.trim(), p.trim()),
        None => (spec.trim(), ""),
    }
}

type BuildFn = fn(Params) -> Result<Arc<dyn Learner>>;
type LoadFn = fn(&Document, &Registry) -> Result<TrainedModel>;

struct LearnerEntry {
    description: &'static str,
    build: BuildFn,
}

/// Name-keyed learner constructors and kind-keyed model loaders.
pub struct Registry {
    learners: BTreeMap<String, LearnerEntry>,
    loaders: BTreeMap<String, LoadFn>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            learners: BTreeMap::new(),
            loaders: BTreeMap::new(),
        }
    }

    /// The six comparison learners plus loaders for every built-in model kind.
    pub fn with_defaults() -> Self {
        let mut r = Registry::empty();
        r.register_learner("nb", "Gaussian naive Bayes", naive_bayes::build);
        r.register_learner("tree", "CART decision tree (Gini)", tree::build);
        r.register_learner("rf", "random forest of CART trees", forest::build);
        r.register_learner("part", "separate-and-conquer rule list", rules::build);
        r.register_learner("mlp", "one-hidden-layer perceptron", mlp::build);
        r.register_learner("smo", "SMO-trained SVM with sigmoid calibration", svm::build);

        r.register_loader("nb", naive_bayes::load);
        r.register_loader("tree", tree::load);
        r.register_loader("forest", forest::load);
        r.register_loader("rules", rules::load);
        r.register_loader("mlp", mlp::load);
        r.register_loader("platt", svm::load);
        r.register_loader("scaled", load_scaled);
        r.register_loader("cost", crate::imbalance::load_cost_sensitive);
        r.register_loader("stack", crate::stacking::load_stack);
        r
    }

    pub fn register_learner(&mut self, name: &str, description: &'static str, build: BuildFn) {
        self.learners
            .insert(name.to_string(), LearnerEntry { description, build });
    }

    pub fn register_loader(&mut self, kind: &str, load: LoadFn) {
        self.loaders.insert(kind.to_string(), load);
    }

    /// `(name, description)` for every registered learner.
    pub fn learners(&self) -> impl Iterator<Item = (&str, &str)> {
        self.learners
            .iter()
            .map(|(k, e)| (k.as_str(), e.description))
    }

    /// Builds a learner from `name` or `name:key=value,...`. Stack specs
    /// (`stack:...`, `model1`..`model5`) resolve their members through this registry.
    pub fn learner(&self, spec: &str) -> Result<Arc<dyn Learner>> {
        let spec = spec.trim();
        if crate::stacking::is_stack_spec(spec) {
            let stack = crate::stacking::StackSpec::parse(spec, self)?;
            return Ok(Arc::new(stack));
        }
        let (name, raw) = split_spec(spec);
        let entry = self
            .learners
            .get(name)
            .ok_or_else(|| Error::UnknownLearner(name.to_string()))?;
        (entry.build)(Params::parse(name, raw)?)
    }

    pub fn load(&self, doc: &Document) -> Result<TrainedModel> {
        let kind = doc.kind()?;
        let load = self
            .loaders
            .get(kind)
            .ok_or_else(|| Error::Document(format!("no loader for model kind '{}'", kind)))?;
        load(doc, self)
    }

    pub fn load_text(&self, text: &str) -> Result<TrainedModel> {
        self.load(&Document::from_text(text)?)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::with_defaults()
    }
}

/// Applies a fitted standardizer before delegating.
#[derive(Debug)]
pub struct Scaled {
    pub scaler: Standardizer,
    pub inner: TrainedModel,
}

impl Classifier for Scaled {
    fn arity(&self) -> usize {
        self.scaler.mean.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.arity(), x)?;
        self.inner.predict_proba(&self.scaler.transform(x))
    }

    fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        check_arity(self.arity(), x)?;
        self.inner.predict(&self.scaler.transform(x))
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("scaled");
        doc.push_child(self.scaler.to_document());
        doc.push_child(self.inner.to_document());
        doc
    }
}

fn load_scaled(doc: &Document, registry: &Registry) -> Result<TrainedModel> {
    doc.expect_kind("scaled")?;
    Ok(Box::new(Scaled {
        scaler: Standardizer::from_document(doc.child(0)?)?,
        inner: registry.load(doc.child(1)?)?,
    }))
}

/// Fits `fit` on standardized features (statistics from `d` only) and wraps the result.
pub(crate) fn fit_scaled(
    d: &Dataset,
    fit: impl FnOnce(&Dataset) -> Result<TrainedModel>,
) -> Result<TrainedModel> {
    let scaler = Standardizer::fit(d)?;
    let inner = fit(&scaler.apply(d))?;
    Ok(Box::new(Scaled { scaler, inner }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse_and_reject_unknown() {
        let mut p = Params::parse("rf", "trees=5, mtry=2").unwrap();
        assert_eq!(p.take::<usize>("trees").unwrap(), Some(5));
        assert_eq!(p.take::<usize>("depth").unwrap(), None);
        assert!(p.clone().finish().is_err());
        assert_eq!(p.take::<usize>("mtry").unwrap(), Some(2));
        p.finish().unwrap();
        assert!(Params::parse("rf", "trees").is_err());
        assert!(Params::parse("rf", "trees=x").unwrap().take::<usize>("trees").is_err());
    }

    #[test]
    fn registry_resolves_defaults() {
        let r = Registry::with_defaults();
        for name in ["nb", "tree", "rf", "part", "mlp", "smo"] {
            let l = r.learner(name).unwrap();
            assert_eq!(split_spec(&l.name()).0, name);
        }
        assert!(matches!(r.learner("j48"), Err(Error::UnknownLearner(_))));
        assert!(r.learner("rf:bogus=1").is_err());
    }

    #[test]
    fn argmax_ties_to_normal() {
        assert_eq!(argmax([0.5, 0.5]), ClassLabel::Normal);
        assert_eq!(argmax([0.4, 0.6]), ClassLabel::Failure);
    }
}
