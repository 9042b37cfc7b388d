//! Gaussian naive Bayes.

use super::{check_arity, Classifier, Learner, Params, Proba, TrainedModel};
use crate::dataset::Dataset;
use crate::doc::Document;
use crate::error::{Error, Result};
use std::sync::Arc;

/// Relative variance floor, scaled by the feature's overall variance.
const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayes {
    pub prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

/// Per-class Gaussian (maximum-likelihood mean and variance) for every feature.
pub fn train_naive_bayes(d: &Dataset) -> Result<NaiveBayes> {
    let labels = d.labels()?;
    let counts = d.class_counts()?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::MissingClass(
            "naive Bayes needs at least one row per class".into(),
        ));
    }
    let arity = d.arity();
    let n = d.len() as f64;
    let mut mean = [vec![0.0; arity], vec![0.0; arity]];
    let mut all_mean = vec![0.0; arity];
    for (r, l) in d.rows().iter().zip(&labels) {
        for j in 0..arity {
            mean[l.index()][j] += r.features[j];
            all_mean[j] += r.features[j];
        }
    }
    for c in 0..2 {
        mean[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
    }
    all_mean.iter_mut().for_each(|m| *m /= n);

    let mut var = [vec![0.0; arity], vec![0.0; arity]];
    let mut all_var = vec![0.0; arity];
    for (r, l) in d.rows().iter().zip(&labels) {
        let c = l.index();
        for j in 0..arity {
            let dv = r.features[j] - mean[c][j];
            var[c][j] += dv * dv;
            let da = r.features[j] - all_mean[j];
            all_var[j] += da * da;
        }
    }
    for c in 0..2 {
        for j in 0..arity {
            let floor = (VAR_FLOOR * all_var[j] / n).max(1e-12);
            var[c][j] = (var[c][j] / counts[c] as f64).max(floor);
        }
    }
    Ok(NaiveBayes {
        prior: [counts[0] as f64 / n, counts[1] as f64 / n],
        mean,
        var,
    })
}

impl NaiveBayes {
    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let mut lp = self.prior[c].ln();
        for (j, &v) in x.iter().enumerate() {
            let var = self.var[c][j];
            let dv = v - self.mean[c][j];
            lp += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - dv * dv / (2.0 * var);
        }
        lp
    }
}

impl Classifier for NaiveBayes {
    fn arity(&self) -> usize {
        self.mean[0].len()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.arity(), x)?;
        let l0 = self.log_joint(0, x);
        let l1 = self.log_joint(1, x);
        let m = l0.max(l1);
        let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
        let z = e0 + e1;
        Ok([e0 / z, e1 / z])
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("nb");
        doc.push_floats("prior", &self.prior);
        for c in 0..2 {
            doc.push_floats("mean", &self.mean[c]);
            doc.push_floats("var", &self.var[c]);
        }
        doc
    }
}

struct NaiveBayesLearner;

impl Learner for NaiveBayesLearner {
    fn name(&self) -> String {
        "nb".into()
    }

    fn fit(&self, d: &Dataset, _seed: u64) -> Result<TrainedModel> {
        Ok(Box::new(train_naive_bayes(d)?))
    }
}

pub(super) fn build(params: Params) -> Result<Arc<dyn Learner>> {
    params.finish()?;
    Ok(Arc::new(NaiveBayesLearner))
}

pub(super) fn load(doc: &Document, _: &super::Registry) -> Result<TrainedModel> {
    doc.expect_kind("nb")?;
    let prior = doc.floats("prior")?;
    let means: Vec<Vec<f64>> = doc.get_all("mean").map(crate::doc::parse_floats).collect::<Result<_>>()?;
    let vars: Vec<Vec<f64>> = doc.get_all("var").map(crate::doc::parse_floats).collect::<Result<_>>()?;
    if prior.len() != 2 || means.len() != 2 || vars.len() != 2 {
        return Err(Error::Document("nb model needs two classes".into()));
    }
    let [m0, m1]: [Vec<f64>; 2] = means.try_into().unwrap();
    let [v0, v1]: [Vec<f64>; 2] = vars.try_into().unwrap();
    Ok(Box::new(NaiveBayes {
        prior: [prior[0], prior[1]],
        mean: [m0, m1],
        var: [v0, v1],
    }))
}
