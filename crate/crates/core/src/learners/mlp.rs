//! Multilayer perceptron: one sigmoid hidden layer, softmax output,
//! cross-entropy loss, trained by gradient descent with momentum.

use super::{check_arity, fit_scaled, Classifier, Learner, Params, Proba, TrainedModel};
use crate::dataset::Dataset;
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use crate::seeds;
use rand::seq::SliceRandom;
use rand::Rng as _;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// `None` picks `ceil((features + 2) / 2)`.
    pub hidden: Option<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: None,
            learning_rate: 0.3,
            momentum: 0.2,
            epochs: 200,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == Some(0) {
            return config_err("mlp: hidden width must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return config_err("mlp: learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return config_err("mlp: momentum must be in [0, 1)");
        }
        if self.epochs == 0 {
            return config_err("mlp: epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return config_err("mlp: batch size must be >= 1");
        }
        Ok(())
    }
}

/// Network weights in one flat vector:
/// hidden weights (`hidden x inputs`, row-major), hidden biases,
/// output weights (`2 x hidden`), output biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    params: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        hidden * inputs + hidden + 2 * hidden + 2
    }

    pub fn new(inputs: usize, hidden: usize, params: Vec<f64>) -> Result<Mlp> {
        let expected = Mlp::param_count(inputs, hidden);
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                found: params.len(),
            });
        }
        Ok(Mlp {
            inputs,
            hidden,
            params,
        })
    }

    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn random(inputs: usize, hidden: usize, rng: &mut seeds::Rng) -> Mlp {
        let mut params = vec![0.0; Mlp::param_count(inputs, hidden)];
        let r1 = 1.0 / (inputs.max(1) as f64).sqrt();
        for w in &mut params[..hidden * inputs] {
            *w = rng.random_range(-r1..r1);
        }
        let r2 = 1.0 / (hidden as f64).sqrt();
        let o = hidden * inputs + hidden;
        for w in &mut params[o..o + 2 * hidden] {
            *w = rng.random_range(-r2..r2);
        }
        Mlp {
            inputs,
            hidden,
            params,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        (b1, w2, w2 + 2 * self.hidden)
    }

    /// Hidden activations and output probabilities.
    fn forward(&self, x: &[f64], h: &mut [f64]) -> Proba {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &p[j * self.inputs..(j + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[b1 + j];
            *hj = sigmoid(z);
        }
        let mut z = [p[b2], p[b2 + 1]];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &p[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
            *zk += row.iter().zip(h.iter()).map(|(w, v)| w * v).sum::<f64>();
        }
        let m = z[0].max(z[1]);
        let (e0, e1) = ((z[0] - m).exp(), (z[1] - m).exp());
        [e0 / (e0 + e1), e1 / (e0 + e1)]
    }

    /// Mean cross-entropy over the rows.
    pub fn loss(&self, x: &[&[f64]], y: &[usize]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        let mut total = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let p = self.forward(xi, &mut h);
            total -= p[yi].max(f64::MIN_POSITIVE).ln();
        }
        total / x.len() as f64
    }

    /// Gradient of [`Mlp::loss`] by backpropagation.
    pub fn gradient(&self, x: &[&[f64]], y: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_gradient(x, y, &mut g);
        g
    }

    fn accumulate_gradient(&self, x: &[&[f64]], y: &[usize], g: &mut [f64]) -> f64 {
        g.iter_mut().for_each(|v| *v = 0.0);
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let mut h = vec![0.0; self.hidden];
        let mut loss = 0.0;
        let scale = 1.0 / x.len() as f64;
        for (xi, &yi) in x.iter().zip(y) {
            let prob = self.forward(xi, &mut h);
            loss -= prob[yi].max(f64::MIN_POSITIVE).ln();
            let dz = [
                (prob[0] - if yi == 0 { 1.0 } else { 0.0 }) * scale,
                (prob[1] - if yi == 1 { 1.0 } else { 0.0 }) * scale,
            ];
            for k in 0..2 {
                g[b2 + k] += dz[k];
                for j in 0..self.hidden {
                    g[w2 + k * self.hidden + j] += dz[k] * h[j];
                }
            }
            for j in 0..self.hidden {
                let back = dz[0] * p[w2 + j] + dz[1] * p[w2 + self.hidden + j];
                let dh = back * h[j] * (1.0 - h[j]);
                g[b1 + j] += dh;
                for (i, v) in xi.iter().enumerate() {
                    g[j * self.inputs + i] += dh * v;
                }
            }
        }
        loss * scale
    }
}

pub fn train_mlp(d: &Dataset, cfg: &MlpConfig) -> Result<Mlp> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let y = super::tree::class_indices(d)?;
    let x: Vec<&[f64]> = d.rows().iter().map(|r| r.features.as_slice()).collect();
    let hidden = cfg.hidden.unwrap_or((d.arity() + 2).div_ceil(2));
    let mut rng = seeds::rng(cfg.seed);
    let mut net = Mlp::random(d.arity(), hidden, &mut rng);
    let mut order: Vec<usize> = (0..d.len()).collect();
    let mut grad = vec![0.0; net.params.len()];
    let mut velocity = vec![0.0; net.params.len()];
    let mut bx: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut by: Vec<usize> = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.push(x[i]);
                by.push(y[i]);
            }
            epoch_loss += net.accumulate_gradient(&bx, &by, &mut grad) * batch.len() as f64;
            for ((w, v), g) in net.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *w += *v;
            }
        }
        if !epoch_loss.is_finite() || net.params.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged(format!(
                "mlp loss became non-finite in epoch {}; lower the learning rate",
                epoch + 1
            )));
        }
    }
    Ok(net)
}

impl Classifier for Mlp {
    fn arity(&self) -> usize {
        self.inputs
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.inputs, x)?;
        let mut h = vec![0.0; self.hidden];
        Ok(self.forward(x, &mut h))
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("mlp");
        doc.push("inputs", self.inputs);
        doc.push("hidden", self.hidden);
        doc.push_floats("params", &self.params);
        doc
    }
}

struct MlpLearner {
    cfg: MlpConfig,
}

impl Learner for MlpLearner {
    fn name(&self) -> String {
        let c = &self.cfg;
        let mut s = format!(
            "mlp:lr={},momentum={},epochs={},batch={}",
            c.learning_rate, c.momentum, c.epochs, c.batch_size
        );
        if let Some(h) = c.hidden {
            s.push_str(&format!(",hidden={}", h));
        }
        s
    }

    fn fit(&self, d: &Dataset, seed: u64) -> Result<TrainedModel> {
        let cfg = MlpConfig {
            seed,
            ..self.cfg.clone()
        };
        fit_scaled(d, |s| Ok(Box::new(train_mlp(s, &cfg)?)))
    }
}

pub(super) fn build(mut params: Params) -> Result<Arc<dyn Learner>> {
    let dflt = MlpConfig::default();
    let cfg = MlpConfig {
        hidden: params.take("hidden")?,
        learning_rate: params.take("lr")?.unwrap_or(dflt.learning_rate),
        momentum: params.take("momentum")?.unwrap_or(dflt.momentum),
        epochs: params.take("epochs")?.unwrap_or(dflt.epochs),
        batch_size: params.take("batch")?.unwrap_or(dflt.batch_size),
        seed: 0,
    };
    params.finish()?;
    cfg.validate()?;
    Ok(Arc::new(MlpLearner { cfg }))
}

pub(super) fn load(doc: &Document, _: &super::Registry) -> Result<TrainedModel> {
    doc.expect_kind("mlp")?;
    Ok(Box::new(Mlp::new(
        doc.parse("inputs")?,
        doc.parse("hidden")?,
        doc.floats("params")?,
    )?))
}
