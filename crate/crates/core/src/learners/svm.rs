//! SMO-trained SVM exposed as a probability classifier.

use super::{check_arity, fit_scaled, Classifier, Learner, Params, Proba, TrainedModel};
use crate::dataset::Dataset;
use crate::doc::Document;
use crate::error::{config_err, Result};
use crate::svm::{calibrate_probability, smo_train, CalibratedSvm, KernelSpec, Sigmoid, SmoConfig, SvmModel};
use std::sync::Arc;

impl Classifier for CalibratedSvm {
    fn arity(&self) -> usize {
        self.svm.arity
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        check_arity(self.svm.arity, x)?;
        let p = self.prob_normal(x)?;
        Ok([p, 1.0 - p])
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("platt");
        match self.sigmoid {
            Some(s) => {
                doc.push("a", s.a);
                doc.push("b", s.b);
            }
            None => doc.push("fallback", true),
        }
        doc.push_child(self.svm.to_document());
        doc
    }
}

/// Kernel choice before the feature count is known.
#[derive(Debug, Clone, Copy, PartialEq)]
enum KernelChoice {
    Linear,
    /// `None`: gamma = 1 / feature count.
    Rbf(Option<f64>),
    Poly {
        gamma: Option<f64>,
        degree: u32,
        coef0: f64,
    },
}

impl KernelChoice {
    fn resolve(self, arity: usize) -> KernelSpec {
        let auto = 1.0 / arity.max(1) as f64;
        match self {
            KernelChoice::Linear => KernelSpec::Linear,
            KernelChoice::Rbf(g) => KernelSpec::Rbf {
                gamma: g.unwrap_or(auto),
            },
            KernelChoice::Poly {
                gamma,
                degree,
                coef0,
            } => KernelSpec::Polynomial {
                gamma: gamma.unwrap_or(auto),
                degree,
                coef0,
            },
        }
    }
}

/// Standardize, train with SMO, then calibrate on out-of-fold margins.
#[derive(Debug, Clone)]
pub struct SmoLearner {
    kernel: KernelChoice,
    template: SmoConfig,
    calibration_folds: usize,
}

impl Default for SmoLearner {
    fn default() -> Self {
        SmoLearner {
            kernel: KernelChoice::Rbf(None),
            template: SmoConfig::new(KernelSpec::Linear),
            calibration_folds: 3,
        }
    }
}

impl SmoLearner {
    pub fn config_for(&self, arity: usize, seed: u64) -> SmoConfig {
        SmoConfig {
            kernel: self.kernel.resolve(arity),
            seed,
            ..self.template.clone()
        }
    }

    pub fn fit_calibrated(&self, d: &Dataset, seed: u64) -> Result<CalibratedSvm> {
        let cfg = self.config_for(d.arity(), seed);
        cfg.validate()?;
        let model = smo_train(d, &cfg)?;
        calibrate_probability(model, d, &cfg, self.calibration_folds)
    }
}

impl Learner for SmoLearner {
    fn name(&self) -> String {
        let t = &self.template;
        let kernel = match self.kernel {
            KernelChoice::Linear => "kernel=linear".to_string(),
            KernelChoice::Rbf(None) => "kernel=rbf".to_string(),
            KernelChoice::Rbf(Some(g)) => format!("kernel=rbf,gamma={}", g),
            KernelChoice::Poly {
                gamma,
                degree,
                coef0,
            } => {
                let mut s = format!("kernel=poly,degree={},coef0={}", degree, coef0);
                if let Some(g) = gamma {
                    s.push_str(&format!(",gamma={}", g));
                }
                s
            }
        };
        format!(
            "smo:c={},{},tol={},eps={},max_passes={},calib_folds={}",
            t.c, kernel, t.kkt_tol, t.eps, t.max_passes, self.calibration_folds
        )
    }

    fn fit(&self, d: &Dataset, seed: u64) -> Result<TrainedModel> {
        fit_scaled(d, |s| Ok(Box::new(self.fit_calibrated(s, seed)?)))
    }
}

pub(super) fn build(mut params: Params) -> Result<Arc<dyn Learner>> {
    let mut l = SmoLearner::default();
    let t = &mut l.template;
    if let Some(c) = params.take("c")? {
        t.c = c;
    }
    if let Some(v) = params.take("tol")? {
        t.kkt_tol = v;
    }
    if let Some(v) = params.take("eps")? {
        t.eps = v;
    }
    if let Some(v) = params.take("max_passes")? {
        t.max_passes = v;
    }
    if let Some(mb) = params.take::<usize>("cache_mb")? {
        t.cache_bytes = mb << 20;
    }
    if let Some(f) = params.take("calib_folds")? {
        l.calibration_folds = f;
    }
    let gamma: Option<f64> = params.take("gamma")?;
    let kind: String = params.take("kernel")?.unwrap_or_else(|| "rbf".into());
    l.kernel = match kind.as_str() {
        "linear" => KernelChoice::Linear,
        "rbf" => KernelChoice::Rbf(gamma),
        "poly" | "polynomial" => KernelChoice::Poly {
            gamma,
            degree: params.take("degree")?.unwrap_or(3),
            coef0: params.take("coef0")?.unwrap_or(0.0),
        },
        other => return config_err(format!("smo: unknown kernel '{}'", other)),
    };
    params.finish()?;
    l.template.validate()?;
    l.kernel.resolve(1).validate()?;
    Ok(Arc::new(l))
}

pub(super) fn load(doc: &Document, _: &super::Registry) -> Result<TrainedModel> {
    doc.expect_kind("platt")?;
    let svm = SvmModel::from_document(doc.child(0)?)?;
    let sigmoid = if doc.get_opt("fallback").is_some() {
        None
    } else {
        Some(Sigmoid {
            a: doc.parse("a")?,
            b: doc.parse("b")?,
        })
    };
    Ok(Box::new(CalibratedSvm { svm, sigmoid }))
}
