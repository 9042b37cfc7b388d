//! Sigmoid probability calibration of SVM margins:
//! `P(normal | x) = 1 / (1 + exp(A f(x) + B))`.

use super::smo::{smo_train, SmoConfig, SvmModel};
use crate::dataset::{stratified_folds, ClassLabel, Dataset};
use crate::error::Result;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    /// Probability of the positive (+1, normal) class for margin `f`.
    pub fn prob(&self, f: f64) -> f64 {
        let z = self.a * f + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)` used in the fit.
pub fn sigmoid_targets(positive: &[bool]) -> Vec<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    positive.iter().map(|&p| if p { hi } else { lo }).collect()
}

/// Negative log-likelihood of the smoothed targets under `(a, b)`.
fn nll(dec: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    dec.iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let z = f * a + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Maximum-likelihood sigmoid by Newton's method with backtracking line
/// search.
pub fn fit_sigmoid(dec: &[f64], positive: &[bool]) -> Sigmoid {
    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const GRAD_EPS: f64 = 1e-5;

    let targets = sigmoid_targets(positive);
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = nll(dec, &targets, a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &t) in dec.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < GRAD_EPS && g2.abs() < GRAD_EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = nll(dec, &targets, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::debug!("sigmoid line search stalled");
            break;
        }
    }
    Sigmoid { a, b }
}

/// Log-likelihood of the smoothed targets under `s`, for diagnostics.
pub fn sigmoid_log_likelihood(dec: &[f64], positive: &[bool], s: Sigmoid) -> f64 {
    -nll(dec, &sigmoid_targets(positive), s.a, s.b)
}

/// An SVM with a probability mapping for its margins.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedSvm {
    pub svm: SvmModel,
    /// `None` when calibration was impossible; probabilities then come from the margin sign.
    pub sigmoid: Option<Sigmoid>,
}

impl CalibratedSvm {
    pub fn is_fallback(&self) -> bool {
        self.sigmoid.is_none()
    }

    pub fn prob_normal(&self, x: &[f64]) -> Result<f64> {
        let f = self.svm.decision_value(x)?;
        Ok(match self.sigmoid {
            Some(s) => s.prob(f),
            None => {
                if f > 0.0 {
                    1.0
                } else if f < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
        })
    }
}

/// Fits the sigmoid on out-of-fold margins: for each of `folds` stratified
/// folds of `d`, an SVM trained on the rest scores the held-out rows. The
/// returned wrapper keeps `model` (trained on all of `d`) for prediction.
pub fn calibrate_probability(
    model: SvmModel,
    d: &Dataset,
    cfg: &SmoConfig,
    folds: usize,
) -> Result<CalibratedSvm> {
    let labels = d.labels()?;
    let counts = d.class_counts()?;
    let folds = folds.min(counts[0]).min(counts[1]);
    if folds < 2 {
        log::warn!("too few rows per class for calibration folds; using sign probabilities");
        return Ok(CalibratedSvm {
            svm: model,
            sigmoid: None,
        });
    }
    let assignment = stratified_folds(&labels, folds, seeds::derive(cfg.seed, 0xCA1));
    let mut dec = Vec::with_capacity(d.len());
    let mut positive = Vec::with_capacity(d.len());
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..d.len()).filter(|&i| assignment[i] != fold).collect();
        let test_idx: Vec<usize> = (0..d.len()).filter(|&i| assignment[i] == fold).collect();
        let train = d.select(&train_idx);
        let tc = train.class_counts()?;
        if tc[0] == 0 || tc[1] == 0 {
            log::warn!("calibration fold {} lacks a class; using sign probabilities", fold);
            return Ok(CalibratedSvm {
                svm: model,
                sigmoid: None,
            });
        }
        let fold_cfg = SmoConfig {
            seed: seeds::derive(cfg.seed, fold as u64 + 1),
            ..cfg.clone()
        };
        let fold_model = smo_train(&train, &fold_cfg)?;
        for &i in &test_idx {
            dec.push(fold_model.decision_value(d.features(i))?);
            positive.push(labels[i] == ClassLabel::Normal);
        }
    }
    Ok(CalibratedSvm {
        svm: model,
        sigmoid: Some(fit_sigmoid(&dec, &positive)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_monotone_decreasing_in_z() {
        let s = Sigmoid { a: -2.0, b: 0.3 };
        let ps: Vec<f64> = [-3.0, -1.0, 0.0, 0.5, 4.0].iter().map(|&f| s.prob(f)).collect();
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
        assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn separable_margins_give_steep_negative_slope() {
        let dec = [-2.0, -1.5, -1.0, 1.0, 1.2, 2.0];
        let pos = [false, false, false, true, true, true];
        let s = fit_sigmoid(&dec, &pos);
        assert!(s.a < 0.0);
        assert!(s.prob(2.0) > 0.5 && s.prob(-2.0) < 0.5);
    }
}
