//! Diagonal-covariance Gaussian mixtures fitted by expectation maximization,
//! and cluster-based labeling of unlabeled rows.

use crate::dataset::{ClassLabel, Dataset};
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use crate::seeds;
use rand::Rng as _;
use rayon::prelude::*;

/// Relative variance floor, scaled by each column's variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Components whose total responsibility falls below this are re-seeded.
pub const MIN_COMPONENT_MASS: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Log-likelihood after initialization and after every iteration. Restarts
    /// when a component is re-seeded.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub reseeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub seed: u64,
    /// Stop when `|dL| / |L|` drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            k: 2,
            seed: 0,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Per-row component posteriors; each row sums to 1.
pub type Responsibilities = Vec<Vec<f64>>;

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl GaussianMixtureModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn arity(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// `log(pi_k) + log N(x; mu_k, diag(var_k))` for every component.
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|c| {
                let mut lp = self.weights[c].ln();
                for ((v, m), s2) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                    let dv = v - m;
                    lp -= 0.5 * (LN_2PI + s2.ln() + dv * dv / s2);
                }
                lp
            })
            .collect()
    }

    fn check(&self, d: &Dataset) -> Result<()> {
        if d.arity() != self.arity() {
            return Err(Error::Shape {
                expected: self.arity(),
                found: d.arity(),
            });
        }
        Ok(())
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::new("gmm");
        doc.push("k", self.k());
        doc.push_floats("weights", &self.weights);
        for c in 0..self.k() {
            doc.push_floats("mean", &self.means[c]);
            doc.push_floats("var", &self.variances[c]);
        }
        doc.push_floats("trace", &self.loglik_trace);
        doc.push("converged", self.converged);
        doc.push("iterations", self.iterations);
        doc.push("reseeds", self.reseeds);
        doc
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        doc.expect_kind("gmm")?;
        let k: usize = doc.parse("k")?;
        let weights = doc.floats("weights")?;
        let means: Vec<Vec<f64>> = doc.get_all("mean").map(crate::doc::parse_floats).collect::<Result<_>>()?;
        let variances: Vec<Vec<f64>> = doc.get_all("var").map(crate::doc::parse_floats).collect::<Result<_>>()?;
        if weights.len() != k || means.len() != k || variances.len() != k {
            return Err(Error::Document(format!("gmm declares {} components", k)));
        }
        let arity = means.first().map_or(0, Vec::len);
        if means.iter().chain(&variances).any(|v| v.len() != arity) {
            return Err(Error::Document("gmm component arity mismatch".into()));
        }
        Ok(GaussianMixtureModel {
            weights,
            means,
            variances,
            loglik_trace: doc.floats("trace")?,
            converged: doc.parse("converged")?,
            iterations: doc.parse("iterations")?,
            reseeds: doc.parse("reseeds")?,
        })
    }
}

/// E-step: responsibilities and the total log-likelihood, rows in input order.
pub fn responsibilities(m: &GaussianMixtureModel, d: &Dataset) -> Result<(Responsibilities, f64)> {
    m.check(d)?;
    let rows: Vec<(Vec<f64>, f64)> = d
        .rows()
        .par_iter()
        .map(|r| {
            let mut lj = m.log_joint(&r.features);
            let lse = log_sum_exp(&lj);
            lj.iter_mut().for_each(|v| *v = (*v - lse).exp());
            (lj, lse)
        })
        .collect();
    // sequential sum keeps the result independent of scheduling
    let loglik = rows.iter().map(|(_, l)| l).sum();
    Ok((rows.into_iter().map(|(r, _)| r).collect(), loglik))
}

pub fn em_loglik(m: &GaussianMixtureModel, d: &Dataset) -> Result<f64> {
    m.check(d)?;
    Ok(d.rows().iter().map(|r| log_sum_exp(&m.log_joint(&r.features))).sum())
}

fn column_moments(d: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let n = d.len() as f64;
    let p = d.arity();
    let mut mean = vec![0.0; p];
    for r in d.rows() {
        for j in 0..p {
            mean[j] += r.features[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for r in d.rows() {
        for j in 0..p {
            let dv = r.features[j] - mean[j];
            var[j] += dv * dv;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

/// K distinct rows: a seeded first pick, then repeatedly the row farthest
/// (variance-scaled distance) from all picks so far; ties go to the lower index.
fn farthest_point_rows(d: &Dataset, k: usize, scale: &[f64], rng: &mut seeds::Rng) -> Vec<usize> {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(scale)
            .map(|((x, y), s)| (x - y) * (x - y) / s)
            .sum()
    };
    let n = d.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist(d.features(i), d.features(chosen[0]))).collect();
    while chosen.len() < k {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let next = best.expect("k <= row count");
        chosen.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist(d.features(i), d.features(next)));
        }
    }
    chosen
}

/// Fits a K-component diagonal Gaussian mixture to the features of `d`
/// (labels, if any, are ignored).
pub fn em_fit(d: &Dataset, k: usize, seed: u64, tol: f64, max_iter: usize) -> Result<GaussianMixtureModel> {
    if k == 0 {
        return config_err("EM needs at least one component");
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k > d.len() {
        return config_err(format!("EM with {} components needs at least {} rows, got {}", k, k, d.len()));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return config_err("EM tol must be positive and max_iter >= 1");
    }
    let n = d.len();
    let p = d.arity();
    let (_, col_var) = column_moments(d);
    let floor: Vec<f64> = col_var.iter().map(|v| (VARIANCE_FLOOR * v).max(1e-12)).collect();
    let scale: Vec<f64> = col_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
    let mut rng = seeds::rng(seed);
    let starts = farthest_point_rows(d, k, &scale, &mut rng);
    let mut m = GaussianMixtureModel {
        weights: vec![1.0 / k as f64; k],
        means: starts.iter().map(|&i| d.features(i).to_vec()).collect(),
        variances: vec![scale.clone(); k],
        loglik_trace: Vec::new(),
        converged: false,
        iterations: 0,
        reseeds: 0,
    };
    let (mut resp, mut loglik) = responsibilities(&m, d)?;
    m.loglik_trace.push(loglik);

    for _ in 0..max_iter {
        // M-step
        let mut mass = vec![0.0; k];
        let mut sums = vec![vec![0.0; p]; k];
        for (i, r) in resp.iter().enumerate() {
            let x = d.features(i);
            for c in 0..k {
                mass[c] += r[c];
                for j in 0..p {
                    sums[c][j] += r[c] * x[j];
                }
            }
        }
        let mut reseeded = false;
        for c in 0..k {
            if mass[c] < MIN_COMPONENT_MASS {
                let row = rng.random_range(0..n);
                log::warn!("EM component {} collapsed; re-seeded at row {}", c, row);
                m.means[c] = d.features(row).to_vec();
                m.variances[c] = scale.clone();
                m.weights[c] = 1.0 / k as f64;
                reseeded = true;
                continue;
            }
            m.weights[c] = mass[c] / n as f64;
            for j in 0..p {
                m.means[c][j] = sums[c][j] / mass[c];
            }
            let mut sq = vec![0.0; p];
            for (i, r) in resp.iter().enumerate() {
                let x = d.features(i);
                for j in 0..p {
                    let dv = x[j] - m.means[c][j];
                    sq[j] += r[c] * dv * dv;
                }
            }
            for j in 0..p {
                m.variances[c][j] = (sq[j] / mass[c]).max(floor[j]);
            }
        }
        if reseeded {
            let total: f64 = m.weights.iter().sum();
            m.weights.iter_mut().for_each(|w| *w /= total);
            m.reseeds += 1;
        }
        m.iterations += 1;

        // E-step under the new parameters
        let prev = loglik;
        (resp, loglik) = responsibilities(&m, d)?;
        if reseeded {
            m.loglik_trace.clear();
            m.loglik_trace.push(loglik);
            continue;
        }
        m.loglik_trace.push(loglik);
        if ((loglik - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < tol {
            m.converged = true;
            break;
        }
    }
    if !m.converged {
        log::warn!("EM reached {} iterations without converging", max_iter);
    }
    Ok(m)
}

/// Component index per row by maximum responsibility; ties go to the lower index.
pub fn em_assign(m: &GaussianMixtureModel, d: &Dataset) -> Result<Vec<usize>> {
    let (resp, _) = responsibilities(m, d)?;
    Ok(resp
        .iter()
        .map(|r| {
            let mut best = 0;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Which component is called normal: the one with the larger mixture
/// weight, component 0 on a tie.
pub fn normal_component(m: &GaussianMixtureModel) -> usize {
    if m.weights[1] > m.weights[0] {
        1
    } else {
        0
    }
}

/// Labels each row of `d` by its most responsible component, naming the
/// heavier component normal and the other failure. Existing labels are replaced.
pub fn em_assign_labels(m: &GaussianMixtureModel, d: &Dataset) -> Result<Dataset> {
    if m.k() != 2 {
        return config_err(format!("labeling needs a 2-component mixture, got {}", m.k()));
    }
    let normal = normal_component(m);
    let labels: Vec<ClassLabel> = em_assign(m, d)?
        .into_iter()
        .map(|c| if c == normal { ClassLabel::Normal } else { ClassLabel::Failure })
        .collect();
    d.with_labels(&labels)
}
