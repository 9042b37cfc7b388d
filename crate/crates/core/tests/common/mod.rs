//! Brute-force reference implementations shared by the integration tests.
//! Each one is written from the definition, not from the library code.

#![allow(dead_code)]

use rand::Rng;
use rigline::dataset::{ClassLabel, Dataset};
use rigline::seeds;

pub fn kernel_linear(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

pub fn kernel_rbf(gamma: f64, x: &[f64], z: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
    (-gamma * d2).exp()
}

/// Dual objective `sum a - 1/2 sum_ij a_i a_j y_i y_j K_ij`.
pub fn dual_value(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let mut quad = 0.0;
    for i in 0..alpha.len() {
        for j in 0..alpha.len() {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximum of the dual over the feasible set by grid search, refined by
/// repeatedly zooming in on the best grid point. The last multiplier is
/// fixed by the equality constraint. Returns a feasible lower bound on
/// the true optimum.
pub fn qp_grid_optimum(y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let n = y.len();
    let free = n - 1;
    let complete = |a: &[f64]| -> Option<Vec<f64>> {
        let s: f64 = a.iter().zip(y).map(|(a, y)| a * y).sum();
        let last = -y[n - 1] * s;
        if !(-1e-12..=c + 1e-12).contains(&last) {
            return None;
        }
        let mut full = a.to_vec();
        full.push(last.clamp(0.0, c));
        Some(full)
    };
    let mut lo = vec![0.0; free];
    let mut hi = vec![c; free];
    let mut best = 0.0; // a = 0 is feasible
    let mut best_at = vec![0.0; free];
    for level in 0..8 {
        let steps = if level == 0 { 40 } else { 16 };
        let mut idx = vec![0usize; free];
        loop {
            let a: Vec<f64> = (0..free)
                .map(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / steps as f64)
                .collect();
            if let Some(full) = complete(&a) {
                let w = dual_value(&full, y, k);
                if w > best {
                    best = w;
                    best_at = a;
                }
            }
            let mut d = 0;
            while d < free {
                idx[d] += 1;
                if idx[d] <= steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == free {
                break;
            }
        }
        for d in 0..free {
            let width = (hi[d] - lo[d]) / steps as f64 * 2.0;
            lo[d] = (best_at[d] - width).max(0.0);
            hi[d] = (best_at[d] + width).min(c);
        }
    }
    best
}

/// AUC by comparing every positive with every negative; ties count one half.
pub fn pairwise_auc(scores: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for p in scores.iter().filter(|s| s.1) {
        for n in scores.iter().filter(|s| !s.1) {
            pairs += 1.0;
            if p.0 > n.0 {
                wins += 1.0;
            } else if p.0 == n.0 {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Weighted Gini impurity of a binary partition, from the definition.
pub fn split_impurity(x: &[Vec<f64>], y: &[usize], feature: usize, threshold: f64) -> f64 {
    let impurity = |side: &[usize]| {
        if side.is_empty() {
            return 0.0;
        }
        let n = side.len() as f64;
        let p0 = side.iter().filter(|&&c| c == 0).count() as f64 / n;
        1.0 - p0 * p0 - (1.0 - p0) * (1.0 - p0)
    };
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (row, &c) in x.iter().zip(y) {
        if row[feature] <= threshold {
            left.push(c);
        } else {
            right.push(c);
        }
    }
    let n = y.len() as f64;
    left.len() as f64 / n * impurity(&left) + right.len() as f64 / n * impurity(&right)
}

/// Every (feature, midpoint threshold) candidate with its weighted impurity,
/// in feature order then ascending threshold.
pub fn all_splits(x: &[Vec<f64>], y: &[usize]) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            out.push((f, t, split_impurity(x, y, f, t)));
        }
    }
    out
}

pub fn gini_of(y: &[usize]) -> f64 {
    let n = y.len() as f64;
    let p0 = y.iter().filter(|&&c| c == 0).count() as f64 / n;
    1.0 - p0 * p0 - (1.0 - p0) * (1.0 - p0)
}

/// Log-likelihood of a diagonal Gaussian mixture by direct summation.
pub fn mixture_loglik(weights: &[f64], means: &[Vec<f64>], vars: &[Vec<f64>], rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .map(|x| {
            let mut p = 0.0;
            for c in 0..weights.len() {
                let mut dens = weights[c];
                for j in 0..x.len() {
                    let v = vars[c][j];
                    dens *= (-(x[j] - means[c][j]).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                }
                p += dens;
            }
            p.ln()
        })
        .sum()
}

/// Central differences of `f` around `params`.
pub fn numeric_gradient(params: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a| + |b|, tiny)` over whole vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()) + norm(&mut b.iter().copied());
    diff / scale.max(1e-300)
}

/// Distance of `s` from the segment line through `p` and `q`, after
/// projecting: returns (t, residual).
pub fn colinearity(p: &[f64], q: &[f64], s: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = p.iter().zip(q).map(|(a, b)| b - a).collect();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let t = if dd == 0.0 {
        0.0
    } else {
        s.iter().zip(p).zip(&d).map(|((s, p), d)| (s - p) * d).sum::<f64>() / dd
    };
    let residual = s
        .iter()
        .zip(p)
        .zip(&d)
        .map(|((s, p), d)| (s - p - t * d).abs())
        .fold(0.0, f64::max);
    (t, residual)
}

/// Random labeled dataset with both classes present.
pub fn random_dataset(rng: &mut seeds::Rng, n: usize, p: usize) -> Dataset {
    assert!(n >= 2);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut y: Vec<ClassLabel> = (0..n)
        .map(|_| if rng.random_bool(0.5) { ClassLabel::Normal } else { ClassLabel::Failure })
        .collect();
    y[0] = ClassLabel::Normal;
    y[1] = ClassLabel::Failure;
    Dataset::from_rows(x, y).unwrap()
}
