//! Sequential Minimal Optimization for the two-class SVM dual:
//!
//! ```text
//! maximize   W(a) = sum_i a_i - 1/2 sum_ij y_i y_j k(x_i, x_j) a_i a_j
//! subject to 0 <= a_i <= C,  sum_i y_i a_i = 0
//! ```
//!
//! Each step optimizes two multipliers analytically along the segment cut
//! from the box by the equality constraint. Pair selection follows Platt's
//! two-loop heuristic. Decision function: `f(x) = sum_i a_i y_i k(x_i, x) + b`.

use super::cache::KernelCache;
use super::kernel::KernelSpec;
use crate::dataset::{ClassLabel, Dataset};
use crate::doc::{join_floats, parse_floats, Document};
use crate::error::{config_err, Error, Result};
use crate::seeds::{self, Rng};
use rand::Rng as _;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoConfig {
    /// Box constraint.
    pub c: f64,
    /// KKT violation tolerance on the margin `y f(x) - 1`.
    pub kkt_tol: f64,
    /// Minimum relative multiplier change for a step to count as progress.
    pub eps: f64,
    pub kernel: KernelSpec,
    /// Cap on outer-loop sweeps; the solver returns a flagged model past it.
    pub max_passes: usize,
    pub seed: u64,
    pub cache_bytes: usize,
}

impl SmoConfig {
    pub fn new(kernel: KernelSpec) -> Self {
        SmoConfig {
            c: 1.0,
            kkt_tol: 1e-3,
            // 1e-3 rejects so many small steps on overlapping classes that
            // the partner search dominates; results are unchanged at 1e-5
            eps: 1e-5,
            kernel,
            max_passes: 10_000,
            seed: 0,
            cache_bytes: 64 << 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return config_err("C must be positive");
        }
        if !(self.kkt_tol > 0.0) {
            return config_err("kkt_tol must be positive");
        }
        if !(self.eps > 0.0) {
            return config_err("eps must be positive");
        }
        if self.max_passes == 0 {
            return config_err("max_passes must be >= 1");
        }
        self.kernel.validate()
    }
}

/// Working state of one SMO run. Errors `E_i = f(x_i) - y_i` are cached only
/// for non-bound multipliers; bound ones are recomputed on demand.
pub struct SolverState {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    b: f64,
    c: f64,
    eps: f64,
    kkt_tol: f64,
    kernel: KernelSpec,
    errors: Vec<f64>,
    cache: KernelCache,
    rng: Rng,
    steps: u64,
}

impl std::fmt::Debug for SolverState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverState")
            .field("n", &self.x.len())
            .field("b", &self.b)
            .field("steps", &self.steps)
            .finish()
    }
}

impl SolverState {
    /// Starts from `a = 0`, `b = 0`. Targets must be +1/-1.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, cfg: &SmoConfig) -> Result<Self> {
        cfg.validate()?;
        if x.len() != y.len() {
            return config_err("feature and target counts differ");
        }
        if y.iter().any(|&t| t != 1.0 && t != -1.0) {
            return config_err("targets must be +1 or -1");
        }
        if !(y.contains(&1.0) && y.contains(&-1.0)) {
            return Err(Error::MissingClass("SMO needs both classes".into()));
        }
        let n = x.len();
        Ok(SolverState {
            cache: KernelCache::new(cfg.cache_bytes, n),
            errors: y.iter().map(|t| -t).collect(),
            alpha: vec![0.0; n],
            b: 0.0,
            c: cfg.c,
            eps: cfg.eps,
            kkt_tol: cfg.kkt_tol,
            kernel: cfg.kernel,
            rng: seeds::rng(cfg.seed),
            steps: 0,
            x,
            y,
        })
    }

    pub fn from_dataset(d: &Dataset, cfg: &SmoConfig) -> Result<Self> {
        let y = d.labels()?.into_iter().map(ClassLabel::sign).collect();
        let x = d.rows().iter().map(|r| r.features.clone()).collect();
        SolverState::new(x, y, cfg)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn bias(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    #[inline]
    fn non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        let (x, kernel) = (&self.x, self.kernel);
        self.cache
            .get_or_insert_with(i, || x.iter().map(|z| kernel.eval(&x[i], z)).collect())
    }

    fn output(&self, i: usize) -> f64 {
        let cached = self.cache.peek(i);
        let mut f = self.b;
        for (j, &a) in self.alpha.iter().enumerate() {
            if a > 0.0 {
                let k = match cached {
                    Some(row) => row[j],
                    None => self.kernel.eval(&self.x[j], &self.x[i]),
                };
                f += a * self.y[j] * k;
            }
        }
        f
    }

    /// `E_i = f(x_i) - y_i`, from the cache for non-bound points.
    pub fn error(&self, i: usize) -> f64 {
        if self.non_bound(i) {
            self.errors[i]
        } else {
            self.output(i) - self.y[i]
        }
    }

    /// Largest gap between cached errors and a fresh evaluation.
    pub fn error_cache_drift(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.non_bound(i))
            .map(|i| (self.errors[i] - (self.output(i) - self.y[i])).abs())
            .fold(0.0, f64::max)
    }

    /// `|sum_i a_i y_i|`.
    pub fn equality_residual(&self) -> f64 {
        self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum::<f64>().abs()
    }

    /// W(a) by direct evaluation over the nonzero multipliers.
    pub fn dual_objective(&self) -> f64 {
        let sv: Vec<usize> = (0..self.len()).filter(|&i| self.alpha[i] > 0.0).collect();
        let mut quad = 0.0;
        for &i in &sv {
            for &j in &sv {
                quad += self.alpha[i]
                    * self.alpha[j]
                    * self.y[i]
                    * self.y[j]
                    * self.kernel.eval(&self.x[i], &self.x[j]);
            }
        }
        sv.iter().map(|&i| self.alpha[i]).sum::<f64>() - 0.5 * quad
    }

    /// Jointly optimizes multipliers `i1` and `i2`. Returns false when the pair
    /// cannot make progress (degenerate segment or a step below `eps`).
    pub fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let c = self.c;
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let s = y1 * y2;
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if lo >= hi {
            return false;
        }
        let e1 = self.error(i1);
        let e2 = self.error(i2);
        let row1 = self.row(i1);
        let row2 = self.row(i2);
        let (k11, k12, k22) = (row1[i1], row1[i2], row2[i2]);
        let eta = k11 + k22 - 2.0 * k12;

        let a2_new = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // W gain of moving a2 by t along the segment; convex here, so an endpoint wins
            let gain = |t: f64| t * y2 * (e1 - e2) - 0.5 * eta * t * t;
            let (g_lo, g_hi) = (gain(lo - a2), gain(hi - a2));
            if g_lo > g_hi + self.eps {
                lo
            } else if g_hi > g_lo + self.eps {
                hi
            } else {
                a2
            }
        };
        // lo and hi carry rounding residue; a multiplier a hair inside a bound
        // would pass for free and pin b
        let snap = |a: f64| {
            if a < 1e-12 * c {
                0.0
            } else if a > c - 1e-12 * c {
                c
            } else {
                a
            }
        };
        let a2_new = snap(a2_new);
        if (a2_new - a2).abs() < self.eps * (a2_new + a2 + self.eps) {
            return false;
        }
        let a1_new = snap(a1 + s * (a2 - a2_new));

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let b_new = if a1_new > 0.0 && a1_new < c {
            b1
        } else if a2_new > 0.0 && a2_new < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - self.b;

        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        self.b = b_new;
        for j in 0..self.len() {
            if !self.non_bound(j) {
                continue;
            }
            let base = if j == i1 {
                e1
            } else if j == i2 {
                e2
            } else {
                self.errors[j]
            };
            self.errors[j] = base + d1 * row1[j] + d2 * row2[j] + db;
        }
        self.steps += 1;
        true
    }

    /// Checks `i2` against the KKT conditions and, if it violates them, looks
    /// for a partner: the non-bound point maximizing `|E1 - E2|`, then every
    /// non-bound point, then every point (each loop from a seeded random start).
    pub fn examine_example(&mut self, i2: usize) -> bool {
        self.examine_observed(i2, &mut |_| {})
    }

    fn examine_observed(&mut self, i2: usize, observer: &mut dyn FnMut(&SolverState)) -> bool {
        let (y2, a2) = (self.y[i2], self.alpha[i2]);
        let e2 = self.error(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.kkt_tol && a2 < self.c) || (r2 > self.kkt_tol && a2 > 0.0);
        if !violates {
            return false;
        }
        let mut step = |state: &mut SolverState, i1: usize| {
            if state.take_step(i1, i2) {
                observer(state);
                true
            } else {
                false
            }
        };

        let non_bound: Vec<usize> = (0..self.len()).filter(|&i| self.non_bound(i)).collect();
        if non_bound.len() > 1 {
            let mut best = non_bound[0];
            let mut gap = -1.0;
            for &i in &non_bound {
                let g = (self.errors[i] - e2).abs();
                if g > gap {
                    gap = g;
                    best = i;
                }
            }
            if step(self, best) {
                return true;
            }
        }
        if !non_bound.is_empty() {
            let start = self.rng.random_range(0..non_bound.len());
            for k in 0..non_bound.len() {
                if step(self, non_bound[(start + k) % non_bound.len()]) {
                    return true;
                }
            }
        }
        let n = self.len();
        let start = self.rng.random_range(0..n);
        for k in 0..n {
            if step(self, (start + k) % n) {
                return true;
            }
        }
        false
    }

    /// With every multiplier at 0 or C the optimum leaves `b` free within an
    /// interval, and the pairwise updates may land outside it. Moves `b` to
    /// the nearest value satisfying every KKT condition; true if it moved.
    fn settle_bias(&mut self) -> bool {
        if (0..self.len()).any(|i| self.non_bound(i)) {
            return false;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..self.len() {
            let g = self.output(i) - self.b;
            // a = 0 needs y f >= 1, a = C needs y f <= 1
            let bound = self.y[i] - g;
            if (self.alpha[i] == 0.0) == (self.y[i] > 0.0) {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
        if lo > hi {
            return false;
        }
        let b = self.b.clamp(lo, hi);
        let moved = b != self.b;
        self.b = b;
        moved
    }

    /// Outer loop: alternate full sweeps and non-bound sweeps until a full
    /// sweep changes nothing. `observer` sees the state after every
    /// successful step. Returns (converged, sweeps).
    pub fn run(
        &mut self,
        max_passes: usize,
        observer: &mut dyn FnMut(&SolverState),
    ) -> (bool, usize) {
        let mut examine_all = true;
        let mut changed = 0usize;
        let mut sweeps = 0usize;
        while changed > 0 || examine_all {
            if sweeps >= max_passes {
                return (false, sweeps);
            }
            sweeps += 1;
            changed = 0;
            for i in 0..self.len() {
                if (examine_all || self.non_bound(i)) && self.examine_observed(i, observer) {
                    changed += 1;
                }
            }
            if examine_all {
                if changed == 0 && self.settle_bias() {
                    continue;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
        (true, sweeps)
    }

    pub fn into_model(self, converged: bool, sweeps: usize) -> SvmModel {
        let dual_objective = self.dual_objective();
        let support = (0..self.len())
            .filter(|&i| self.alpha[i] > 0.0)
            .map(|i| SupportVector {
                index: i,
                alpha: self.alpha[i],
                y: self.y[i],
                x: self.x[i].clone(),
            })
            .collect();
        SvmModel {
            kernel: self.kernel,
            c: self.c,
            b: self.b,
            arity: self.x.first().map_or(0, Vec::len),
            support,
            dual_objective,
            converged,
            sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector {
    /// Row position in the training set.
    pub index: usize,
    pub alpha: f64,
    pub y: f64,
    pub x: Vec<f64>,
}

/// A trained two-class SVM. Only multipliers with `a_i > 0` are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub c: f64,
    pub b: f64,
    pub arity: usize,
    pub support: Vec<SupportVector>,
    pub dual_objective: f64,
    pub converged: bool,
    pub sweeps: usize,
}

/// Trains an SVM on a labeled dataset (normal = +1, failure = -1).
pub fn smo_train(d: &Dataset, cfg: &SmoConfig) -> Result<SvmModel> {
    smo_train_observed(d, cfg, &mut |_| {})
}

pub fn smo_train_observed(
    d: &Dataset,
    cfg: &SmoConfig,
    observer: &mut dyn FnMut(&SolverState),
) -> Result<SvmModel> {
    let mut state = SolverState::from_dataset(d, cfg)?;
    let (converged, sweeps) = state.run(cfg.max_passes, observer);
    if !converged {
        log::warn!(
            "SMO stopped after {} sweeps without converging ({} rows)",
            sweeps,
            state.len()
        );
    }
    Ok(state.into_model(converged, sweeps))
}

impl SvmModel {
    /// `f(x) = sum_i a_i y_i k(x_i, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity {
            return Err(Error::Shape {
                expected: self.arity,
                found: x.len(),
            });
        }
        Ok(self.support.iter().fold(self.b, |acc, sv| {
            acc + sv.alpha * sv.y * self.kernel.eval(&sv.x, x)
        }))
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::new("svm");
        doc.push("kernel", self.kernel);
        doc.push("c", self.c);
        doc.push("b", self.b);
        doc.push("arity", self.arity);
        doc.push("dual_objective", self.dual_objective);
        doc.push("converged", self.converged);
        doc.push("sweeps", self.sweeps);
        for sv in &self.support {
            doc.push(
                "sv",
                format!("{} {} {} {}", sv.index, sv.alpha, sv.y, join_floats(&sv.x)),
            );
        }
        doc
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        doc.expect_kind("svm")?;
        let arity: usize = doc.parse("arity")?;
        let support = doc
            .get_all("sv")
            .map(|line| {
                let (index, rest) = line
                    .split_once(' ')
                    .ok_or_else(|| Error::Document("bad sv line".into()))?;
                let index = index
                    .parse()
                    .map_err(|_| Error::Document("bad sv index".into()))?;
                let vals = parse_floats(rest)?;
                if vals.len() != arity + 2 {
                    return Err(Error::Document("sv line has wrong arity".into()));
                }
                Ok(SupportVector {
                    index,
                    alpha: vals[0],
                    y: vals[1],
                    x: vals[2..].to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SvmModel {
            kernel: doc.get("kernel")?.parse()?,
            c: doc.parse("c")?,
            b: doc.parse("b")?,
            arity,
            support,
            dual_objective: doc.parse("dual_objective")?,
            converged: doc.parse("converged")?,
            sweeps: doc.parse("sweeps")?,
        })
    }
}

/// Violation counts for the three multiplier cases:
/// `a = 0 => y f >= 1`, `0 < a < C => y f = 1`, `a = C => y f <= 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KktReport {
    pub at_zero: usize,
    pub free: usize,
    pub at_bound: usize,
}

impl KktReport {
    pub fn total(&self) -> usize {
        self.at_zero + self.free + self.at_bound
    }
}

/// Checks every training row against the KKT conditions with slack `tol`.
/// `d` must be the dataset the model was trained on, in the same row order.
pub fn kkt_report(m: &SvmModel, d: &Dataset, tol: f64) -> Result<KktReport> {
    let labels = d.labels()?;
    let mut alpha = vec![0.0; d.len()];
    for sv in &m.support {
        if sv.index >= d.len() {
            return config_err("support vector index outside the dataset");
        }
        alpha[sv.index] = sv.alpha;
    }
    let mut report = KktReport::default();
    for (i, label) in labels.iter().enumerate() {
        let margin = label.sign() * m.decision_value(d.features(i))?;
        let a = alpha[i];
        if a <= 0.0 {
            if margin < 1.0 - tol {
                report.at_zero += 1;
            }
        } else if a >= m.c {
            if margin > 1.0 + tol {
                report.at_bound += 1;
            }
        } else if (margin - 1.0).abs() > tol {
            report.free += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> Dataset {
        Dataset::from_rows(
            vec![vec![1.0], vec![-1.0]],
            vec![ClassLabel::Normal, ClassLabel::Failure],
        )
        .unwrap()
    }

    #[test]
    fn analytic_two_point_solution() {
        let m = smo_train(&two_points(), &SmoConfig::new(KernelSpec::Linear)).unwrap();
        let mut alphas: Vec<f64> = m.support.iter().map(|s| s.alpha).collect();
        alphas.sort_by(f64::total_cmp);
        assert!((alphas[0] - 0.5).abs() < 1e-12 && (alphas[1] - 0.5).abs() < 1e-12);
        assert!(m.b.abs() < 1e-12);
        assert!((m.dual_objective - 0.5).abs() < 1e-12);
        assert!((m.decision_value(&[2.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(m.converged);
    }

    #[test]
    fn one_examine_reaches_two_point_optimum() {
        let cfg = SmoConfig::new(KernelSpec::Linear);
        let mut st = SolverState::from_dataset(&two_points(), &cfg).unwrap();
        assert!(st.examine_example(0));
        assert_eq!(st.alphas(), &[0.5, 0.5]);
        assert!((st.dual_objective() - 0.5).abs() < 1e-15);
        // already optimal: neither point violates KKT any more
        assert!(!st.examine_example(0));
        assert!(!st.examine_example(1));
    }

    #[test]
    fn degenerate_segment_is_no_progress() {
        // equal labels with both multipliers at zero: L = H = 0
        let d = Dataset::from_rows(
            vec![vec![1.0], vec![2.0], vec![-1.0]],
            vec![ClassLabel::Normal, ClassLabel::Normal, ClassLabel::Failure],
        )
        .unwrap();
        let mut st = SolverState::from_dataset(&d, &SmoConfig::new(KernelSpec::Linear)).unwrap();
        assert!(!st.take_step(0, 1));
        assert_eq!(st.alphas(), &[0.0, 0.0, 0.0]);
        assert_eq!(st.bias(), 0.0);
        assert!(!st.take_step(1, 1));
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::from_rows(vec![vec![1.0], vec![2.0]], vec![ClassLabel::Normal; 2]).unwrap();
        assert!(matches!(
            smo_train(&d, &SmoConfig::new(KernelSpec::Linear)),
            Err(Error::MissingClass(_))
        ));
    }

    #[test]
    fn decision_value_arity_checked() {
        let m = smo_train(&two_points(), &SmoConfig::new(KernelSpec::Linear)).unwrap();
        assert!(matches!(
            m.decision_value(&[1.0, 2.0]),
            Err(Error::Shape {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn rbf_far_point_decays_to_bias() {
        let d = Dataset::from_rows(
            vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![3.0, 3.0], vec![2.5, 3.5]],
            vec![
                ClassLabel::Normal,
                ClassLabel::Normal,
                ClassLabel::Failure,
                ClassLabel::Failure,
            ],
        )
        .unwrap();
        let m = smo_train(&d, &SmoConfig::new(KernelSpec::Rbf { gamma: 0.5 })).unwrap();
        assert!((m.decision_value(&[1e3, -1e3]).unwrap() - m.b).abs() < 1e-12);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let d = Dataset::from_rows(
            vec![vec![0.1, 0.7], vec![0.3, -0.2], vec![-0.4, 0.9], vec![1.1, 0.05]],
            vec![
                ClassLabel::Normal,
                ClassLabel::Failure,
                ClassLabel::Normal,
                ClassLabel::Failure,
            ],
        )
        .unwrap();
        let m = smo_train(&d, &SmoConfig::new(KernelSpec::Rbf { gamma: 0.7 })).unwrap();
        let text = m.to_document().to_text();
        let back = SvmModel::from_document(&Document::from_text(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn kkt_infinite_tol_is_clean() {
        let m = smo_train(&two_points(), &SmoConfig::new(KernelSpec::Linear)).unwrap();
        let mut perturbed = m.clone();
        perturbed.b += 3.0;
        assert_eq!(kkt_report(&perturbed, &two_points(), f64::INFINITY).unwrap().total(), 0);
        assert_eq!(kkt_report(&m, &two_points(), 1e-3).unwrap().total(), 0);
        assert!(kkt_report(&perturbed, &two_points(), 1e-3).unwrap().total() > 0);
    }
}
