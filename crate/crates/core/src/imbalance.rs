//! Class-imbalance treatments: SMOTE oversampling, random undersampling and
//! minimum-expected-cost prediction.

use crate::dataset::{ClassLabel, Dataset, Instance, Standardizer};
use crate::doc::Document;
use crate::error::{config_err, Error, Result};
use crate::learners::{check_arity, Classifier, Proba, Registry, TrainedModel};
use crate::seeds;
use rand::Rng as _;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority count ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return config_err("smote: k must be >= 1");
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return config_err("smote: ratio must be in (0, 1]");
        }
        Ok(())
    }
}

/// How one synthetic row was made: `base + gap * (neighbor - base)`,
/// with `base` and `neighbor` indices into the input dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

/// (minority, majority) classes; ties name failure the minority.
fn minority_majority(counts: [usize; 2]) -> Result<(ClassLabel, ClassLabel)> {
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::MissingClass("resampling needs rows of both classes".into()));
    }
    Ok(if counts[0] < counts[1] {
        (ClassLabel::Normal, ClassLabel::Failure)
    } else {
        (ClassLabel::Failure, ClassLabel::Normal)
    })
}

/// The `k` nearest minority rows of each minority row (squared Euclidean
/// distance on standardized features; ties by row index).
fn neighbor_table(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d2 = points[i]
                        .iter()
                        .zip(&points[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d2, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversamples the minority class. The input rows come first, unchanged,
/// followed by the synthetic rows; the second value records how each
/// synthetic row was built.
pub fn smote_with_origins(d: &Dataset, cfg: &SmoteConfig) -> Result<(Dataset, Vec<SmoteOrigin>)> {
    cfg.validate()?;
    let labels = d.labels()?;
    let counts = d.class_counts()?;
    let (minority, majority) = minority_majority(counts)?;
    let n_min = counts[minority.index()];
    if n_min <= cfg.k_neighbors {
        return config_err(format!(
            "smote: minority class has {} rows, needs more than k = {}",
            n_min, cfg.k_neighbors
        ));
    }
    let target = (cfg.target_ratio * counts[majority.index()] as f64).round() as usize;
    let needed = target.saturating_sub(n_min);
    if needed == 0 {
        return Ok((d.clone(), Vec::new()));
    }
    let members: Vec<usize> = (0..d.len()).filter(|&i| labels[i] == minority).collect();
    let scaler = Standardizer::fit(d)?;
    let scaled: Vec<Vec<f64>> = members.iter().map(|&i| scaler.transform(d.features(i))).collect();
    let neighbors = neighbor_table(&scaled, cfg.k_neighbors);

    let mut rng = seeds::rng(cfg.seed);
    let mut next_id = d.max_id().map_or(0, |m| m + 1);
    let mut extra = Vec::with_capacity(needed);
    let mut origins = Vec::with_capacity(needed);
    for _ in 0..needed {
        let a = rng.random_range(0..members.len());
        let b = neighbors[a][rng.random_range(0..cfg.k_neighbors)];
        let gap: f64 = rng.random();
        let (p, q) = (d.features(members[a]), d.features(members[b]));
        let features = p.iter().zip(q).map(|(x, y)| x + gap * (y - x)).collect();
        extra.push(Instance::new(next_id, features, Some(minority)));
        next_id += 1;
        origins.push(SmoteOrigin {
            base: members[a],
            neighbor: members[b],
            gap,
        });
    }
    Ok((d.extended(extra)?, origins))
}

pub fn smote(d: &Dataset, cfg: &SmoteConfig) -> Result<Dataset> {
    Ok(smote_with_origins(d, cfg)?.0)
}

/// Removes majority rows uniformly at random until both classes have the
/// minority count. Surviving rows keep their original order.
pub fn undersample(d: &Dataset, seed: u64) -> Result<Dataset> {
    let labels = d.labels()?;
    let counts = d.class_counts()?;
    let (minority, majority) = minority_majority(counts)?;
    let n_min = counts[minority.index()];
    let majority_rows: Vec<usize> = (0..d.len()).filter(|&i| labels[i] == majority).collect();
    let mut keep = vec![true; d.len()];
    let mut rng = seeds::rng(seed);
    let kept = rand::seq::index::sample(&mut rng, majority_rows.len(), n_min);
    majority_rows.iter().for_each(|&i| keep[i] = false);
    for k in kept.iter() {
        keep[majority_rows[k]] = true;
    }
    let indices: Vec<usize> = (0..d.len()).filter(|&i| keep[i]).collect();
    Ok(d.select(&indices))
}

/// `cost[actual][predicted]`, classes indexed normal = 0, failure = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMatrix {
    pub cost: [[f64; 2]; 2],
}

impl CostMatrix {
    pub fn new(cost: [[f64; 2]; 2]) -> Result<CostMatrix> {
        if cost.iter().flatten().any(|c| !c.is_finite()) {
            return config_err("cost matrix entries must be finite");
        }
        if cost[0][1] < 0.0 || cost[1][0] < 0.0 {
            return config_err("misclassification costs must be >= 0");
        }
        if cost[0][1] == 0.0 && cost[1][0] == 0.0 {
            return config_err("cost matrix has no nonzero misclassification cost");
        }
        Ok(CostMatrix { cost })
    }

    /// Zero diagonal with the two misclassification costs.
    pub fn off_diagonal(normal_as_failure: f64, failure_as_normal: f64) -> Result<CostMatrix> {
        CostMatrix::new([[0.0, normal_as_failure], [failure_as_normal, 0.0]])
    }

    /// Missing a failure costs `normal count / failure count`; a false alarm costs 1.
    pub fn balancing(counts: [usize; 2]) -> Result<CostMatrix> {
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::MissingClass("default cost matrix needs both classes".into()));
        }
        CostMatrix::off_diagonal(1.0, counts[0] as f64 / counts[1] as f64)
    }

    pub fn expected_cost(&self, p: Proba, predicted: ClassLabel) -> f64 {
        let c = predicted.index();
        p[0] * self.cost[0][c] + p[1] * self.cost[1][c]
    }

    /// Class with the lowest expected cost; ties go to normal.
    pub fn decide(&self, p: Proba) -> ClassLabel {
        if self.expected_cost(p, ClassLabel::Failure) < self.expected_cost(p, ClassLabel::Normal) {
            ClassLabel::Failure
        } else {
            ClassLabel::Normal
        }
    }

    /// Reads two rows of two numbers each (whitespace or comma separated).
    pub fn from_text(text: &str) -> Result<CostMatrix> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("bad cost '{}'", t))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        match rows.as_slice() {
            [a, b] if a.len() == 2 && b.len() == 2 => CostMatrix::new([[a[0], a[1]], [b[0], b[1]]]),
            _ => config_err("cost matrix file needs two rows of two values"),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CostMatrix> {
        CostMatrix::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `a,b` gives the cost of calling a normal row failure, then of calling a failure row normal.
impl FromStr for CostMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<CostMatrix> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad cost '{}'", t.trim()))))
            .collect::<Result<_>>()?;
        match v.as_slice() {
            [a, b] => CostMatrix::off_diagonal(*a, *b),
            _ => config_err("costs take the form a,b"),
        }
    }
}

impl fmt::Display for CostMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.cost[0][1], self.cost[1][0])
    }
}

/// Passes probabilities through; decides by minimum expected cost.
#[derive(Debug)]
pub struct CostSensitive {
    pub inner: TrainedModel,
    pub costs: CostMatrix,
}

pub fn cost_sensitive_wrap(base: TrainedModel, costs: CostMatrix) -> TrainedModel {
    Box::new(CostSensitive { inner: base, costs })
}

impl Classifier for CostSensitive {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Proba> {
        self.inner.predict_proba(x)
    }

    fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        check_arity(self.arity(), x)?;
        Ok(self.costs.decide(self.inner.predict_proba(x)?))
    }

    fn to_document(&self) -> Document {
        let mut doc = Document::new("cost");
        doc.push_floats("normal", &self.costs.cost[0]);
        doc.push_floats("failure", &self.costs.cost[1]);
        doc.push_child(self.inner.to_document());
        doc
    }
}

pub(crate) fn load_cost_sensitive(doc: &Document, registry: &Registry) -> Result<TrainedModel> {
    doc.expect_kind("cost")?;
    let (n, f) = (doc.floats("normal")?, doc.floats("failure")?);
    if n.len() != 2 || f.len() != 2 {
        return Err(Error::Document("cost rows need two entries".into()));
    }
    let costs = CostMatrix::new([[n[0], n[1]], [f[0], f[1]]])?;
    Ok(cost_sensitive_wrap(registry.load(doc.child(0)?)?, costs))
}

/// One imbalance treatment applied around training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    None,
    Smote { k: usize, ratio: f64 },
    Under,
    /// `None`: the balancing matrix from training class counts.
    Cost(Option<CostMatrix>),
}

impl Regime {
    /// Resamples a training set; cost-sensitive and plain regimes return it unchanged.
    pub fn resample(&self, train: &Dataset, seed: u64) -> Result<Dataset> {
        match *self {
            Regime::None | Regime::Cost(_) => Ok(train.clone()),
            Regime::Smote { k, ratio } => smote(
                train,
                &SmoteConfig {
                    k_neighbors: k,
                    target_ratio: ratio,
                    seed,
                },
            ),
            Regime::Under => undersample(train, seed),
        }
    }

    /// Wraps a model trained on `train` when the regime is cost-sensitive.
    pub fn wrap(&self, model: TrainedModel, train: &Dataset) -> Result<TrainedModel> {
        match *self {
            Regime::Cost(Some(cm)) => Ok(cost_sensitive_wrap(model, cm)),
            Regime::Cost(None) => Ok(cost_sensitive_wrap(model, CostMatrix::balancing(train.class_counts()?)?)),
            _ => Ok(model),
        }
    }

    /// Short name for table files and headers.
    pub fn slug(&self) -> &'static str {
        match self {
            Regime::None => "none",
            Regime::Smote { .. } => "smote",
            Regime::Under => "under",
            Regime::Cost(_) => "cost",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::None => write!(f, "none"),
            Regime::Smote { k, ratio } => write!(f, "smote:k={},ratio={}", k, ratio),
            Regime::Under => write!(f, "under"),
            Regime::Cost(None) => write!(f, "cost"),
            Regime::Cost(Some(cm)) => write!(f, "cost:{}", cm),
        }
    }
}

/// `none`, `under`, `smote[:k=5,ratio=1.0]`, `cost[:a,b]`.
impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Regime> {
        let (name, raw) = crate::learners::split_spec(s);
        match name.to_ascii_lowercase().as_str() {
            "none" if raw.is_empty() => Ok(Regime::None),
            "under" if raw.is_empty() => Ok(Regime::Under),
            "smote" => {
                let mut p = crate::learners::Params::parse("smote", raw)?;
                let dflt = SmoteConfig::default();
                let cfg = SmoteConfig {
                    k_neighbors: p.take("k")?.unwrap_or(dflt.k_neighbors),
                    target_ratio: p.take("ratio")?.unwrap_or(dflt.target_ratio),
                    seed: 0,
                };
                p.finish()?;
                cfg.validate()?;
                Ok(Regime::Smote {
                    k: cfg.k_neighbors,
                    ratio: cfg.target_ratio,
                })
            }
            "cost" if raw.is_empty() => Ok(Regime::Cost(None)),
            "cost" => Ok(Regime::Cost(Some(raw.parse()?))),
            _ => config_err(format!("unknown sampling regime '{}'", s)),
        }
    }
}
