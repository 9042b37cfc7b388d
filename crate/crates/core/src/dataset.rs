//! Sensor datasets: CSV loading, synthetic generation, splitting.

use crate::error::{config_err, Error, Result};
use crate::seeds;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// The two outcome classes. `Normal` is class index 0 and margin sign +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    Normal,
    Failure,
}

pub const CLASSES: [ClassLabel; 2] = [ClassLabel::Normal, ClassLabel::Failure];

impl ClassLabel {
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Normal => 0,
            ClassLabel::Failure => 1,
        }
    }

    pub fn from_index(i: usize) -> ClassLabel {
        if i == 0 {
            ClassLabel::Normal
        } else {
            ClassLabel::Failure
        }
    }

    /// SVM target: +1 for normal, -1 for failure.
    pub fn sign(self) -> f64 {
        match self {
            ClassLabel::Normal => 1.0,
            ClassLabel::Failure => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Failure => "failure",
        }
    }

    pub fn other(self) -> ClassLabel {
        match self {
            ClassLabel::Normal => ClassLabel::Failure,
            ClassLabel::Failure => ClassLabel::Normal,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(ClassLabel::Normal),
            "failure" => Ok(ClassLabel::Failure),
            other => Err(format!("unknown class '{}'", other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: Option<String>,
}

impl Column {
    pub fn new(name: &str, unit: Option<&str>) -> Self {
        Column {
            name: name.to_string(),
            unit: unit.map(str::to_string),
        }
    }

    /// Parses headers of the form `Flow Rate (cc/min)`.
    fn from_header(header: &str) -> Self {
        let h = header.trim();
        if let (Some(open), true) = (h.rfind('('), h.ends_with(')')) {
            let name = h[..open].trim();
            let unit = h[open + 1..h.len() - 1].trim();
            if !name.is_empty() && !unit.is_empty() {
                return Column::new(name, Some(unit));
            }
        }
        Column::new(h, None)
    }

    fn header(&self) -> String {
        match &self.unit {
            Some(u) => format!("{} ({})", self.name, u),
            None => self.name.clone(),
        }
    }
}

/// One sensor reading. `id` identifies the row across splits and resamples;
/// `meta` carries bookkeeping cells (serial number, timestamp) that are never features.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: Option<ClassLabel>,
    pub meta: Vec<String>,
}

impl Instance {
    pub fn new(id: u64, features: Vec<f64>, label: Option<ClassLabel>) -> Self {
        Instance {
            id,
            features,
            label,
            meta: Vec::new(),
        }
    }
}

/// Immutable table of instances sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<Column>,
    meta_columns: Vec<String>,
    rows: Vec<Instance>,
    labeled: bool,
}

impl Dataset {
    /// Validates arity, finiteness and label presence for every row.
    pub fn new(schema: Vec<Column>, rows: Vec<Instance>, labeled: bool) -> Result<Self> {
        Self::with_meta(schema, Vec::new(), rows, labeled)
    }

    pub fn with_meta(
        schema: Vec<Column>,
        meta_columns: Vec<String>,
        rows: Vec<Instance>,
        labeled: bool,
    ) -> Result<Self> {
        let arity = schema.len();
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != arity {
                return Err(Error::Shape {
                    expected: arity,
                    found: r.features.len(),
                });
            }
            if let Some(j) = r.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: schema[j].name.clone(),
                    message: "non-finite value".into(),
                });
            }
            if labeled != r.label.is_some() {
                return if labeled {
                    Err(Error::MissingLabels)
                } else {
                    config_err("unlabeled dataset contains a labeled row")
                };
            }
            if !r.meta.is_empty() && r.meta.len() != meta_columns.len() {
                return Err(Error::Arity {
                    row: i + 1,
                    expected: meta_columns.len(),
                    found: r.meta.len(),
                });
            }
        }
        Ok(Dataset {
            schema,
            meta_columns,
            rows,
            labeled,
        })
    }

    /// Labeled dataset from a plain feature matrix; column names are `x0..xn`.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<ClassLabel>) -> Result<Self> {
        if features.len() != labels.len() {
            return config_err("feature and label counts differ");
        }
        let arity = features.first().map_or(0, Vec::len);
        let schema = (0..arity).map(|j| Column::new(&format!("x{}", j), None)).collect();
        let rows = features
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (f, l))| Instance::new(i as u64, f, Some(l)))
            .collect();
        Dataset::new(schema, rows, true)
    }

    pub fn schema(&self) -> &[Column] {
        &self.schema
    }

    pub fn meta_columns(&self) -> &[String] {
        &self.meta_columns
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.rows[i].features
    }

    /// Labels of a labeled dataset.
    pub fn labels(&self) -> Result<Vec<ClassLabel>> {
        if !self.labeled {
            return Err(Error::MissingLabels);
        }
        Ok(self.rows.iter().map(|r| r.label.unwrap()).collect())
    }

    pub fn label(&self, i: usize) -> Option<ClassLabel> {
        self.rows[i].label
    }

    /// Row counts per class, indexed by [`ClassLabel::index`].
    pub fn class_counts(&self) -> Result<[usize; 2]> {
        let mut counts = [0usize; 2];
        for l in self.labels()? {
            counts[l.index()] += 1;
        }
        Ok(counts)
    }

    pub fn with_labels(&self, labels: &[ClassLabel]) -> Result<Dataset> {
        if labels.len() != self.len() {
            return config_err("label count differs from row count");
        }
        let rows = self
            .rows
            .iter()
            .zip(labels)
            .map(|(r, &l)| Instance {
                label: Some(l),
                ..r.clone()
            })
            .collect();
        Ok(self.derived(rows, true))
    }

    pub fn without_labels(&self) -> Dataset {
        let rows = self
            .rows
            .iter()
            .map(|r| Instance {
                label: None,
                ..r.clone()
            })
            .collect();
        self.derived(rows, false)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        self.derived(rows, self.labeled)
    }

    /// Same rows restricted to the feature columns at `columns`.
    pub fn project(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.arity()) {
            return config_err(format!("column index {} out of range", bad));
        }
        let schema = columns.iter().map(|&c| self.schema[c].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| Instance {
                features: columns.iter().map(|&c| r.features[c]).collect(),
                ..r.clone()
            })
            .collect();
        Ok(Dataset {
            schema,
            meta_columns: self.meta_columns.clone(),
            rows,
            labeled: self.labeled,
        })
    }

    /// Appends rows sharing this schema (used by oversampling).
    pub fn extended(&self, extra: Vec<Instance>) -> Result<Dataset> {
        let mut rows = self.rows.clone();
        rows.extend(extra);
        Dataset::with_meta(
            self.schema.clone(),
            self.meta_columns.clone(),
            rows,
            self.labeled,
        )
    }

    /// Applies `f` to every feature vector.
    pub fn map_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Dataset {
        let rows = self
            .rows
            .iter()
            .map(|r| Instance {
                features: f(&r.features),
                ..r.clone()
            })
            .collect();
        self.derived(rows, self.labeled)
    }

    pub fn max_id(&self) -> Option<u64> {
        self.rows.iter().map(|r| r.id).max()
    }

    fn derived(&self, rows: Vec<Instance>, labeled: bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            meta_columns: self.meta_columns.clone(),
            rows,
            labeled,
        }
    }
}

fn is_meta_header(header: &str) -> bool {
    let key: String = header
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    matches!(
        key.as_str(),
        "sno" | "serial" | "serialno" | "serialnumber" | "id" | "timestamp" | "time" | "date"
            | "datetime"
    )
}

/// Reads a CSV file with a header row. Serial-number and timestamp columns are
/// kept as row metadata; with `has_labels` the last column holds the class.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, has_labels)
}

pub fn parse_csv(text: &str, has_labels: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h.map_err(csv_err)?,
        None => return Err(Error::EmptyDataset),
    };
    let width = header.len();
    let label_col = if has_labels {
        if width == 0 {
            return Err(Error::EmptyDataset);
        }
        Some(width - 1)
    } else {
        None
    };
    let mut meta_idx = Vec::new();
    let mut feat_idx = Vec::new();
    for (j, h) in header.iter().enumerate() {
        if Some(j) == label_col {
            continue;
        }
        if is_meta_header(h) {
            meta_idx.push(j);
        } else {
            feat_idx.push(j);
        }
    }
    let schema: Vec<Column> = feat_idx.iter().map(|&j| Column::from_header(&header[j])).collect();
    let meta_columns: Vec<String> = meta_idx.iter().map(|&j| header[j].to_string()).collect();

    let mut rows = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let rowno = r + 1;
        if rec.len() != width {
            return Err(Error::Arity {
                row: rowno,
                expected: width,
                found: rec.len(),
            });
        }
        let mut features = Vec::with_capacity(feat_idx.len());
        for &j in &feat_idx {
            let v: f64 = rec[j].parse().map_err(|_| Error::Parse {
                row: rowno,
                column: header[j].to_string(),
                message: format!("'{}' is not a number", &rec[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: rowno,
                    column: header[j].to_string(),
                    message: "non-finite value".into(),
                });
            }
            features.push(v);
        }
        let label = match label_col {
            Some(j) => Some(rec[j].parse::<ClassLabel>().map_err(|m| Error::Parse {
                row: rowno,
                column: header[j].to_string(),
                message: m,
            })?),
            None => None,
        };
        rows.push(Instance {
            id: r as u64,
            features,
            label,
            meta: meta_idx.iter().map(|&j| rec[j].to_string()).collect(),
        });
    }
    Dataset::with_meta(schema, meta_columns, rows, has_labels)
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Serializes in the same layout `parse_csv` reads: metadata columns first,
/// then features, then `class` when labeled.
pub fn to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = d.meta_columns.clone();
    header.extend(d.schema.iter().map(Column::header));
    if d.labeled {
        header.push("class".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in &d.rows {
        let mut cells: Vec<String> = if r.meta.is_empty() {
            vec![String::new(); d.meta_columns.len()]
        } else {
            r.meta.clone()
        };
        cells.extend(r.features.iter().map(|v| v.to_string()));
        if let Some(l) = r.label {
            cells.push(l.name().to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv(d))?;
    Ok(())
}

/// Per-column Gaussian parameters for each class.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticColumn {
    pub column: Column,
    pub normal: (f64, f64),
    pub failure: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGenConfig {
    pub row_count: usize,
    pub failure_fraction: f64,
    pub seed: u64,
    pub columns: Vec<SyntheticColumn>,
}

/// Sample mean and standard deviation (n-1) of the five sensor columns in
/// the published 19-row sample: temperature, operating pressure, working
/// pressure, gas detector, flow rate.
pub const SAMPLE_MEANS: [f64; 5] = [
    95.605_263_157_894_74,
    77.237_368_421_052_62,
    77.951_578_947_368_42,
    9.984_210_526_315_79,
    362.894_736_842_105_26,
];
pub const SAMPLE_STDS: [f64; 5] = [
    3.153_564_770_261_412_2,
    1.839_413_681_056_678,
    1.677_512_255_818_433_9,
    0.267_214_349_861_548_24,
    20.335_777_822_574_745,
];

impl SyntheticGenConfig {
    /// Five sensor columns with normal-class parameters from the published
    /// sample; the failure class shifts the two pressure columns and the gas
    /// detector by `shift` standard deviations.
    pub fn sensor_default(row_count: usize, failure_fraction: f64, seed: u64, shift: f64) -> Self {
        let cols = [
            ("Operating Temperature", "Deg. C", 0.0),
            ("Operating Pressure", "psi", shift),
            ("Working Pressure", "psi", shift),
            ("Gas Detector", "PPM", shift),
            ("Flow Rate", "cc/min", 0.0),
        ];
        let columns = cols
            .iter()
            .enumerate()
            .map(|(j, &(name, unit, k))| SyntheticColumn {
                column: Column::new(name, Some(unit)),
                normal: (SAMPLE_MEANS[j], SAMPLE_STDS[j]),
                failure: (SAMPLE_MEANS[j] + k * SAMPLE_STDS[j], SAMPLE_STDS[j]),
            })
            .collect();
        SyntheticGenConfig {
            row_count,
            failure_fraction,
            seed,
            columns,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_count == 0 {
            return config_err("row_count must be positive");
        }
        if !(self.failure_fraction > 0.0 && self.failure_fraction < 1.0) {
            return config_err("failure_fraction must lie strictly between 0 and 1");
        }
        for c in &self.columns {
            if !(c.normal.1 > 0.0 && c.failure.1 > 0.0) {
                return config_err(format!("standard deviation for '{}' must be > 0", c.column.name));
            }
            if !(c.normal.0.is_finite() && c.failure.0.is_finite()) {
                return config_err(format!("mean for '{}' must be finite", c.column.name));
            }
        }
        Ok(())
    }

    /// (normal, failure) row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let failure = (self.row_count as f64 * self.failure_fraction).round() as usize;
        let failure = failure.min(self.row_count);
        (self.row_count - failure, failure)
    }
}

impl Default for SyntheticGenConfig {
    fn default() -> Self {
        SyntheticGenConfig::sensor_default(5000, 0.13, 0, 2.0)
    }
}

/// Labeled dataset drawn from per-class Gaussians. Class order is shuffled,
/// and the output depends only on `cfg`.
pub fn generate_synthetic(cfg: &SyntheticGenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (n_normal, n_failure) = cfg.class_counts();
    let mut labels: Vec<ClassLabel> = std::iter::repeat_n(ClassLabel::Normal, n_normal)
        .chain(std::iter::repeat_n(ClassLabel::Failure, n_failure))
        .collect();
    let mut rng = seeds::rng(cfg.seed);
    labels.shuffle(&mut rng);

    let dists: Vec<[Normal<f64>; 2]> = cfg
        .columns
        .iter()
        .map(|c| {
            [
                Normal::new(c.normal.0, c.normal.1).expect("validated"),
                Normal::new(c.failure.0, c.failure.1).expect("validated"),
            ]
        })
        .collect();
    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let features = dists.iter().map(|d| d[label.index()].sample(&mut rng)).collect();
            Instance::new(i as u64, features, Some(label))
        })
        .collect();
    let schema = cfg.columns.iter().map(|c| c.column.clone()).collect();
    Dataset::new(schema, rows, true)
}

/// Splits into (train, test); train holds `floor(train_fraction * len)` rows.
pub fn split_train_test(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
    shuffle: bool,
) -> Result<(Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return config_err("train fraction must lie strictly between 0 and 1");
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    if shuffle {
        order.shuffle(&mut seeds::rng(seed));
    }
    // absorb representation error such as 0.29 * 100 = 28.999999999999996
    let n_train = ((train_fraction * d.len() as f64) + 1e-9).floor() as usize;
    let (train, test) = order.split_at(n_train.min(d.len()));
    Ok((d.select(train), d.select(test)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassShare {
    pub count: usize,
    pub fraction: f64,
}

/// Count and fraction per class present in `d`.
pub fn class_distribution(d: &Dataset) -> Result<BTreeMap<ClassLabel, ClassShare>> {
    let counts = d.class_counts()?;
    let total = d.len() as f64;
    Ok(CLASSES
        .iter()
        .filter(|c| counts[c.index()] > 0)
        .map(|&c| {
            let count = counts[c.index()];
            (
                c,
                ClassShare {
                    count,
                    fraction: count as f64 / total,
                },
            )
        })
        .collect())
}

/// Assigns each row a fold in `0..folds`, round-robin within each class after
/// a seeded shuffle, so every fold receives `floor` or `ceil` of each class.
pub fn stratified_folds(labels: &[ClassLabel], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeds::rng(seed);
    let mut assignment = vec![0; labels.len()];
    for class in CLASSES {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        // rotate the starting fold per class so small classes don't all pile into fold 0
        let offset = rng.random_range(0..folds.max(1));
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = (k + offset) % folds;
        }
    }
    assignment
}

/// Column-wise z-scoring with statistics from a fitting dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean/std per column; zero-variance columns get std 1.
    pub fn fit(d: &Dataset) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = d.len() as f64;
        let arity = d.arity();
        let mut mean = vec![0.0; arity];
        for r in d.rows() {
            for (m, v) in mean.iter_mut().zip(&r.features) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; arity];
        for r in d.rows() {
            for j in 0..arity {
                let dlt = r.features[j] - mean[j];
                var[j] += dlt * dlt;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, d: &Dataset) -> Dataset {
        d.map_features(|x| self.transform(x))
    }

    pub fn to_document(&self) -> crate::doc::Document {
        let mut doc = crate::doc::Document::new("scaler");
        doc.push_floats("mean", &self.mean);
        doc.push_floats("std", &self.std);
        doc
    }

    pub fn from_document(doc: &crate::doc::Document) -> Result<Self> {
        doc.expect_kind("scaler")?;
        let mean = doc.floats("mean")?;
        let std = doc.floats("std")?;
        if mean.len() != std.len() {
            return Err(Error::Document("scaler mean/std lengths differ".into()));
        }
        Ok(Standardizer { mean, std })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIRST_ROWS: &str = "S No.,Time Stamp,Operating Temperature (Deg. C),Operating Pressure (psi),Working Pressure (psi),Gas Detector (PPM),Flow Rate (cc/min)\n\
        1048576,2/8/2014 2:28,98.6,75.57,79.52,9.9,359\n\
        1048577,2/8/2014 2:28,94.7,79.27,78.53,9.9,340\n";

    #[test]
    fn first_published_row_parses() {
        let d = parse_csv(FIRST_ROWS, false).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.arity(), 5);
        assert_eq!(d.features(0), &[98.6, 75.57, 79.52, 9.9, 359.0]);
        assert_eq!(d.rows()[0].meta, vec!["1048576", "2/8/2014 2:28"]);
        assert_eq!(d.schema()[4], Column::new("Flow Rate", Some("cc/min")));
        assert_eq!(d.meta_columns(), &["S No.", "Time Stamp"]);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let d = parse_csv("a,b,c\n", false).unwrap();
        assert_eq!(d.len(), 0);
        assert_eq!(d.arity(), 3);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_csv("", false), Err(Error::EmptyDataset)));
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let err = parse_csv("a,b\n1,2\n3,x\n", false).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn ragged_row_is_arity_error() {
        let err = parse_csv("a,b\n1,2\n3\n", false).unwrap_err();
        assert!(matches!(
            err,
            Error::Arity {
                row: 2,
                expected: 2,
                found: 1
            }
        ));
    }

    #[test]
    fn labeled_csv_round_trip() {
        let d = parse_csv("a,b,class\n1.5,2,normal\n3,-4.25,failure\n", true).unwrap();
        assert_eq!(d.labels().unwrap(), vec![ClassLabel::Normal, ClassLabel::Failure]);
        let again = parse_csv(&to_csv(&d), true).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn synthetic_class_counts() {
        let cfg = SyntheticGenConfig::sensor_default(1000, 0.13, 9, 2.0);
        let d = generate_synthetic(&cfg).unwrap();
        assert_eq!(d.class_counts().unwrap(), [870, 130]);
        let again = generate_synthetic(&cfg).unwrap();
        assert_eq!(to_csv(&d), to_csv(&again));
    }

    #[test]
    fn synthetic_config_rejects_bad_fraction() {
        let mut cfg = SyntheticGenConfig::default();
        cfg.failure_fraction = 1.0;
        assert!(generate_synthetic(&cfg).is_err());
        cfg.failure_fraction = 0.1;
        cfg.columns[0].normal.1 = 0.0;
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn split_sizes_follow_floor() {
        let cfg = SyntheticGenConfig::sensor_default(100, 0.13, 1, 2.0);
        let d = generate_synthetic(&cfg).unwrap();
        let (tr, te) = split_train_test(&d, 0.66, 3, true).unwrap();
        assert_eq!((tr.len(), te.len()), (66, 34));
        let (tr2, _) = split_train_test(&d, 0.66, 3, true).unwrap();
        assert_eq!(tr, tr2);
        let (tr3, _) = split_train_test(&d, 0.29, 3, false).unwrap();
        assert_eq!(tr3.len(), 29);
    }

    #[test]
    fn large_split_arithmetic() {
        let n: usize = 870_000;
        let n_train = ((0.66 * n as f64) + 1e-9).floor() as usize;
        assert_eq!((n_train, n - n_train), (574_200, 295_800));
    }

    #[test]
    fn distribution_of_87_13() {
        let labels: Vec<_> = (0..1000)
            .map(|i| if i < 870 { ClassLabel::Normal } else { ClassLabel::Failure })
            .collect();
        let d = Dataset::from_rows(vec![vec![0.0]; 1000], labels).unwrap();
        let dist = class_distribution(&d).unwrap();
        assert_eq!(dist[&ClassLabel::Normal].count, 870);
        assert!((dist[&ClassLabel::Normal].fraction - 0.87).abs() < 1e-12);
        assert!((dist[&ClassLabel::Failure].fraction - 0.13).abs() < 1e-12);
    }

    #[test]
    fn distribution_needs_labels() {
        let d = parse_csv("a\n1\n", false).unwrap();
        assert!(matches!(class_distribution(&d), Err(Error::MissingLabels)));
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let labels: Vec<_> = (0..103)
            .map(|i| if i % 7 == 0 { ClassLabel::Failure } else { ClassLabel::Normal })
            .collect();
        let folds = stratified_folds(&labels, 5, 11);
        for class in CLASSES {
            let n = labels.iter().filter(|&&l| l == class).count();
            for f in 0..5 {
                let c = (0..labels.len()).filter(|&i| labels[i] == class && folds[i] == f).count();
                assert!(c == n / 5 || c == n.div_ceil(5));
            }
        }
    }
}
