//! Confusion-matrix metrics, rank-statistic ROC AUC and comparison tables.
//!
//! Summary numbers are instance-weighted averages of the per-class values,
//! each class taking its turn as the positive class.

use crate::dataset::{ClassLabel, Dataset, CLASSES};
use crate::error::{Error, Result};
use crate::learners::Classifier;
use std::fmt::Write as _;

/// `counts[actual][predicted]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
}

/// Counts with one class treated as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassView {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: ClassLabel, predicted: ClassLabel) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn view(&self, positive: ClassLabel) -> ClassView {
        let (p, n) = (positive.index(), positive.other().index());
        ClassView {
            tp: self.counts[p][p],
            fn_: self.counts[p][n],
            fp: self.counts[n][p],
            tn: self.counts[n][n],
        }
    }

    /// Fraction of instances whose actual class is each class.
    pub fn class_weights(&self) -> [f64; 2] {
        let total = self.total() as f64;
        if total == 0.0 {
            return [0.0, 0.0];
        }
        [
            (self.counts[0][0] + self.counts[0][1]) as f64 / total,
            (self.counts[1][0] + self.counts[1][1]) as f64 / total,
        ]
    }
}

/// Predicts every row of `test` and tallies actual against predicted.
pub fn confusion(m: &dyn Classifier, test: &Dataset) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = test.labels()?;
    let mut cm = ConfusionMatrix::default();
    for (i, &actual) in labels.iter().enumerate() {
        cm.record(actual, m.predict(test.features(i))?);
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassMetrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub roc_auc: f64,
}

impl ClassMetrics {
    /// Zero denominators give 0.
    pub fn from_view(v: ClassView) -> ClassMetrics {
        let precision = ratio(v.tp, v.tp + v.fp);
        let recall = ratio(v.tp, v.tp + v.fn_);
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            tp_rate: recall,
            fp_rate: ratio(v.fp, v.fp + v.tn),
            precision,
            recall,
            f_measure,
            roc_auc: 0.0,
        }
    }

    fn weighted(per_class: &[ClassMetrics; 2], w: [f64; 2]) -> ClassMetrics {
        let avg = |f: fn(&ClassMetrics) -> f64| w[0] * f(&per_class[0]) + w[1] * f(&per_class[1]);
        ClassMetrics {
            tp_rate: avg(|m| m.tp_rate),
            fp_rate: avg(|m| m.fp_rate),
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f_measure: avg(|m| m.f_measure),
            roc_auc: avg(|m| m.roc_auc),
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.tp_rate,
            self.fp_rate,
            self.precision,
            self.recall,
            self.f_measure,
            self.roc_auc,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: [ClassMetrics; 2],
    pub weights: [f64; 2],
    /// Weighted summary.
    pub summary: ClassMetrics,
}

/// Per-class metrics and their weighted summary (AUC left at 0).
pub fn metrics(cm: &ConfusionMatrix, class_weights: [f64; 2]) -> EvalReport {
    let per_class = CLASSES.map(|c| ClassMetrics::from_view(cm.view(c)));
    EvalReport {
        confusion: *cm,
        per_class,
        weights: class_weights,
        summary: ClassMetrics::weighted(&per_class, class_weights),
    }
}

/// `P(score+ > score-) + P(tie) / 2` via average ranks (Mann-Whitney U).
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scores.iter().filter(|s| s.1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if scores[k].1 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Full report: predictions for the confusion matrix, and each class's
/// probability as its ROC score.
pub fn evaluate(m: &dyn Classifier, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = test.labels()?;
    let mut cm = ConfusionMatrix::default();
    let mut probs = Vec::with_capacity(test.len());
    for (i, &actual) in labels.iter().enumerate() {
        let x = test.features(i);
        cm.record(actual, m.predict(x)?);
        probs.push(m.predict_proba(x)?);
    }
    let mut report = metrics(&cm, cm.class_weights());
    for c in CLASSES {
        let scores: Vec<(f64, bool)> = probs
            .iter()
            .zip(&labels)
            .map(|(p, &l)| (p[c.index()], l == c))
            .collect();
        report.per_class[c.index()].roc_auc = roc_auc(&scores)?;
    }
    report.summary = ClassMetrics::weighted(&report.per_class, report.weights);
    Ok(report)
}

impl EvalReport {
    /// Confusion matrix and per-class metrics as plain text.
    pub fn detail(&self, title: &str) -> String {
        let mut s = String::new();
        let c = &self.confusion.counts;
        let _ = writeln!(s, "== {} ==", title);
        let _ = writeln!(s, "instances: {}", self.confusion.total());
        let _ = writeln!(s, "confusion (rows actual, columns predicted):");
        let _ = writeln!(s, "{:>10} {:>10} {:>10}", "", "normal", "failure");
        let _ = writeln!(s, "{:>10} {:>10} {:>10}", "normal", c[0][0], c[0][1]);
        let _ = writeln!(s, "{:>10} {:>10} {:>10}", "failure", c[1][0], c[1][1]);
        let _ = writeln!(
            s,
            "{:>10} {:>8} {:>8} {:>9} {:>8} {:>9} {:>8}",
            "class", "TP Rate", "FP Rate", "Precision", "Recall", "F-Measure", "ROC"
        );
        let rows = [
            ("normal", &self.per_class[0]),
            ("failure", &self.per_class[1]),
            ("weighted", &self.summary),
        ];
        for (name, m) in rows {
            let v = m.as_array();
            let _ = writeln!(
                s,
                "{:>10} {:>8.3} {:>8.3} {:>9.3} {:>8.3} {:>9.3} {:>8.3}",
                name, v[0], v[1], v[2], v[3], v[4], v[5]
            );
        }
        s
    }
}

pub const MEASURES: [&str; 6] = ["TP Rate", "FP Rate", "Precision", "Recall", "F-Measure", "ROC"];

/// Marker written in place of a value when a model failed.
pub const ERROR_CELL: &str = "ERROR";

/// Measures as rows, models as columns. A column is `None` when its model failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub columns: Vec<String>,
    pub values: Vec<Option<[f64; 6]>>,
}

impl CompareTable {
    pub fn new() -> Self {
        CompareTable {
            columns: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, report: Option<&EvalReport>) {
        self.columns.push(name.to_string());
        self.values.push(report.map(|r| r.summary.as_array()));
    }

    /// Index of the best column by ROC, then TP rate; earlier columns win ties.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<(usize, [f64; 6])> = None;
        for (i, v) in self.values.iter().enumerate() {
            let Some(v) = v else { continue };
            let better = match best {
                None => true,
                Some((_, b)) => v[5] > b[5] || (v[5] == b[5] && v[0] > b[0]),
            };
            if better {
                best = Some((i, *v));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Measure".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (m, name) in MEASURES.iter().enumerate() {
            let mut row = vec![name.to_string()];
            for v in &self.values {
                row.push(match v {
                    Some(v) => format!("{:.3}", v[m]),
                    None => ERROR_CELL.to_string(),
                });
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<CompareTable> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let records: Vec<csv::StringRecord> = r
            .records()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Document(e.to_string()))?;
        if records.len() != MEASURES.len() + 1 {
            return Err(Error::Document("table needs a header and six measure rows".into()));
        }
        let columns: Vec<String> = records[0].iter().skip(1).map(String::from).collect();
        let mut values: Vec<Option<[f64; 6]>> = vec![Some([0.0; 6]); columns.len()];
        for (m, rec) in records[1..].iter().enumerate() {
            if rec.get(0) != Some(MEASURES[m]) || rec.len() != columns.len() + 1 {
                return Err(Error::Document(format!("bad row for {}", MEASURES[m])));
            }
            for (c, cell) in rec.iter().skip(1).enumerate() {
                if cell == ERROR_CELL {
                    values[c] = None;
                } else if let Some(v) = values[c].as_mut() {
                    v[m] = cell
                        .parse()
                        .map_err(|_| Error::Document(format!("bad cell '{}'", cell)))?;
                }
            }
        }
        Ok(CompareTable { columns, values })
    }
}

impl Default for CompareTable {
    fn default() -> Self {
        CompareTable::new()
    }
}

/// Evaluates each named model on `test`, in order.
pub fn compare_table(models: &[(&str, &dyn Classifier)], test: &Dataset) -> Result<CompareTable> {
    let mut t = CompareTable::new();
    for (name, m) in models {
        let r = evaluate(*m, test)?;
        t.push(name, Some(&r));
    }
    Ok(t)
}
