//! End-to-end runs: data → labels → split → resampling → training →
//! evaluation, with every artifact written to an output directory.
//!
//! All stage seeds derive from one master seed by fixed offsets, and the
//! run manifest uses the same `key = value` format as config files, so a
//! manifest can be fed back in to repeat a run.

use crate::dataset::{
    generate_synthetic, load_csv, split_train_test, write_csv, Dataset, Standardizer, SyntheticGenConfig,
};
use crate::em::{em_assign_labels, em_fit, EmConfig, GaussianMixtureModel};
use crate::error::{config_err, Error, Result};
use crate::evaluation::{evaluate, CompareTable, EvalReport};
use crate::imbalance::{CostMatrix, Regime};
use crate::learners::{Registry, TrainedModel};
use crate::seeds;
use rayon::prelude::*;
use std::fmt;
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 42;

pub const STAGE_DATA: u64 = 1;
pub const STAGE_EM: u64 = 2;
pub const STAGE_SPLIT: u64 = 3;
pub const STAGE_SAMPLE: u64 = 4;
pub const STAGE_TRAIN: u64 = 5;

/// Where rows come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, has_labels: bool },
    Synthetic(SyntheticSpec),
}

/// Generator settings as given on the command line; `seed: None` derives
/// the data seed from the master seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub failure_fraction: f64,
    pub shift: f64,
    pub seed: Option<u64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 5000,
            failure_fraction: 0.13,
            shift: 2.0,
            seed: None,
        }
    }
}

impl SyntheticSpec {
    pub fn config(&self, master_seed: u64) -> SyntheticGenConfig {
        let seed = self.seed.unwrap_or_else(|| seeds::derive(master_seed, STAGE_DATA));
        SyntheticGenConfig::sensor_default(self.rows, self.failure_fraction, seed, self.shift)
    }
}

/// `rows=5000,frac=0.13,shift=2,seed=7`; every key optional.
impl std::str::FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<SyntheticSpec> {
        let mut p = crate::learners::Params::parse("synthetic", s)?;
        let d = SyntheticSpec::default();
        let spec = SyntheticSpec {
            rows: p.take("rows")?.unwrap_or(d.rows),
            failure_fraction: p.take("frac")?.unwrap_or(d.failure_fraction),
            shift: p.take("shift")?.unwrap_or(d.shift),
            seed: p.take("seed")?,
        };
        p.finish()?;
        spec.config(0).validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rows={},frac={},shift={}", self.rows, self.failure_fraction, self.shift)?;
        if let Some(s) = self.seed {
            write!(f, ",seed={}", s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Keep the labels the data came with.
    Given,
    /// Replace them with a two-component mixture's cluster labels.
    Em,
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<LabelMode> {
        match s.trim() {
            "given" => Ok(LabelMode::Given),
            "em" => Ok(LabelMode::Em),
            other => config_err(format!("label mode must be 'given' or 'em', got '{}'", other)),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::Given => "given",
            LabelMode::Em => "em",
        })
    }
}

/// How EM sees the data.
#[derive(Debug, Clone, PartialEq)]
pub struct EmSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Standardize features before clustering.
    pub scale: bool,
    /// Feature columns used for clustering; `None` means all.
    pub columns: Option<Vec<usize>>,
}

impl Default for EmSettings {
    fn default() -> Self {
        let d = EmConfig::default();
        EmSettings {
            tol: d.tol,
            max_iter: d.max_iter,
            scale: true,
            columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: DataSource,
    pub label: LabelMode,
    pub em: EmSettings,
    pub regime: Regime,
    pub learner: String,
    pub split: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            source: DataSource::Synthetic(SyntheticSpec::default()),
            label: LabelMode::Given,
            em: EmSettings::default(),
            regime: Regime::None,
            learner: "smo".into(),
            split: 0.66,
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("rigline-out"),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => config_err(format!("{}: expected true or false, got '{}'", key, v)),
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{}: bad value '{}'", key, v)))
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

impl PipelineConfig {
    /// Sets one key, as it appears in config files and manifests.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => {
                let has_labels = match &self.source {
                    DataSource::Csv { has_labels, .. } => *has_labels,
                    DataSource::Synthetic(_) => true,
                };
                self.source = DataSource::Csv {
                    path: PathBuf::from(value),
                    has_labels,
                };
            }
            "has_labels" => {
                let flag = parse_bool(key, value)?;
                if let DataSource::Csv { has_labels, .. } = &mut self.source {
                    *has_labels = flag;
                }
            }
            "synthetic" => self.source = DataSource::Synthetic(value.parse()?),
            "label" => self.label = value.parse()?,
            "em_tol" => self.em.tol = parse_value(key, value)?,
            "em_max_iter" => self.em.max_iter = parse_value(key, value)?,
            "em_scale" => self.em.scale = parse_bool(key, value)?,
            "em_columns" => {
                self.em.columns = if value == "all" {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|c| parse_value(key, c.trim()))
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "sample" => self.regime = value.parse()?,
            "cost" => self.regime = Regime::Cost(Some(value.parse()?)),
            "cost_file" => self.regime = Regime::Cost(Some(CostMatrix::load(value)?)),
            "learner" => self.learner = value.to_string(),
            "split" => self.split = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            other => return config_err(format!("unknown config key '{}'", other)),
        }
        Ok(())
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn validate(&self, registry: &Registry) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return config_err("split must lie strictly between 0 and 1");
        }
        if !(self.em.tol > 0.0) || self.em.max_iter == 0 {
            return config_err("em_tol must be positive and em_max_iter >= 1");
        }
        if let DataSource::Csv { has_labels: false, .. } = self.source {
            if self.label == LabelMode::Given {
                return config_err("unlabeled data needs --label em");
            }
        }
        registry.learner(&self.learner)?;
        Ok(())
    }

    /// The full configuration as `key = value` lines.
    pub fn manifest(&self) -> String {
        let mut lines = Vec::new();
        match &self.source {
            DataSource::Csv { path, has_labels } => {
                lines.push(format!("data = {}", path.display()));
                lines.push(format!("has_labels = {}", has_labels));
            }
            DataSource::Synthetic(s) => lines.push(format!("synthetic = {}", s)),
        }
        lines.push(format!("label = {}", self.label));
        lines.push(format!("em_tol = {}", self.em.tol));
        lines.push(format!("em_max_iter = {}", self.em.max_iter));
        lines.push(format!("em_scale = {}", self.em.scale));
        lines.push(format!(
            "em_columns = {}",
            match &self.em.columns {
                None => "all".to_string(),
                Some(c) => c.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            }
        ));
        lines.push(format!("sample = {}", self.regime));
        lines.push(format!("learner = {}", self.learner));
        lines.push(format!("split = {}", self.split));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("out = {}", self.out_dir.display()));
        // derived from `seed`; listed for reference only
        for (name, stage) in [
            ("data", STAGE_DATA),
            ("em", STAGE_EM),
            ("split", STAGE_SPLIT),
            ("sample", STAGE_SAMPLE),
            ("train", STAGE_TRAIN),
        ] {
            lines.push(format!("# {} seed = {}", name, self.stage_seed(stage)));
        }
        lines.join("\n") + "\n"
    }

    pub fn stage_seed(&self, stage: u64) -> u64 {
        seeds::derive(self.seed, stage)
    }
}

/// An error tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait InStage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_source(cfg: &PipelineConfig) -> Result<Dataset> {
    match &cfg.source {
        DataSource::Csv { path, has_labels } => load_csv(path, *has_labels),
        DataSource::Synthetic(s) => generate_synthetic(&s.config(cfg.seed)),
    }
}

/// Fits a two-component mixture on the configured view of `d` and returns
/// the model with `d` relabeled by cluster.
pub fn em_label(d: &Dataset, settings: &EmSettings, seed: u64) -> Result<(GaussianMixtureModel, Dataset)> {
    let mut view = match &settings.columns {
        Some(c) => d.project(c)?,
        None => d.clone(),
    };
    if settings.scale {
        view = Standardizer::fit(&view)?.apply(&view);
    }
    let model = em_fit(&view, 2, seed, settings.tol, settings.max_iter)?;
    let labeled = em_assign_labels(&model, &view)?;
    Ok((model, d.with_labels(&labeled.labels()?)?))
}

/// Loads and labels the data as configured.
pub fn prepare(cfg: &PipelineConfig) -> std::result::Result<(Dataset, Option<GaussianMixtureModel>), StageError> {
    let data = load_source(cfg).stage("load")?;
    match cfg.label {
        LabelMode::Given => {
            if !data.is_labeled() {
                return Err(Error::MissingLabels).stage("label");
            }
            Ok((data, None))
        }
        LabelMode::Em => {
            let (gmm, labeled) = em_label(&data, &cfg.em, cfg.stage_seed(STAGE_EM)).stage("label")?;
            Ok((labeled, Some(gmm)))
        }
    }
}

/// Resamples `train` per `regime`, fits `learner`, applies any cost wrapper.
pub fn train_cell(
    registry: &Registry,
    learner: &str,
    regime: &Regime,
    train: &Dataset,
    sample_seed: u64,
    train_seed: u64,
) -> std::result::Result<TrainedModel, StageError> {
    let l = registry.learner(learner).stage("train")?;
    let sampled = regime.resample(train, sample_seed).stage("sample")?;
    let model = l.fit(&sampled, train_seed).stage("train")?;
    regime.wrap(model, &sampled).stage("train")
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: EvalReport,
    pub model: TrainedModel,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// One learner under one regime. Writes `labeled.csv`, `gmm.txt` (EM
/// labeling only), `model.txt`, `report.csv`, `report.txt` and `manifest.txt`.
pub fn run_pipeline(cfg: &PipelineConfig, registry: &Registry) -> std::result::Result<RunOutput, StageError> {
    cfg.validate(registry).stage("config")?;
    let (data, gmm) = prepare(cfg)?;
    let (train, test) = split_train_test(&data, cfg.split, cfg.stage_seed(STAGE_SPLIT), true).stage("split")?;
    let model = train_cell(
        registry,
        &cfg.learner,
        &cfg.regime,
        &train,
        cfg.stage_seed(STAGE_SAMPLE),
        cfg.stage_seed(STAGE_TRAIN),
    )?;
    let report = evaluate(model.as_ref(), &test).stage("evaluate")?;

    let out = &cfg.out_dir;
    let write = |name: &str, body: &[u8]| write_atomic(&out.join(name), body);
    (|| -> Result<()> {
        std::fs::create_dir_all(out)?;
        write_csv(&data, out.join("labeled.csv"))?;
        if let Some(g) = &gmm {
            write("gmm.txt", g.to_document().to_text().as_bytes())?;
        }
        write("model.txt", model.to_document().to_text().as_bytes())?;
        let mut table = CompareTable::new();
        table.push(&cfg.learner, Some(&report));
        write("report.csv", table.to_csv().as_bytes())?;
        write("report.txt", report.detail(&cfg.learner).as_bytes())?;
        write("manifest.txt", cfg.manifest().as_bytes())
    })()
    .stage("write")?;
    Ok(RunOutput {
        report,
        model,
        train_rows: train.len(),
        test_rows: test.len(),
    })
}

/// Regimes × learners, plus stacked models, evaluated on one shared split.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub base: PipelineConfig,
    pub regimes: Vec<Regime>,
    pub learners: Vec<String>,
    /// Stacks compared without resampling; the best one is set against the
    /// plain learners in the final table.
    pub stacks: Vec<String>,
}

impl GridConfig {
    pub fn with_defaults(base: PipelineConfig) -> GridConfig {
        GridConfig {
            base,
            regimes: vec![
                Regime::None,
                Regime::Smote { k: 5, ratio: 1.0 },
                Regime::Under,
                Regime::Cost(None),
            ],
            learners: ["tree", "part", "mlp", "nb", "rf", "smo"].map(String::from).to_vec(),
            stacks: ["model1", "model2", "model3", "model4", "model5"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    /// (file name, table) in write order.
    pub tables: Vec<(String, CompareTable)>,
    pub summary: String,
}

/// Per-cell training seed: the train stage seed mixed with the cell's name.
pub fn cell_seed(cfg: &PipelineConfig, regime: &Regime, learner: &str) -> u64 {
    seeds::derive(
        cfg.stage_seed(STAGE_TRAIN),
        seeds::name_hash(&format!("{}|{}", regime, learner)),
    )
}

fn run_cells(
    registry: &Registry,
    cfg: &PipelineConfig,
    regime: &Regime,
    learners: &[String],
    train: &Dataset,
    test: &Dataset,
) -> CompareTable {
    let reports: Vec<Option<EvalReport>> = learners
        .par_iter()
        .map(|l| {
            let result = train_cell(
                registry,
                l,
                regime,
                train,
                seeds::derive(cfg.stage_seed(STAGE_SAMPLE), seeds::name_hash(&regime.to_string())),
                cell_seed(cfg, regime, l),
            )
            .and_then(|m| evaluate(m.as_ref(), test).stage("evaluate"));
            match result {
                Ok(r) => Some(r),
                Err(e) => {
                    log::error!("grid cell {} / {}: {}", regime, l, e);
                    None
                }
            }
        })
        .collect();
    let mut table = CompareTable::new();
    for (l, r) in learners.iter().zip(&reports) {
        table.push(l, r.as_ref());
    }
    table
}

/// Runs the grid and writes one CSV per table plus `summary.txt` and
/// `manifest.txt` into the output directory. Failed cells appear as error
/// markers; the grid keeps going.
pub fn run_experiment_grid(grid: &GridConfig, registry: &Registry) -> std::result::Result<GridOutput, StageError> {
    let cfg = &grid.base;
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return config_err("split must lie strictly between 0 and 1").stage("config");
    }
    for l in grid.learners.iter().chain(&grid.stacks) {
        registry.learner(l).stage("config")?;
    }
    let (data, _) = prepare(cfg)?;
    // one split, upstream of every cell
    let (train, test) = split_train_test(&data, cfg.split, cfg.stage_seed(STAGE_SPLIT), true).stage("split")?;

    let mut tables = Vec::new();
    for (i, regime) in grid.regimes.iter().enumerate() {
        let t = run_cells(registry, cfg, regime, &grid.learners, &train, &test);
        tables.push((format!("table{}_{}.csv", i + 1, regime.slug()), t));
    }
    let mut summary = String::new();
    if !grid.stacks.is_empty() {
        let stacks = run_cells(registry, cfg, &Regime::None, &grid.stacks, &train, &test);
        let best = stacks.best();
        let n = tables.len();
        tables.push((format!("table{}_stacks.csv", n + 1), stacks.clone()));
        if let Some(b) = best {
            summary.push_str(&format!("best stack: {}\n", stacks.columns[b]));
            // plain learners without resampling, then the best stack
            let mut vs = match grid.regimes.iter().position(|r| *r == Regime::None) {
                Some(i) => tables[i].1.clone(),
                None => run_cells(registry, cfg, &Regime::None, &grid.learners, &train, &test),
            };
            vs.columns.push(stacks.columns[b].clone());
            vs.values.push(stacks.values[b]);
            tables.push((format!("table{}_best_vs_all.csv", n + 2), vs));
        } else {
            summary.push_str("best stack: none (every stack failed)\n");
        }
    }
    for (name, t) in &tables {
        match t.best() {
            Some(b) => summary.push_str(&format!("{}: best {}\n", name, t.columns[b])),
            None => summary.push_str(&format!("{}: no successful cells\n", name)),
        }
    }
    summary.push_str("ranking: ROC, then TP rate; earlier column wins exact ties\n");

    let out = &cfg.out_dir;
    (|| -> Result<()> {
        std::fs::create_dir_all(out)?;
        for (name, t) in &tables {
            write_atomic(&out.join(name), t.to_csv().as_bytes())?;
        }
        write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
        let mut manifest = cfg.manifest();
        manifest.push_str(&format!(
            "grid_regimes = {}\ngrid_learners = {}\ngrid_stacks = {}\n",
            grid.regimes.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "),
            grid.learners.join(" "),
            grid.stacks.join(" ")
        ));
        write_atomic(&out.join("manifest.txt"), manifest.as_bytes())
    })()
    .stage("write")?;
    Ok(GridOutput { tables, summary })
}
