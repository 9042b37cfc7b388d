use clap::{Args, Parser, Subcommand};
use rigline::dataset::{class_distribution, generate_synthetic, load_csv, write_csv};
use rigline::evaluation::{evaluate, CompareTable};
use rigline::imbalance::{CostMatrix, Regime};
use rigline::pipeline::{
    em_label, parse_key_values, run_experiment_grid, run_pipeline, write_atomic, DataSource, EmSettings,
    GridConfig, LabelMode, PipelineConfig, StageError, SyntheticSpec, DEFAULT_SEED, STAGE_EM, STAGE_SAMPLE,
    STAGE_TRAIN,
};
use rigline::{seeds, Dataset, Registry};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "rigline", version, about = "Failure classification for pipeline sensor data")]
struct Cli {
    /// Master seed; every stage seed derives from it.
    #[arg(long, global = true, env = "RIGLINE_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic labeled sensor dataset.
    Generate {
        #[arg(long, default_value = "rows=5000,frac=0.13,shift=2")]
        synthetic: SyntheticSpec,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a dataset by two-component EM clustering.
    Label {
        #[arg(long)]
        data: PathBuf,
        /// The input's last column is a class label (it is replaced).
        #[arg(long)]
        labeled: bool,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also save the fitted mixture.
        #[arg(long)]
        gmm: Option<PathBuf>,
    },
    /// Resample a labeled dataset (smote or under).
    Sample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_regime)]
        sample: Regime,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one learner on a labeled dataset and save the model.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Learner spec: nb, tree, rf, part, mlp, smo (with `:key=value,...`), model1..model5, or stack:...
        #[arg(long)]
        learner: String,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Score saved models on a labeled dataset.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Model documents; each becomes one table column, named by file stem.
        #[arg(long, required = true, num_args = 1..)]
        model: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print confusion matrices and per-class metrics.
        #[arg(long)]
        detail: bool,
    },
    /// Full pipeline for one learner: label, split, sample, train, evaluate.
    Run {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        learner: Option<String>,
        /// Stacked preset or spec; shorthand for --learner.
        #[arg(long, conflicts_with = "learner")]
        stack: Option<String>,
    },
    /// Regimes x learners plus stacked models, one table per regime.
    Grid {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Sampling regimes (repeatable); default none, smote, under, cost.
        #[arg(long = "regime", value_parser = parse_regime)]
        regimes: Vec<Regime>,
        /// Learners (repeatable); default tree, part, mlp, nb, rf, smo.
        #[arg(long = "learner")]
        learners: Vec<String>,
        /// Stacks (repeatable); default model1..model5.
        #[arg(long = "stack")]
        stacks: Vec<String>,
        /// Skip the stacked models.
        #[arg(long)]
        no_stacks: bool,
    },
    /// List the registered learners.
    Learners,
}

#[derive(Args, Debug)]
struct EmArgs {
    #[arg(long)]
    em_tol: Option<f64>,
    #[arg(long)]
    em_max_iter: Option<usize>,
    /// Cluster raw features instead of standardized ones.
    #[arg(long)]
    em_raw: bool,
    /// Comma-separated feature columns to cluster on.
    #[arg(long, value_delimiter = ',')]
    em_columns: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct SamplingArgs {
    /// none | under | smote[:k=5,ratio=1.0] | cost[:a,b]
    #[arg(long, value_parser = parse_regime)]
    sample: Option<Regime>,
    /// Cost-sensitive prediction: cost of a false alarm, cost of a missed failure.
    #[arg(long, value_parser = parse_cost, conflicts_with_all = ["sample", "cost_file"])]
    cost: Option<CostMatrix>,
    /// Cost matrix file: two rows of two numbers, actual class by predicted class.
    #[arg(long, conflicts_with = "sample")]
    cost_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV input (header row, optional serial/timestamp columns).
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// The CSV has no class column.
    #[arg(long, requires = "data")]
    unlabeled: bool,
    /// Synthetic input, e.g. rows=5000,frac=0.13,shift=2
    #[arg(long)]
    synthetic: Option<SyntheticSpec>,
    /// given (use the data's labels) or em (cluster).
    #[arg(long)]
    label: Option<LabelMode>,
    #[command(flatten)]
    em: EmArgs,
    /// Training fraction.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: rigline::Error| e.to_string())
}

fn parse_cost(s: &str) -> Result<CostMatrix, String> {
    s.parse().map_err(|e: rigline::Error| e.to_string())
}

enum Failure {
    /// Bad configuration detected before any work: exit 2.
    Usage(String),
    /// A stage failed: exit 1.
    Stage(StageError),
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        if e.stage == "config" {
            Failure::Usage(e.error.to_string())
        } else {
            Failure::Stage(e)
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn stage(name: &'static str) -> impl Fn(rigline::Error) -> Failure {
    move |error| Failure::Stage(StageError { stage: name, error })
}

impl EmArgs {
    fn apply(&self, s: &mut EmSettings) {
        if let Some(t) = self.em_tol {
            s.tol = t;
        }
        if let Some(m) = self.em_max_iter {
            s.max_iter = m;
        }
        if self.em_raw {
            s.scale = false;
        }
        if let Some(c) = &self.em_columns {
            s.columns = Some(c.clone());
        }
    }
}

impl SamplingArgs {
    fn regime(&self) -> Result<Option<Regime>, Failure> {
        if let Some(cm) = self.cost {
            return Ok(Some(Regime::Cost(Some(cm))));
        }
        if let Some(path) = &self.cost_file {
            return Ok(Some(Regime::Cost(Some(CostMatrix::load(path).map_err(usage)?))));
        }
        Ok(self.sample)
    }
}

/// Defaults, then the config file, then flags; the seed flag or
/// RIGLINE_SEED wins over a seed in the file.
fn pipeline_config(args: &PipelineArgs, seed: Option<u64>) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path.display(), e)))?;
        cfg.apply(&parse_key_values(&text).map_err(usage)?).map_err(usage)?;
    }
    if let Some(path) = &args.data {
        cfg.source = DataSource::Csv {
            path: path.clone(),
            has_labels: !args.unlabeled,
        };
    }
    if let Some(s) = args.synthetic {
        cfg.source = DataSource::Synthetic(s);
    }
    if let Some(l) = args.label {
        cfg.label = l;
    }
    args.em.apply(&mut cfg.em);
    if let Some(s) = args.split {
        cfg.split = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn master_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or(DEFAULT_SEED)
}

fn load_labeled(path: &Path) -> Result<Dataset, Failure> {
    load_csv(path, true).map_err(stage("load"))
}

fn print_distribution(d: &Dataset) {
    if let Ok(dist) = class_distribution(d) {
        for (class, share) in dist {
            println!("{:>8}: {:>7} ({:.4})", class, share.count, share.fraction);
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let registry = Registry::with_defaults();
    match cli.command {
        Command::Generate { synthetic, out } => {
            let d = generate_synthetic(&synthetic.config(master_seed(cli.seed))).map_err(stage("generate"))?;
            write_csv(&d, &out).map_err(stage("write"))?;
            println!("wrote {} rows to {}", d.len(), out.display());
            print_distribution(&d);
        }
        Command::Label {
            data,
            labeled,
            em,
            out,
            gmm,
        } => {
            let mut settings = EmSettings::default();
            em.apply(&mut settings);
            let d = load_csv(&data, labeled).map_err(stage("load"))?;
            let seed = seeds::derive(master_seed(cli.seed), STAGE_EM);
            let (model, labeled) = em_label(&d, &settings, seed).map_err(stage("label"))?;
            write_csv(&labeled, &out).map_err(stage("write"))?;
            if let Some(path) = gmm {
                write_atomic(&path, model.to_document().to_text().as_bytes()).map_err(stage("write"))?;
            }
            println!(
                "EM: {} iterations, converged {}, log-likelihood {:.6}",
                model.iterations,
                model.converged,
                model.loglik_trace.last().copied().unwrap_or(f64::NAN)
            );
            print_distribution(&labeled);
        }
        Command::Sample { data, sample, out } => {
            if let Regime::Cost(_) = sample {
                return Err(usage("cost-sensitive learning is applied by `train`, not `sample`"));
            }
            let d = load_labeled(&data)?;
            let seed = seeds::derive(master_seed(cli.seed), STAGE_SAMPLE);
            let s = sample.resample(&d, seed).map_err(stage("sample"))?;
            write_csv(&s, &out).map_err(stage("write"))?;
            println!("wrote {} rows to {}", s.len(), out.display());
            print_distribution(&s);
        }
        Command::Train {
            data,
            learner,
            sampling,
            model,
        } => {
            let regime = sampling.regime()?.unwrap_or(Regime::None);
            registry.learner(&learner).map_err(usage)?;
            let d = load_labeled(&data)?;
            let seed = master_seed(cli.seed);
            let m = rigline::pipeline::train_cell(
                &registry,
                &learner,
                &regime,
                &d,
                seeds::derive(seed, STAGE_SAMPLE),
                seeds::derive(seed, STAGE_TRAIN),
            )?;
            write_atomic(&model, m.to_document().to_text().as_bytes()).map_err(stage("write"))?;
            println!("trained {} on {} rows; model in {}", learner, d.len(), model.display());
        }
        Command::Evaluate {
            data,
            model,
            report,
            detail,
        } => {
            let d = load_labeled(&data)?;
            let mut table = CompareTable::new();
            for path in &model {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| stage("load")(rigline::Error::from(e)))?;
                let m = registry.load_text(&text).map_err(stage("load"))?;
                let r = evaluate(m.as_ref(), &d).map_err(stage("evaluate"))?;
                let name = path.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
                if detail {
                    print!("{}", r.detail(&name));
                }
                table.push(&name, Some(&r));
            }
            match report {
                Some(p) => write_atomic(&p, table.to_csv().as_bytes()).map_err(stage("write"))?,
                None => print!("{}", table.to_csv()),
            }
        }
        Command::Run {
            pipeline,
            sampling,
            learner,
            stack,
        } => {
            let mut cfg = pipeline_config(&pipeline, cli.seed)?;
            if let Some(r) = sampling.regime()? {
                cfg.regime = r;
            }
            if let Some(l) = learner.or(stack) {
                cfg.learner = l;
            }
            let out = run_pipeline(&cfg, &registry)?;
            println!(
                "trained {} on {} rows, tested on {}; artifacts in {}",
                cfg.learner,
                out.train_rows,
                out.test_rows,
                cfg.out_dir.display()
            );
            print!("{}", out.report.detail(&cfg.learner));
        }
        Command::Grid {
            pipeline,
            regimes,
            learners,
            stacks,
            no_stacks,
        } => {
            let cfg = pipeline_config(&pipeline, cli.seed)?;
            let mut grid = GridConfig::with_defaults(cfg);
            if !regimes.is_empty() {
                grid.regimes = regimes;
            }
            if !learners.is_empty() {
                grid.learners = learners;
            }
            if no_stacks {
                grid.stacks.clear();
            } else if !stacks.is_empty() {
                grid.stacks = stacks;
            }
            let out = run_experiment_grid(&grid, &registry)?;
            for (name, t) in &out.tables {
                println!("{}", name);
                print!("{}", t.to_csv());
            }
            print!("{}", out.summary);
        }
        Command::Learners => {
            for (name, description) in registry.learners() {
                println!("{:<6} {}", name, description);
            }
            println!("{:<6} stacked presets model1..model5, or stack:meta=..;base=..;folds=..", "stack");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {}", e);
            ExitCode::from(1)
        }
    }
}
