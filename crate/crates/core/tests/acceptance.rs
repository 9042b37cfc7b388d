//! Acceptance suite: runs every criterion and prints one PASS/FAIL line each.
//! Built with `harness = false` so the lines always reach the output.

mod common;

use rand::Rng;
use rigline::dataset::{generate_synthetic, split_train_test, ClassLabel, Dataset, Standardizer, SyntheticGenConfig};
use rigline::em::{em_fit, em_loglik};
use rigline::evaluation::{evaluate, roc_auc, EvalReport};
use rigline::imbalance::{smote_with_origins, undersample, Regime, SmoteConfig};
use rigline::learners::mlp::Mlp;
use rigline::learners::tree::train_cart;
use rigline::pipeline::{
    prepare, run_experiment_grid, train_cell, DataSource, GridConfig, PipelineConfig, SyntheticSpec, STAGE_SAMPLE,
    STAGE_SPLIT, STAGE_TRAIN,
};
use rigline::seeds;
use rigline::svm::{kkt_report, smo_train, smo_train_observed, KernelSpec, SmoConfig, SvmModel};
use rigline::Registry;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 200 random problems of 2 to 4 points, cycling C and kernel.
fn tiny_problems() -> Vec<(Dataset, SmoConfig)> {
    let mut rng = seeds::rng(0xC1);
    (0..200)
        .map(|i| {
            let n = rng.random_range(2..=4);
            let p = rng.random_range(1..=3);
            let d = common::random_dataset(&mut rng, n, p);
            let kernel = if i % 2 == 0 {
                KernelSpec::Linear
            } else {
                KernelSpec::Rbf {
                    gamma: [0.5, 1.0, 2.0][rng.random_range(0..3)],
                }
            };
            let cfg = SmoConfig {
                c: [0.1, 1.0, 10.0][(i / 2) % 3],
                seed: i as u64,
                ..SmoConfig::new(kernel)
            };
            (d, cfg)
        })
        .collect()
}

fn gram(d: &Dataset, kernel: KernelSpec) -> Vec<Vec<f64>> {
    (0..d.len())
        .map(|i| {
            (0..d.len())
                .map(|j| match kernel {
                    KernelSpec::Linear => common::kernel_linear(d.features(i), d.features(j)),
                    KernelSpec::Rbf { gamma } => common::kernel_rbf(gamma, d.features(i), d.features(j)),
                    KernelSpec::Polynomial { .. } => unreachable!(),
                })
                .collect()
        })
        .collect()
}

fn signs(d: &Dataset) -> Vec<f64> {
    d.labels().unwrap().into_iter().map(ClassLabel::sign).collect()
}

fn full_alphas(m: &SvmModel, n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n];
    for sv in &m.support {
        a[sv.index] = sv.alpha;
    }
    a
}

fn smo_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (t, (d, cfg)) in tiny_problems().iter().enumerate() {
        let mut step_violation = None;
        let m = smo_train_observed(d, cfg, &mut |s| {
            let boxed = s.alphas().iter().all(|&a| (0.0..=s.c()).contains(&a));
            if step_violation.is_none() && (!boxed || s.equality_residual() > 1e-9) {
                step_violation = Some(s.steps());
            }
        })
        .map_err(|e| e.to_string())?;
        let y = signs(d);
        let k = gram(d, cfg.kernel);
        let w = common::dual_value(&full_alphas(&m, d.len()), &y, &k);
        let oracle = common::qp_grid_optimum(&y, &k, cfg.c);
        worst_gap = worst_gap.max(oracle - w);
        if !m.converged || w < oracle - 1e-4 || step_violation.is_some() {
            failures.push(format!(
                "#{} converged={} W={:.6} oracle={:.6} step violation {:?}",
                t, m.converged, w, oracle, step_violation
            ));
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "200 problems, max(oracle - W) = {:.2e}, {:.1}s{}",
            worst_gap,
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn kkt_at_convergence() -> Outcome {
    let mut violations = 0;
    for (d, cfg) in tiny_problems() {
        let m = smo_train(&d, &cfg).map_err(|e| e.to_string())?;
        if m.converged {
            violations += kkt_report(&m, &d, 1e-3).map_err(|e| e.to_string())?.total();
        }
    }
    let raw = generate_synthetic(&SyntheticGenConfig::sensor_default(500, 0.13, 500, 2.0)).map_err(|e| e.to_string())?;
    let d = Standardizer::fit(&raw).map_err(|e| e.to_string())?.apply(&raw);
    let mut large = Vec::new();
    for kernel in [KernelSpec::Rbf { gamma: 0.2 }, KernelSpec::Linear] {
        let m = smo_train(&d, &SmoConfig::new(kernel)).map_err(|e| e.to_string())?;
        let r = kkt_report(&m, &d, 1e-3).map_err(|e| e.to_string())?;
        large.push(format!("{} converged={} violations={}", kernel, m.converged, r.total()));
        if !m.converged {
            violations += 1;
        }
        violations += r.total();
    }
    check(
        violations == 0,
        format!("tiny problems and 500 rows: {} violations ({})", violations, large.join(", ")),
    )
}

fn analytic_two_points() -> Outcome {
    let d = Dataset::from_rows(vec![vec![1.0], vec![-1.0]], vec![ClassLabel::Normal, ClassLabel::Failure])
        .map_err(|e| e.to_string())?;
    let m = smo_train(&d, &SmoConfig::new(KernelSpec::Linear)).map_err(|e| e.to_string())?;
    let a = full_alphas(&m, 2);
    let ok = (a[0] - 0.5).abs() <= 1e-9
        && (a[1] - 0.5).abs() <= 1e-9
        && m.b.abs() <= 1e-9
        && (m.dual_objective - 0.5).abs() <= 1e-9;
    check(ok, format!("alpha = ({}, {}), b = {}, W = {}", a[0], a[1], m.b, m.dual_objective))
}

fn em_monotone() -> Outcome {
    let mut rng = seeds::rng(0xE4);
    let mut worst_drop = 0.0f64;
    let mut worst_moment = 0.0f64;
    for t in 0..100u64 {
        let n = rng.random_range(8..80);
        let p = rng.random_range(1..=4);
        let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let c = &centers[rng.random_range(0..3)];
                c.iter().map(|m| m + rng.random_range(-1.0..1.0)).collect()
            })
            .collect();
        let d = Dataset::from_rows(x.clone(), vec![ClassLabel::Normal; n]).map_err(|e| e.to_string())?;
        let k = rng.random_range(1..=4);
        let m = em_fit(&d, k, t, 1e-10, 300).map_err(|e| e.to_string())?;
        for w in m.loglik_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }

        let one = em_fit(&d, 1, t, 1e-10, 50).map_err(|e| e.to_string())?;
        for j in 0..p {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
            worst_moment = worst_moment
                .max((one.means[0][j] - mean).abs())
                .max((one.variances[0][j] - var).abs());
        }
        let _ = em_loglik(&m, &d).map_err(|e| e.to_string())?;
    }
    check(
        worst_drop <= 1e-9 && worst_moment <= 1e-10,
        format!("largest per-step decrease {:.2e}, K=1 moment error {:.2e}", worst_drop, worst_moment),
    )
}

fn smote_geometry() -> Outcome {
    let mut rng = seeds::rng(0x5E);
    let (n_major, n_minor) = (10_500, 500);
    let x: Vec<Vec<f64>> = (0..n_major + n_minor)
        .map(|i| {
            let shift = if i < n_major { 0.0 } else { 2.0 };
            (0..5).map(|_| rng.random_range(-1.0..1.0) * 10.0 + shift).collect()
        })
        .collect();
    let y: Vec<ClassLabel> = (0..n_major + n_minor)
        .map(|i| if i < n_major { ClassLabel::Normal } else { ClassLabel::Failure })
        .collect();
    let d = Dataset::from_rows(x, y).map_err(|e| e.to_string())?;
    let cfg = SmoteConfig {
        k_neighbors: 5,
        target_ratio: 1.0,
        seed: 9,
    };
    let (out, origins) = smote_with_origins(&d, &cfg).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (s, o) in origins.iter().enumerate() {
        let row = out.features(d.len() + s);
        let (t, residual) = common::colinearity(d.features(o.base), d.features(o.neighbor), row);
        worst = worst.max(residual);
        if !(-1e-9..=1.0 + 1e-9).contains(&t) {
            worst = f64::INFINITY;
        }
    }
    let counts = out.class_counts().map_err(|e| e.to_string())?;
    let contract = (counts[1] as i64 - n_major as i64).abs() <= 1;
    let half = smote_with_origins(&d, &SmoteConfig { target_ratio: 0.5, ..cfg }).map_err(|e| e.to_string())?.0;
    let half_counts = half.class_counts().map_err(|e| e.to_string())?;
    let half_ok = (half_counts[1] as i64 - (n_major as i64 / 2)).abs() <= 1;
    let under = undersample(&d, 3).map_err(|e| e.to_string())?.class_counts().map_err(|e| e.to_string())?;
    check(
        origins.len() == 10_000 && worst <= 1e-9 && contract && half_ok && under[0] == under[1],
        format!(
            "{} synthetic rows, max off-line residual {:.2e}, counts {:?} (ratio 0.5: {:?}), undersampled {:?}",
            origins.len(),
            worst,
            counts,
            half_counts,
            under
        ),
    )
}

fn auc_oracle() -> Outcome {
    let mut rng = seeds::rng(0xA6);
    let mut worst = 0.0f64;
    for t in 0..1000 {
        let n = rng.random_range(2..=100);
        let tied = t % 2 == 0;
        let mut s: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let v: f64 = rng.random();
                let score = if tied { (v * 5.0).floor() / 5.0 } else { v };
                (score, rng.random_bool(0.4))
            })
            .collect();
        s[0].1 = true;
        s[1].1 = false;
        let fast = roc_auc(&s).map_err(|e| e.to_string())?;
        worst = worst.max((fast - common::pairwise_auc(&s)).abs());
    }
    let hand = [
        (vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)], 1.0),
        (vec![(0.9, true), (0.3, true), (0.5, false), (0.1, false)], 0.75),
        (vec![(0.5, true), (0.5, true), (0.5, false), (0.5, false)], 0.5),
    ];
    let mut hand_ok = true;
    for (s, want) in &hand {
        hand_ok &= roc_auc(s).map_err(|e| e.to_string())? == *want;
    }
    check(
        worst <= 1e-12 && hand_ok,
        format!("max |rank - pairwise| = {:.2e} over 1000 sets; hand cases exact: {}", worst, hand_ok),
    )
}

fn mlp_gradient() -> Outcome {
    let mut rng = seeds::rng(0x77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let inputs = rng.random_range(1..=5);
        let hidden = rng.random_range(1..=6);
        let rows = rng.random_range(1..=10);
        let x: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<usize> = (0..rows).map(|_| rng.random_range(0..2)).collect();
        let params: Vec<f64> = (0..Mlp::param_count(inputs, hidden)).map(|_| rng.random_range(-1.5..1.5)).collect();
        let net = Mlp::new(inputs, hidden, params.clone()).map_err(|e| e.to_string())?;
        let xs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let analytic = net.gradient(&xs, &y);
        let numeric = common::numeric_gradient(&params, 1e-5, |p| {
            Mlp::new(inputs, hidden, p.to_vec()).unwrap().loss(&xs, &y)
        });
        worst = worst.max(common::relative_error(&analytic, &numeric));
    }
    check(worst < 1e-4, format!("max relative error {:.2e} over 100 points", worst))
}

fn cart_oracle() -> Outcome {
    let mut rng = seeds::rng(0xCA);
    let mut mismatches = Vec::new();
    for t in 0..50 {
        let n = rng.random_range(2..=20);
        let p = rng.random_range(1..=4);
        let discrete = t % 2 == 0;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| if discrete { rng.random_range(0..4) as f64 } else { rng.random_range(-1.0..1.0) })
                    .collect()
            })
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let labels = y.iter().map(|&c| ClassLabel::from_index(c)).collect();
        let d = Dataset::from_rows(x.clone(), labels).map_err(|e| e.to_string())?;
        let tree = train_cart(&d, usize::MAX, 1).map_err(|e| e.to_string())?;
        let candidates = common::all_splits(&x, &y);
        let best = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        let improves = candidates.iter().any(|c| common::gini_of(&y) - c.2 > 1e-12);
        let ok = match tree.root_split() {
            None => !improves,
            Some((f, th)) => {
                let tied: Vec<_> = candidates.iter().filter(|c| c.2 <= best + 1e-12).collect();
                improves && tied.iter().any(|c| c.0 == f && c.1 == th)
            }
        };
        if !ok {
            mismatches.push(format!("#{} tree {:?} oracle best {:.6}", t, tree.root_split(), best));
        }
    }
    check(
        mismatches.is_empty(),
        format!("50 datasets, {} mismatches{}", mismatches.len(), if mismatches.is_empty() { String::new() } else { format!(": {}", mismatches.join("; ")) }),
    )
}

/// Test-set report for one learner on the default synthetic set under `seed`.
fn desk_report(registry: &Registry, seed: u64, learner: &str, regime: &Regime) -> Result<EvalReport, String> {
    let cfg = PipelineConfig {
        source: DataSource::Synthetic(SyntheticSpec::default()),
        seed,
        ..PipelineConfig::default()
    };
    let (data, _) = prepare(&cfg).map_err(|e| e.to_string())?;
    let (train, test) = split_train_test(&data, cfg.split, cfg.stage_seed(STAGE_SPLIT), true).map_err(|e| e.to_string())?;
    let m = train_cell(
        registry,
        learner,
        regime,
        &train,
        cfg.stage_seed(STAGE_SAMPLE),
        cfg.stage_seed(STAGE_TRAIN),
    )
    .map_err(|e| e.to_string())?;
    evaluate(m.as_ref(), &test).map_err(|e| e.to_string())
}

fn stack_beats_smo() -> Outcome {
    let start = Instant::now();
    let registry = Registry::with_defaults();
    let mut ok = true;
    let mut lines = Vec::new();
    for (i, seed) in [rigline::pipeline::DEFAULT_SEED, 7, 2024].into_iter().enumerate() {
        let stack = desk_report(&registry, seed, "model3", &Regime::None)?.summary.roc_auc;
        let smo = desk_report(&registry, seed, "smo", &Regime::None)?.summary.roc_auc;
        ok &= stack >= smo - 0.005;
        if i == 0 {
            ok &= stack > smo;
        }
        lines.push(format!("seed {}: model3 {:.4} vs smo {:.4}", seed, stack, smo));
    }
    let elapsed = start.elapsed();
    check(
        ok && elapsed < Duration::from_secs(300),
        format!("{}; {:.1}s", lines.join(", "), elapsed.as_secs_f64()),
    )
}

fn undersampling_lowers_fp() -> Outcome {
    let registry = Registry::with_defaults();
    let seed = rigline::pipeline::DEFAULT_SEED;
    let plain = desk_report(&registry, seed, "smo", &Regime::None)?.summary.fp_rate;
    let under = desk_report(&registry, seed, "smo", &Regime::Under)?.summary.fp_rate;
    check(under < plain, format!("weighted FP rate: none {:.4}, under {:.4}", plain, under))
}

fn grid_csvs(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = PipelineConfig {
        out_dir: dir.to_path_buf(),
        ..PipelineConfig::default()
    };
    run_experiment_grid(&GridConfig::with_defaults(cfg), &Registry::with_defaults()).map_err(|e| e.to_string())?;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    Ok(files)
}

fn grid_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = grid_csvs(a.path())?;
    let second = grid_csvs(b.path())?;
    let names: Vec<&str> = first.iter().map(|f| f.0.as_str()).collect();
    check(
        first.len() == 6 && first == second,
        format!("{} CSVs, identical: {} ({})", first.len(), first == second, names.join(" ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("SMO matches grid QP oracle; box and equality at every step", smo_oracle),
        ("zero KKT violations at convergence", kkt_at_convergence),
        ("analytic two-point solution", analytic_two_points),
        ("EM log-likelihood nondecreasing; K=1 sample moments", em_monotone),
        ("SMOTE colinearity and class-count contract", smote_geometry),
        ("rank AUC equals pairwise AUC", auc_oracle),
        ("MLP gradient against finite differences", mlp_gradient),
        ("CART root split equals exhaustive search", cart_oracle),
        ("stacked model3 ROC vs standalone SMO", stack_beats_smo),
        ("undersampling lowers SMO weighted FP rate", undersampling_lowers_fp),
        ("default grid is byte-identical across runs", grid_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {} {}: {}", i + 1, status, name, detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
