mod common;

use proptest::prelude::*;
use rigline::dataset::{ClassLabel, Dataset};
use rigline::svm::{kkt_report, smo_train, smo_train_observed, KernelSpec, SmoConfig};

fn problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, f64, bool)> {
    (2usize..=4, 1usize..=3).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, p), n),
            prop::collection::vec(any::<bool>(), n),
            prop::sample::select(vec![0.1, 1.0, 10.0]),
            any::<bool>(),
        )
    })
}

fn build(x: Vec<Vec<f64>>, mut pos: Vec<bool>) -> Dataset {
    pos[0] = true;
    pos[1] = false;
    let y = pos.into_iter().map(|p| if p { ClassLabel::Normal } else { ClassLabel::Failure }).collect();
    Dataset::from_rows(x, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn steps_stay_feasible_and_never_lower_the_dual((x, pos, c, rbf) in problem()) {
        let d = build(x, pos);
        let kernel = if rbf { KernelSpec::Rbf { gamma: 1.0 } } else { KernelSpec::Linear };
        let cfg = SmoConfig { c, ..SmoConfig::new(kernel) };
        let mut trace = vec![0.0];
        let mut feasible = true;
        let m = smo_train_observed(&d, &cfg, &mut |s| {
            feasible &= s.alphas().iter().all(|&a| (0.0..=s.c()).contains(&a));
            feasible &= s.equality_residual() <= 1e-9;
            trace.push(s.dual_objective());
        }).unwrap();
        prop_assert!(feasible);
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "dual fell from {} to {}", w[0], w[1]);
        }
        prop_assert!(m.converged);
        prop_assert_eq!(kkt_report(&m, &d, 1e-3).unwrap().total(), 0);
    }

    #[test]
    fn reaches_the_grid_optimum((x, pos, c, _rbf) in problem()) {
        let d = build(x, pos);
        let m = smo_train(&d, &SmoConfig { c, ..SmoConfig::new(KernelSpec::Linear) }).unwrap();
        let y: Vec<f64> = d.labels().unwrap().into_iter().map(ClassLabel::sign).collect();
        let k: Vec<Vec<f64>> = (0..d.len())
            .map(|i| (0..d.len()).map(|j| common::kernel_linear(d.features(i), d.features(j))).collect())
            .collect();
        let oracle = common::qp_grid_optimum(&y, &k, c);
        prop_assert!(m.dual_objective >= oracle - 1e-4, "W {} oracle {}", m.dual_objective, oracle);
    }
}

#[test]
fn separable_line_gets_the_maximum_margin() {
    // points at -2, -1 | 1, 3: the margin boundary sits at 0 with |w| = 1
    let d = Dataset::from_rows(
        vec![vec![-2.0], vec![-1.0], vec![1.0], vec![3.0]],
        vec![ClassLabel::Failure, ClassLabel::Failure, ClassLabel::Normal, ClassLabel::Normal],
    )
    .unwrap();
    let m = smo_train(&d, &SmoConfig { c: 100.0, ..SmoConfig::new(KernelSpec::Linear) }).unwrap();
    assert!(m.decision_value(&[0.0]).unwrap().abs() < 1e-9);
    assert!((m.decision_value(&[1.0]).unwrap() - 1.0).abs() < 1e-9);
    assert!((m.dual_objective - 0.5).abs() < 1e-9);
}
