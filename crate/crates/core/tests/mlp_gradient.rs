mod common;

use proptest::prelude::*;
use rigline::learners::mlp::Mlp;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backprop_matches_central_differences(
        (inputs, hidden, x, y, params) in (1usize..=4, 1usize..=5, 1usize..=8).prop_flat_map(|(i, h, n)| (
            Just(i),
            Just(h),
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, i), n),
            prop::collection::vec(0usize..2, n),
            prop::collection::vec(-1.5f64..1.5, Mlp::param_count(i, h)),
        ))
    ) {
        let net = Mlp::new(inputs, hidden, params.clone()).unwrap();
        let xs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let analytic = net.gradient(&xs, &y);
        let numeric = common::numeric_gradient(&params, 1e-5, |p| {
            Mlp::new(inputs, hidden, p.to_vec()).unwrap().loss(&xs, &y)
        });
        let err = common::relative_error(&analytic, &numeric);
        prop_assert!(err < 1e-4, "relative error {}", err);
    }
}

#[test]
fn wrong_parameter_count_is_rejected() {
    assert!(Mlp::new(3, 2, vec![0.0; Mlp::param_count(3, 2) - 1]).is_err());
}
