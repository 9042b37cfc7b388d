mod common;

use proptest::prelude::*;
use rigline::dataset::{ClassLabel, Dataset};
use rigline::learners::tree::train_cart;

fn table() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..=20, 1usize..=4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..5).prop_map(f64::from), p), n),
            prop::collection::vec(0usize..2, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_split_is_an_exhaustive_minimum((x, y) in table()) {
        let labels = y.iter().map(|&c| ClassLabel::from_index(c)).collect();
        let d = Dataset::from_rows(x.clone(), labels).unwrap();
        let tree = train_cart(&d, usize::MAX, 1).unwrap();
        let candidates = common::all_splits(&x, &y);
        let best = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        let improves = candidates.iter().any(|c| common::gini_of(&y) - c.2 > 1e-12);
        match tree.root_split() {
            None => prop_assert!(!improves),
            Some((f, t)) => {
                let imp = common::split_impurity(&x, &y, f, t);
                prop_assert!(imp <= best + 1e-12, "tree {} vs best {}", imp, best);
            }
        }
    }

    #[test]
    fn every_row_reaches_a_leaf_that_counted_it((x, y) in table()) {
        let labels: Vec<ClassLabel> = y.iter().map(|&c| ClassLabel::from_index(c)).collect();
        let d = Dataset::from_rows(x.clone(), labels.clone()).unwrap();
        let tree = train_cart(&d, usize::MAX, 1).unwrap();
        let mut seen = std::collections::BTreeMap::new();
        for (i, row) in x.iter().enumerate() {
            let leaf = tree.leaf_of(row);
            prop_assert!(tree.leaf_counts(leaf)[labels[i].index()] >= 1);
            *seen.entry(leaf).or_insert(0usize) += 1;
        }
        for (leaf, n) in seen {
            let c = tree.leaf_counts(leaf);
            prop_assert_eq!(c[0] + c[1], n);
        }
    }
}
