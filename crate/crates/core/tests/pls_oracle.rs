mod common;

use membench::pipeline::run_pls_branch;
use membench::{fit_pls, Dataset, Property, RunConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn deterministic_loocv_matches_oracle() {
    let ds = Dataset::canonical();
    let branch = run_pls_branch(&ds, &RunConfig::new(vec![42], false).unwrap()).unwrap();
    for p in Property::ALL {
        let oracle = common::oracle_loocv(&ds, p);
        for fit in &branch.fits {
            let m = fit.models.iter().find(|m| m.property == p).unwrap();
            let (k, pred) = oracle[fit.plan.fold_index - 1];
            assert_eq!(m.selection.chosen_k, k, "{p} fold {}", fit.plan.fold_index);
            assert!((m.prediction - pred).abs() < 1e-8, "{p} fold {}: {} vs {pred}", fit.plan.fold_index, m.prediction);
        }
    }
}

#[test]
fn deterministic_mode_ignores_seed() {
    let ds = Dataset::canonical();
    let a = run_pls_branch(&ds, &RunConfig::new(vec![1], false).unwrap()).unwrap();
    let b = run_pls_branch(&ds, &RunConfig::new(vec![999], false).unwrap()).unwrap();
    assert_eq!(a.records, b.records);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_matches_krylov_oracle(
        xs in prop::collection::vec(-3.0f64..3.0, 40),
        ys in prop::collection::vec(-50.0f64..50.0, 10),
        t in prop::collection::vec(-3.0f64..3.0, 4),
        k in 1usize..=4,
    ) {
        let x = DMatrix::from_row_slice(10, 4, &xs);
        let y = DVector::from_vec(ys.clone());
        // Keep the design comfortably full-rank.
        prop_assume!(x.clone().svd(false, false).singular_values.min() > 0.3);
        let rows: Vec<Vec<f64>> = (0..10).map(|i| xs[i * 4..i * 4 + 4].to_vec()).collect();
        let got = fit_pls(&x, &y, k).unwrap().predict(&t);
        let want = common::oracle_predict(&rows, &ys, k, &t);
        prop_assert!((got - want).abs() < 1e-7 * (1.0 + want.abs()), "k={} {} vs {}", k, got, want);
    }
}
