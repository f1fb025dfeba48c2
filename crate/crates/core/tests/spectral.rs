mod common;

use apflow::coefficients::HomotopyParam;
use apflow::propagator::{linear_propagate, PropagatorContext};
use apflow::spectral_field::{Field, Grid};
use apflow::symbols::HullPhase;
use proptest::prelude::*;

use common::*;

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip(values in field_strategy(64)) {
        let grid = Grid::new(1, 3.0, 64).unwrap();
        let f = Field::from_values(grid, values.clone()).unwrap();
        let back = Field::from_spectrum(grid, f.spectrum().to_vec());
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for (a, b) in values.iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn parseval_and_tail_bound(values in field_strategy(256), k in 0.0..8.0f64) {
        let grid = Grid::new(2, 8.0, 16).unwrap();
        let f = Field::from_values(grid, values).unwrap();
        let l2 = f.l2_norm();
        prop_assert!((l2 - f.l2_norm_spectral()).abs() <= 1e-12 * (1.0 + l2));
        prop_assert!(f.h1_norm() >= l2 * (1.0 - 1e-12));
        prop_assert!(f.tail_mass(k).unwrap() <= l2 * l2 * (1.0 + 1e-12));
    }

    #[test]
    fn propagator_contracts_and_composes(values in field_strategy(64), omega in 0.5..50.0f64, angle in 0.0..6.28f64, r in 0.0..1.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let grid = Grid::new(1, 4.0, 64).unwrap();
        let u = Field::from_values(grid, values).unwrap();
        let phase = HullPhase::new(vec![1.0], vec![angle]).unwrap();
        let ctx = PropagatorContext::new(oscillating_a(), HomotopyParam::FULL, omega, phase).unwrap();
        let (s, t) = (r, r + a + b);
        let whole = linear_propagate(&ctx, s, t, &u).unwrap();
        prop_assert!(whole.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
        let mid = linear_propagate(&ctx, s, r + a, &u).unwrap();
        let two = linear_propagate(&ctx, r + a, t, &mid).unwrap();
        prop_assert!(whole.l2_distance(&two).unwrap() <= 1e-12 * (1.0 + u.l2_norm()));
    }
}
