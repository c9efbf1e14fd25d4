use ndarray::Array3;
use proptest::prelude::*;
use relnash_core::game::{aggregate_nash, solve_linear_system_direct, theta_hat, verify_linear_system, NashAggregator};
use relnash_core::strategy::{StrategyProcess, Unit};

fn weights(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    n.prop_flat_map(|n| prop::collection::vec(0.0..=1.0f64, n))
}

/// `n` path-dependent strategies of shape `(2, 3, d)`.
fn family(n: usize, d: usize) -> impl Strategy<Value = Vec<StrategyProcess>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6 * d), n).prop_map(move |vals| {
        vals.into_iter()
            .map(|v| StrategyProcess::new(Unit::Amounts, Array3::from_shape_vec((2, 3, d), v).unwrap()).unwrap())
            .collect()
    })
}

fn game_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<StrategyProcess>)> {
    (1usize..=20, 1usize..=5).prop_flat_map(|(n, d)| (prop::collection::vec(0.0..=1.0f64, n), family(n, d)))
}

fn max_diff(a: &[StrategyProcess], b: &[StrategyProcess]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.values().iter().zip(y.values().iter()).map(|(u, v)| (u - v).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn theta_hat_below_bound(w in weights(1..=50)) {
        let n = w.len() as f64;
        prop_assert!(theta_hat(&w).unwrap() < n / (n + 1.0));
    }

    #[test]
    fn theta_hat_sandwich(w in weights(1..=50)) {
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let h = theta_hat(&w).unwrap();
        prop_assert!(mean * n / (n + 1.0) <= h + 1e-15);
        prop_assert!(h <= mean + 1e-15);
    }

    #[test]
    fn aggregation_solves_linear_system((w, psi) in game_inputs()) {
        let phi = aggregate_nash(&psi, &w).unwrap();
        prop_assert!(verify_linear_system(&phi, &psi, &w).unwrap() <= 1e-12);
    }

    #[test]
    fn direct_solve_matches_closed_form((w, psi) in game_inputs()) {
        let phi = aggregate_nash(&psi, &w).unwrap();
        let direct = solve_linear_system_direct(&psi, &w).unwrap();
        prop_assert!(max_diff(&phi, &direct) <= 1e-10);
    }

    #[test]
    fn aggregation_is_linear(
        (w, psi, psi2) in (1usize..=10, 1usize..=3)
            .prop_flat_map(|(n, d)| (prop::collection::vec(0.0..=1.0f64, n), family(n, d), family(n, d))),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let combo: Vec<StrategyProcess> = psi
            .iter()
            .zip(&psi2)
            .map(|(x, y)| StrategyProcess::new(Unit::Amounts, x.values() * a + y.values() * b).unwrap())
            .collect();
        let lhs = aggregate_nash(&combo, &w).unwrap();
        let p1 = aggregate_nash(&psi, &w).unwrap();
        let p2 = aggregate_nash(&psi2, &w).unwrap();
        let rhs: Vec<StrategyProcess> = p1
            .iter()
            .zip(&p2)
            .map(|(x, y)| StrategyProcess::new(Unit::Amounts, x.values() * a + y.values() * b).unwrap())
            .collect();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-11);
    }

    #[test]
    fn more_competition_means_more_investment(
        (w, psi, i) in (2usize..=10).prop_flat_map(|n| (
            prop::collection::vec(0.0..=0.99f64, n),
            prop::collection::vec(0.01..5.0f64, n),
            0..n,
        )),
        h in 0.001..0.01f64,
    ) {
        let base = NashAggregator::new(&w).unwrap().apply(&psi)[i];
        let mut bumped = w.clone();
        bumped[i] += h;
        let up = NashAggregator::new(&bumped).unwrap().apply(&psi)[i];
        prop_assert!(up > base);
    }

    #[test]
    fn zero_weights_are_identity(psi in prop::collection::vec(-5.0..5.0f64, 1..20)) {
        let w = vec![0.0; psi.len()];
        prop_assert_eq!(NashAggregator::new(&w).unwrap().apply(&psi), psi);
    }
}
