use relnash_core::markets::{CrrParams, HestonParams, JumpAtom, LevyJumpParams, PathSet, SimulationGrid};
use relnash_core::stats::pairwise_sum;
use relnash_core::MarketModel;

fn levy() -> MarketModel {
    MarketModel::LevyJump(LevyJumpParams {
        mu: vec![0.05, 0.03],
        sigma: vec![vec![0.2, 0.0], vec![0.05, 0.25]],
        s0: vec![1.0, 2.0],
        jump_intensity: 3.0,
        atoms: vec![JumpAtom { size: vec![-0.9, -0.5], prob: 0.5 }, JumpAtom { size: vec![1.5, 0.2], prob: 0.5 }],
    })
}

fn heston() -> MarketModel {
    MarketModel::Heston(HestonParams {
        lambda_mpr: 1.0,
        kappa: 2.0,
        mean_level: 0.04,
        vol_of_vol: 0.3,
        rho: -0.7,
        z0: 0.04,
        s0: 1.0,
    })
}

fn in_pool(threads: usize, market: &MarketModel, grid: &SimulationGrid) -> PathSet {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| market.generate_paths(1.0, grid).unwrap())
}

#[test]
fn paths_do_not_depend_on_worker_count() {
    let grid = SimulationGrid::new(50, 2_000, 42);
    for market in [levy(), heston()] {
        let a = in_pool(1, &market, &grid);
        let b = in_pool(4, &market, &grid);
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.variance, b.variance);
        assert_eq!(a.jump_counts, b.jump_counts);
    }
}

#[test]
fn simulated_prices_stay_positive() {
    let grid = SimulationGrid::new(100, 2_000, 7);
    for market in [levy(), heston()] {
        let ps = market.generate_paths(1.0, &grid).unwrap();
        assert!(ps.prices.iter().all(|&s| s > 0.0));
    }
}

#[test]
fn exhaustive_tree_weights_sum_to_one() {
    for steps in 1..=12 {
        let m = MarketModel::Crr(CrrParams { u: 1.3, d: 0.8, p: 0.55, s0: 1.0, steps });
        let ps = m.generate_paths(1.0, &SimulationGrid::new(steps, 1, 0)).unwrap();
        let w = ps.weights.unwrap();
        assert_eq!(w.len(), 1 << steps);
        assert!((pairwise_sum(&w) - 1.0).abs() <= 1e-15, "{steps}: {}", pairwise_sum(&w) - 1.0);
    }
}
