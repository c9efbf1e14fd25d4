use relnash_core::markets::{BlackScholesParams, SimulationGrid};
use relnash_core::meanfield::{
    mf_equilibrium, mf_fixed_point_check_sampled, n_agent_to_mf_convergence, PopulationAtom, PopulationSpec,
    ScalarDist, TypeDistribution, UtilityFamily,
};
use relnash_core::solvers::SolverConfig;
use relnash_core::MarketModel;

fn bs() -> MarketModel {
    MarketModel::BlackScholes(BlackScholesParams::one_dim(0.05, 0.2, 1.0))
}

fn sampled(samples: usize) -> PopulationSpec {
    PopulationSpec {
        family: UtilityFamily::Exponential,
        distribution: TypeDistribution::Sampled {
            xi: ScalarDist::Uniform { low: 1.0, high: 2.0 },
            delta: ScalarDist::Discrete { values: vec![1.0, 2.0], probs: vec![0.5, 0.5] },
            theta: ScalarDist::Uniform { low: 0.0, high: 1.0 },
            samples,
            seed: 17,
        },
    }
}

#[test]
fn sampled_fixed_point_within_three_se() {
    let cfg = SolverConfig::default();
    let pop = sampled(10_000);
    let mfe = mf_equilibrium(&pop, &bs(), 1.0, &cfg).unwrap();
    let paths = bs().generate_paths(1.0, &SimulationGrid::new(1, 50, 3)).unwrap();
    let check = mf_fixed_point_check_sampled(&mfe, &pop, &bs(), 1.0, &cfg, &paths, 99, 10_000).unwrap();
    assert!(check.max_z.unwrap() <= 3.0, "{check:?}");
}

#[test]
fn more_competition_raises_mean_field_amounts() {
    let cfg = SolverConfig::default();
    let atoms = |theta: f64| {
        PopulationSpec::atoms_spec(
            UtilityFamily::Exponential,
            vec![
                PopulationAtom { xi: 1.0, delta: 1.0, theta, prob: 0.3 },
                PopulationAtom { xi: 1.5, delta: 2.0, theta: theta * 0.5, prob: 0.7 },
            ],
        )
        .unwrap()
    };
    let mut last: Option<Vec<Vec<f64>>> = None;
    for k in 0..10 {
        let m = mf_equilibrium(&atoms(0.1 * k as f64), &bs(), 1.0, &cfg).unwrap();
        if let Some(prev) = &last {
            for (a, b) in m.phi_time0.iter().zip(prev) {
                assert!(a[0] > b[0]);
            }
        }
        last = Some(m.phi_time0);
    }
}

#[test]
fn point_mass_error_decays_like_one_over_n() {
    let pop = PopulationSpec::atoms_spec(
        UtilityFamily::Exponential,
        vec![PopulationAtom { xi: 1.0, delta: 1.0, theta: 0.5, prob: 1.0 }],
    )
    .unwrap();
    let c = n_agent_to_mf_convergence(&pop, &bs(), 1.0, &[10, 100, 1000], 1, 1, &SolverConfig::default()).unwrap();
    let slope = c.log_log_slope.unwrap();
    assert!((slope + 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn sampled_error_shrinks() {
    let c = n_agent_to_mf_convergence(&sampled(10_000), &bs(), 1.0, &[10, 100, 1000], 50, 5, &SolverConfig::default())
        .unwrap();
    assert!(c.points.windows(2).all(|w| w[1].mean_error < w[0].mean_error), "{c:?}");
    let slope = c.log_log_slope.unwrap();
    assert!((-0.7..=-0.3).contains(&slope), "{slope}");
}
