//! One function per subcommand; each returns a serializable document.

use relnash_core::equilibrium::EquilibriumSummary;
use relnash_core::markets::PathSet;
use relnash_core::meanfield::{
    mf_equilibrium, mf_fixed_point_check, mf_fixed_point_check_sampled, n_agent_to_mf_convergence, ConvergenceCurve,
    FixedPointCheck, MeanFieldSummary, TypeDistribution,
};
use relnash_core::simulation::{
    best_response_gap, build_report, product_grid, realize_equilibrium, welfare_gap, BestResponseReport, GainsScheme,
    SimulationReport, WelfareReport,
};
use relnash_core::{solve_game, GameSpec};
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, Perturbation, VerificationConfig};
use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumOutput {
    pub game: GameSpec,
    pub result: EquilibriumSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOutput {
    pub equilibrium: EquilibriumSummary,
    pub report: SimulationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOutput {
    pub pass: bool,
    pub seed: u64,
    pub n_paths: usize,
    pub exhaustive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    pub agents: Vec<BestResponseReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare: Option<WelfareReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldOutput {
    pub equilibrium: MeanFieldSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceCurve>,
}

pub fn equilibrium(cfg: &LoadedConfig) -> Result<EquilibriumOutput, CliError> {
    let game = cfg.game()?;
    let eq = solve_game(&game, &cfg.config.solver)?;
    Ok(EquilibriumOutput { result: eq.summary(&game), game })
}

pub struct Simulated {
    pub output: SimulateOutput,
    pub paths: PathSet,
}

pub fn simulate(cfg: &LoadedConfig, seed: Option<u64>, n_paths: Option<usize>) -> Result<Simulated, CliError> {
    let game = cfg.game()?;
    let grid = cfg.grid(seed, n_paths)?;
    let eq = solve_game(&game, &cfg.config.solver)?;
    let paths = game.market.generate_paths(game.horizon, &grid)?;
    let loss_levels = cfg.config.verification.as_ref().and_then(|v| v.loss_levels.clone());
    let report = build_report(&game, &eq, &paths, loss_levels.as_deref(), None)?;
    Ok(Simulated { output: SimulateOutput { equilibrium: eq.summary(&game), report }, paths })
}

pub struct Verified {
    pub output: VerifyOutput,
    pub paths: PathSet,
}

pub fn verify(cfg: &LoadedConfig, seed: Option<u64>, n_paths: Option<usize>) -> Result<Verified, CliError> {
    let game = cfg.game()?;
    let grid = cfg.grid(seed, n_paths)?;
    let vcfg = cfg.config.verification.clone().unwrap_or_default();
    let deviations = vcfg.deviation_grid().map_err(CliError::Config)?;
    let eq = solve_game(&game, &cfg.config.solver)?;
    let paths = game.market.generate_paths(game.horizon, &grid)?;
    let mut realized = realize_equilibrium(&game, &eq, &paths, GainsScheme::for_market(&game.market))?;
    if let Some(p) = &vcfg.perturb {
        realized = realized.perturbed(p.agent, p.asset, p.offset);
    }
    let agents =
        (0..game.n()).map(|i| best_response_gap(i, &realized, &game, &deviations)).collect::<Result<Vec<_>, _>>()?;
    let welfare = welfare_check(&vcfg, &realized, &game)?;
    let pass = agents.iter().all(|a| a.pass) && welfare.as_ref().is_none_or(|w| w.pass);
    Ok(Verified {
        output: VerifyOutput {
            pass,
            seed: grid.seed,
            n_paths: paths.n_paths(),
            exhaustive: paths.is_exhaustive(),
            perturbation: vcfg.perturb.clone(),
            agents,
            welfare,
        },
        paths,
    })
}

fn welfare_check(
    vcfg: &VerificationConfig,
    realized: &relnash_core::simulation::RealizedEquilibrium,
    game: &GameSpec,
) -> Result<Option<WelfareReport>, CliError> {
    let Some(w) = &vcfg.welfare else { return Ok(None) };
    let offsets = relnash_core::simulation::DeviationGrid::uniform(w.offsets.lo, w.offsets.hi, w.offsets.step);
    let joint = product_grid(game.n(), &offsets);
    Ok(Some(welfare_gap(realized, game, &w.betas, &joint, w.asset, w.offsets.step)?))
}

pub fn meanfield(cfg: &LoadedConfig, seed: Option<u64>, n_paths: Option<usize>) -> Result<MeanFieldOutput, CliError> {
    let pop = cfg.population_spec()?;
    let pcfg = cfg.config.population.as_ref().expect("validated population");
    let market = &cfg.config.market;
    let horizon = cfg.config.horizon;
    let solver = &cfg.config.solver;
    let mfe = mf_equilibrium(&pop, market, horizon, solver)?;
    let fixed_point = match cfg.config.simulation {
        Some(_) => {
            let grid = cfg.grid(seed, n_paths)?;
            let paths = market.generate_paths(horizon, &grid)?;
            Some(match pop.distribution {
                TypeDistribution::Atoms { .. } => mf_fixed_point_check(&mfe, market, &paths)?,
                TypeDistribution::Sampled { .. } => mf_fixed_point_check_sampled(
                    &mfe,
                    &pop,
                    market,
                    horizon,
                    solver,
                    &paths,
                    grid.seed,
                    pcfg.fixed_point_samples,
                )?,
            })
        }
        None => None,
    };
    let convergence = match &pcfg.convergence {
        Some(c) => Some(n_agent_to_mf_convergence(
            &pop,
            market,
            horizon,
            &c.n_list,
            c.replications,
            seed.unwrap_or(c.seed),
            solver,
        )?),
        None => None,
    };
    Ok(MeanFieldOutput { equilibrium: mfe.summary(), fixed_point, convergence })
}
