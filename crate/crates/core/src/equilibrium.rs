//! n-agent Nash equilibrium: single-agent solves plus linear aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_feasibility, verify_linear_system, Feasibility, GameSpec, NashAggregator, UtilityKind};
use crate::solvers::{solve_single_agent, SingleAgentSolution, SolverConfig, SolverDiagnostics};
use crate::strategy::{StrategyProcess, Unit};

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    /// Time-0 invested amounts of the single-agent optima, per agent and asset.
    pub psi_star: Vec<Vec<f64>>,
    /// Time-0 invested amounts of the equilibrium strategies.
    pub phi_star: Vec<Vec<f64>>,
    pub theta_hat: f64,
    /// `C_i` with `φ^i = C_i · u` when every `ψ^{i,*} = δ_i · u` for a common `u`.
    pub aggregation_constants: Option<Vec<f64>>,
    pub reduced_capitals: Vec<f64>,
    pub feasibility: Vec<Feasibility>,
    /// Max residual of the equilibrium linear system at time 0.
    pub residual: f64,
    /// Every single-agent problem reported a unique optimum.
    pub unique: bool,
    pub solutions: Vec<SingleAgentSolution>,
    pub aggregator: NashAggregator,
}

/// Serializable view of an [`EquilibriumResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub market: String,
    pub n_agents: usize,
    pub psi_star: Vec<Vec<f64>>,
    pub phi_star: Vec<Vec<f64>>,
    pub theta_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation_constants: Option<Vec<f64>>,
    pub reduced_capitals: Vec<f64>,
    pub feasibility: Vec<Feasibility>,
    pub residual: f64,
    pub unique: bool,
    pub solver_diagnostics: Vec<SolverDiagnostics>,
}

impl EquilibriumResult {
    pub fn summary(&self, game: &GameSpec) -> EquilibriumSummary {
        EquilibriumSummary {
            market: game.market.name().to_string(),
            n_agents: game.n(),
            psi_star: self.psi_star.clone(),
            phi_star: self.phi_star.clone(),
            theta_hat: self.theta_hat,
            aggregation_constants: self.aggregation_constants.clone(),
            reduced_capitals: self.reduced_capitals.clone(),
            feasibility: self.feasibility.clone(),
            residual: self.residual,
            unique: self.unique,
            solver_diagnostics: self.solutions.iter().map(|s| s.diagnostics.clone()).collect(),
        }
    }
}

pub fn solve_game(game: &GameSpec, cfg: &SolverConfig) -> Result<EquilibriumResult> {
    game.validate()?;
    let weights = game.weights();
    let aggregator = NashAggregator::new(&weights)?;
    let feasibility = check_feasibility(game)?;
    for (i, f) in feasibility.iter().enumerate() {
        if !f.feasible {
            return Err(Error::InvalidInput(format!(
                "agent {i}: reduced capital {} lies outside the utility domain (weight bound {})",
                f.reduced_capital, f.theta_upper_bound
            )));
        }
    }
    let reduced: Vec<f64> = feasibility.iter().map(|f| f.reduced_capital).collect();
    let solutions = game
        .agents
        .iter()
        .zip(&reduced)
        .enumerate()
        .map(|(i, (a, &x))| {
            solve_single_agent(&game.market, &a.utility, x, game.horizon, cfg).map_err(|e| match e {
                Error::InvalidInput(m) => Error::InvalidInput(format!("agent {i}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let psi_star: Vec<Vec<f64>> = solutions.iter().zip(&reduced).map(|(s, &x)| s.time0_amounts(x)).collect();
    let d = psi_star[0].len();
    let n = game.n();
    let mut phi_star = vec![vec![0.0; d]; n];
    for k in 0..d {
        let col: Vec<f64> = psi_star.iter().map(|p| p[k]).collect();
        for (i, v) in aggregator.apply(&col).into_iter().enumerate() {
            phi_star[i][k] = v;
        }
    }
    let as_proc = |rows: &[Vec<f64>]| -> Vec<StrategyProcess> {
        rows.iter().map(|r| StrategyProcess::constant(Unit::Amounts, r)).collect()
    };
    let residual = verify_linear_system(&as_proc(&phi_star), &as_proc(&psi_star), &weights)?;
    let all_exp = game.agents.iter().all(|a| matches!(a.utility.kind, UtilityKind::Exponential { .. }));
    let aggregation_constants = all_exp.then(|| {
        let deltas: Vec<f64> = game.agents.iter().filter_map(|a| a.utility.risk_param()).collect();
        aggregator.constants(&deltas)
    });
    Ok(EquilibriumResult {
        psi_star,
        phi_star,
        theta_hat: aggregator.theta_hat(),
        aggregation_constants,
        reduced_capitals: reduced,
        feasibility,
        residual,
        unique: solutions.iter().all(|s| s.unique),
        solutions,
        aggregator,
    })
}
