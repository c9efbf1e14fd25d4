//! Wealth, relative utility and verification on simulated or enumerated paths.

pub(crate) mod flow;
mod moments;
mod report;
mod verify;

pub use flow::{realize_equilibrium, GainsScheme, RealizedEquilibrium};
pub use moments::{bs_exp_moments, mc_moments, reparametrization_crosscheck, BsExpMoments, McMoments, ReparamCheck};
pub use report::{build_report, AgentReport, SimulationReport};
pub use verify::{
    best_response_gap, product_grid, welfare_gap, BestResponseReport, DeviationGrid, DeviationRow, WelfareReport,
    MC_THRESHOLD_SE, ROUNDOFF_TOL,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{GameSpec, UtilitySpec};
use crate::markets::PathSet;
use crate::stats::{pairwise_sum, Estimate};
use crate::strategy::StrategyProcess;

/// Discrete self-financing wealth with a zero-rate bond.
#[derive(Clone, Debug)]
pub struct WealthPaths {
    /// Per agent, `(paths, M+1)`.
    pub wealth: Vec<Array2<f64>>,
    /// Per agent, `(paths, d)` terminal gains from each asset.
    pub terminal_gains: Vec<Array2<f64>>,
}

impl WealthPaths {
    pub fn terminal(&self, agent: usize) -> Vec<f64> {
        let w = &self.wealth[agent];
        let last = w.dim().1 - 1;
        w.column(last).to_vec()
    }
}

/// `X_{m+1} = X_m + Σ_k ψ_k(t_m)(S_k(t_{m+1}) − S_k(t_m))`.
pub fn wealth_paths(strategies: &[StrategyProcess], paths: &PathSet, x0: &[f64]) -> Result<WealthPaths> {
    if strategies.len() != x0.len() {
        return invalid(format!("{} strategies but {} initial capitals", strategies.len(), x0.len()));
    }
    let (np, nt, d) = paths.prices.dim();
    let mut wealth = Vec::with_capacity(strategies.len());
    let mut terminal_gains = Vec::with_capacity(strategies.len());
    for (s, &x) in strategies.iter().zip(x0) {
        s.check_against(paths)?;
        let mut w = Array2::zeros((np, nt));
        let mut g = Array2::zeros((np, d));
        for p in 0..np {
            w[[p, 0]] = x;
            for m in 0..nt - 1 {
                let mut step = 0.0;
                for k in 0..d {
                    let inc = s.shares_at(paths, p, m, k) * (paths.prices[[p, m + 1, k]] - paths.prices[[p, m, k]]);
                    g[[p, k]] += inc;
                    step += inc;
                }
                w[[p, m + 1]] = w[[p, m]] + step;
            }
        }
        wealth.push(w);
        terminal_gains.push(g);
    }
    Ok(WealthPaths { wealth, terminal_gains })
}

/// `X^i − (θ_i/n) Σ_{j≠i} X^j` path by path, with agent `i`'s own wealth replaced by `own`.
pub fn relative_wealth(i: usize, own: &[f64], terminal: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = terminal.len() as f64;
    let c = weights[i] / n;
    (0..own.len())
        .map(|p| {
            let others: f64 = terminal.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x[p]).sum();
            own[p] - c * others
        })
        .collect()
}

/// Expected utility with the `−∞` extension outside the utility domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityEstimate {
    /// `None` when some path leaves the domain (the expectation is `−∞`).
    pub estimate: Option<Estimate>,
    pub domain_violations: usize,
}

pub fn utility_estimate(utility: &UtilitySpec, relative: &[f64], weights: Option<&[f64]>) -> UtilityEstimate {
    let violations = relative.iter().filter(|&&r| !utility.admits(r)).count();
    if violations > 0 {
        return UtilityEstimate { estimate: None, domain_violations: violations };
    }
    let u: Vec<f64> = relative.iter().map(|&r| utility.eval(r)).collect();
    UtilityEstimate { estimate: Some(Estimate::from_samples(&u, weights)), domain_violations: 0 }
}

/// Monte Carlo mean (or exhaustive weighted sum) of agent `i`'s relative utility.
pub fn expected_relative_utility(
    i: usize,
    strategies: &[StrategyProcess],
    paths: &PathSet,
    game: &GameSpec,
) -> Result<UtilityEstimate> {
    if i >= game.n() || strategies.len() != game.n() {
        return invalid("agent index or strategy count does not match the game");
    }
    let wp = wealth_paths(strategies, paths, &game.initial_capitals())?;
    let terminal: Vec<Vec<f64>> = (0..game.n()).map(|j| wp.terminal(j)).collect();
    let rel = relative_wealth(i, &terminal[i], &terminal, &game.weights());
    Ok(utility_estimate(&game.agents[i].utility, &rel, paths.weights.as_deref()))
}

pub(crate) fn weighted_mean(xs: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) => {
            let prod: Vec<f64> = xs.iter().zip(w).map(|(x, w)| x * w).collect();
            pairwise_sum(&prod)
        }
        None => pairwise_sum(xs) / xs.len() as f64,
    }
}
