//! Terminal gains of single-agent optima and of the equilibrium strategies.
//!
//! Gains are linear in the strategy, so the equilibrium gains are the same
//! linear combination of the single-agent gains as the strategies themselves.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{relative_wealth, utility_estimate, UtilityEstimate};
use crate::equilibrium::EquilibriumResult;
use crate::error::{invalid, Error, Result};
use crate::game::GameSpec;
use crate::markets::{BlackScholesParams, MarketModel, PathSet};
use crate::solvers::{FractionAdjustment, FractionSchedule, SingleAgentSolution, SingleAgentStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainsScheme {
    /// Discrete rebalancing on the path grid.
    Discrete,
    /// Continuous-time gains written as functions of terminal prices
    /// (Black-Scholes only; constant amounts, constant fractions and terminal claims).
    ExactTerminal,
}

impl GainsScheme {
    pub fn for_market(market: &MarketModel) -> Self {
        match market {
            MarketModel::BlackScholes(_) => GainsScheme::ExactTerminal,
            _ => GainsScheme::Discrete,
        }
    }
}

/// Equilibrium outcomes on a fixed path set.
#[derive(Clone, Debug)]
pub struct RealizedEquilibrium {
    pub scheme: GainsScheme,
    /// `(paths, d)` gain of holding one currency unit in each asset.
    pub unit_gains: Array2<f64>,
    /// Per agent and path, gains of the single-agent optimum.
    pub psi_gains: Vec<Vec<f64>>,
    /// Per agent and path, gains of the equilibrium strategy.
    pub phi_gains: Vec<Vec<f64>>,
    pub terminal_wealth: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

impl RealizedEquilibrium {
    pub fn n_paths(&self) -> usize {
        self.unit_gains.dim().0
    }

    pub fn relative_wealth(&self, i: usize, game: &GameSpec) -> Vec<f64> {
        relative_wealth(i, &self.terminal_wealth[i], &self.terminal_wealth, &game.weights())
    }

    pub fn relative_utility(&self, i: usize, game: &GameSpec) -> UtilityEstimate {
        utility_estimate(&game.agents[i].utility, &self.relative_wealth(i, game), self.weights.as_deref())
    }

    /// Shifts agent `i`'s equilibrium amount in `asset` by `offset`, leaving the others fixed.
    pub fn perturbed(&self, i: usize, asset: usize, offset: f64) -> Self {
        let mut out = self.clone();
        for p in 0..self.n_paths() {
            let g = offset * self.unit_gains[[p, asset]];
            out.phi_gains[i][p] += g;
            out.terminal_wealth[i][p] += g;
        }
        out
    }
}

pub(crate) fn unit_gains(market: &MarketModel, paths: &PathSet, scheme: GainsScheme) -> Result<Array2<f64>> {
    let (np, nt, d) = paths.prices.dim();
    match scheme {
        GainsScheme::ExactTerminal => {
            let MarketModel::BlackScholes(bs) = market else {
                return invalid("exact terminal gains need a Black-Scholes market");
            };
            let half_var: Vec<f64> = bs.sigma.iter().map(|row| 0.5 * row.iter().map(|s| s * s).sum::<f64>()).collect();
            let t = paths.horizon();
            Ok(Array2::from_shape_fn((np, d), |(p, k)| {
                (paths.prices[[p, nt - 1, k]] / paths.prices[[p, 0, k]]).ln() + half_var[k] * t
            }))
        }
        GainsScheme::Discrete => Ok(Array2::from_shape_fn((np, d), |(p, k)| {
            (0..nt - 1).map(|m| paths.prices[[p, m + 1, k]] / paths.prices[[p, m, k]] - 1.0).sum()
        })),
    }
}

fn fraction_gains_exact(bs: &BlackScholesParams, s: &FractionSchedule, capital: f64, paths: &PathSet) -> Vec<f64> {
    let d = bs.dim();
    let t = paths.horizon();
    let nt = paths.n_steps();
    let f = &s.base;
    let drift: f64 = (0..d).map(|k| f[k] * bs.mu[k]).sum();
    // |σᵀ f|²
    let var: f64 = (0..d).map(|l| (0..d).map(|k| f[k] * bs.sigma[k][l]).sum::<f64>().powi(2)).sum();
    let log_drift = bs.log_drift();
    (0..paths.n_paths())
        .map(|p| {
            let noise: f64 = (0..d)
                .map(|k| f[k] * ((paths.prices[[p, nt, k]] / paths.prices[[p, 0, k]]).ln() - log_drift[k] * t))
                .sum();
            capital * ((drift - 0.5 * var) * t + noise).exp() - capital
        })
        .collect()
}

fn fraction_gains_discrete(s: &FractionSchedule, capital: f64, paths: &PathSet) -> Vec<f64> {
    let (np, nt, d) = paths.prices.dim();
    (0..np)
        .into_par_iter()
        .map(|p| {
            let mut y = capital;
            for m in 0..nt - 1 {
                let t = paths.times[m];
                let mut inc = 0.0;
                for k in 0..d {
                    inc += s.fraction(t, k) * y * (paths.prices[[p, m + 1, k]] / paths.prices[[p, m, k]] - 1.0);
                }
                y += inc;
            }
            y - capital
        })
        .collect()
}

/// Gains of a single-agent optimum started from auxiliary capital `capital`.
pub(crate) fn solution_gains(
    solution: &SingleAgentSolution,
    capital: f64,
    market: &MarketModel,
    paths: &PathSet,
    scheme: GainsScheme,
    unit: &Array2<f64>,
) -> Result<Vec<f64>> {
    let np = paths.n_paths();
    match &solution.strategy {
        SingleAgentStrategy::ConstantAmounts(a) => {
            if a.len() != unit.dim().1 {
                return invalid("strategy and market asset counts differ");
            }
            Ok((0..np).map(|p| a.iter().enumerate().map(|(k, c)| c * unit[[p, k]]).sum()).collect())
        }
        SingleAgentStrategy::WealthFraction(s) => match (scheme, market) {
            (GainsScheme::ExactTerminal, MarketModel::BlackScholes(bs))
                if matches!(s.adjustment, FractionAdjustment::Zero) =>
            {
                Ok(fraction_gains_exact(bs, s, capital, paths))
            }
            (GainsScheme::ExactTerminal, _) => {
                invalid("exact terminal gains need a constant fraction in a Black-Scholes market")
            }
            (GainsScheme::Discrete, _) => Ok(fraction_gains_discrete(s, capital, paths)),
        },
        SingleAgentStrategy::TerminalClaim(c) => {
            if scheme != GainsScheme::ExactTerminal {
                return Err(Error::Unsupported("terminal claims are evaluated with exact terminal gains".into()));
            }
            let nt = paths.n_steps();
            Ok((0..np).map(|p| c.gain_at_price(paths.prices[[p, nt, 0]])).collect())
        }
    }
}

/// Evaluates the equilibrium of `game` on `paths`.
pub fn realize_equilibrium(
    game: &GameSpec,
    eq: &EquilibriumResult,
    paths: &PathSet,
    scheme: GainsScheme,
) -> Result<RealizedEquilibrium> {
    if paths.n_assets() != game.market.n_assets() {
        return invalid("path set and market asset counts differ");
    }
    let unit = unit_gains(&game.market, paths, scheme)?;
    let psi_gains = eq
        .solutions
        .iter()
        .zip(&eq.reduced_capitals)
        .map(|(s, &x)| solution_gains(s, x, &game.market, paths, scheme, &unit))
        .collect::<Result<Vec<_>>>()?;
    let n = game.n();
    let np = paths.n_paths();
    let per_path: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|p| {
            let col: Vec<f64> = psi_gains.iter().map(|g| g[p]).collect();
            eq.aggregator.apply(&col)
        })
        .collect();
    let mut phi_gains = vec![vec![0.0; np]; n];
    for (p, row) in per_path.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            phi_gains[i][p] = v;
        }
    }
    let x0 = game.initial_capitals();
    let terminal_wealth = phi_gains.iter().zip(&x0).map(|(g, &x)| g.iter().map(|v| x + v).collect()).collect();
    Ok(RealizedEquilibrium {
        scheme,
        unit_gains: unit,
        psi_gains,
        phi_gains,
        terminal_wealth,
        weights: paths.weights.clone(),
    })
}
