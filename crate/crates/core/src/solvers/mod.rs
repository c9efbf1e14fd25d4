//! Single-agent (auxiliary) problems.
//!
//! Each solver returns the optimal strategy for one investor facing the market
//! alone with reduced initial capital. The equilibrium layer aggregates these.

mod cpt;
mod crra;
mod exponential;
mod newton;

pub use cpt::{solve_cpt_bs, CptConfig, CptSolution};
pub use crra::{solve_crra_bs, solve_crra_heston, CrraRisk, HestonAdjustment};
pub use exponential::{levy_foc_jacobian, levy_foc_residual, solve_exp_bs, solve_exp_crr, solve_exp_levy};
pub use newton::{damped_newton, NewtonConfig, NewtonOutcome};

use std::fmt;
use std::sync::Arc;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::game::{UtilityKind, UtilitySpec};
use crate::markets::{MarketModel, PathSet};
use crate::strategy::{StrategyProcess, Unit};

/// Deterministic additive term in a wealth-fraction schedule.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FractionAdjustment {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// Piecewise-linear interpolation, flat outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for FractionAdjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant { value } => write!(f, "Constant({value})"),
            Self::Table { times, values } => write!(f, "Table({times:?}, {values:?})"),
            Self::Custom(_) => write!(f, "Custom(<fn>)"),
        }
    }
}

impl FractionAdjustment {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } if !value.is_finite() => invalid("adjustment must be finite"),
            Self::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return invalid("adjustment table needs matching, non-empty times and values");
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return invalid("adjustment table times must be strictly increasing");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return invalid("adjustment table values must be finite");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value } => *value,
            Self::Table { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                let last = times.len() - 1;
                if t >= times[last] {
                    return values[last];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
            Self::Custom(f) => f(t),
        }
    }
}

/// Wealth fraction per asset: `base_k + adjustment(t)`.
#[derive(Clone, Debug)]
pub struct FractionSchedule {
    pub base: Vec<f64>,
    pub adjustment: FractionAdjustment,
}

impl FractionSchedule {
    pub fn fraction(&self, t: f64, asset: usize) -> f64 {
        self.base[asset] + self.adjustment.eval(t)
    }
}

#[derive(Clone, Debug)]
pub enum SingleAgentStrategy {
    /// Constant currency amounts per asset.
    ConstantAmounts(Vec<f64>),
    /// Fraction of the agent's own auxiliary wealth held in each asset.
    WealthFraction(FractionSchedule),
    /// Terminal wealth profile of a complete one-asset market.
    TerminalClaim(CptSolution),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SingleAgentSolution {
    pub strategy: SingleAgentStrategy,
    pub unique: bool,
    pub diagnostics: SolverDiagnostics,
}

impl SingleAgentSolution {
    pub(crate) fn closed_form(strategy: SingleAgentStrategy) -> Self {
        Self { strategy, unique: true, diagnostics: SolverDiagnostics::default() }
    }

    pub fn constant_amounts(&self) -> Option<&[f64]> {
        match &self.strategy {
            SingleAgentStrategy::ConstantAmounts(a) => Some(a),
            _ => None,
        }
    }

    /// Invested amounts at time 0 given the auxiliary capital.
    pub fn time0_amounts(&self, capital: f64) -> Vec<f64> {
        match &self.strategy {
            SingleAgentStrategy::ConstantAmounts(a) => a.clone(),
            SingleAgentStrategy::WealthFraction(s) => (0..s.base.len()).map(|k| s.fraction(0.0, k) * capital).collect(),
            SingleAgentStrategy::TerminalClaim(c) => vec![c.time0_amount],
        }
    }

    /// The strategy on a path grid, starting from auxiliary capital `capital`.
    /// Constant amounts stay `(1,1,d)` amounts; wealth fractions become
    /// path-dependent share holdings.
    pub fn realize(&self, paths: &PathSet, capital: f64) -> Result<StrategyProcess> {
        match &self.strategy {
            SingleAgentStrategy::ConstantAmounts(a) => {
                if a.len() != paths.n_assets() {
                    return invalid(format!("strategy has {} assets, paths have {}", a.len(), paths.n_assets()));
                }
                Ok(StrategyProcess::constant(Unit::Amounts, a))
            }
            SingleAgentStrategy::WealthFraction(s) => realize_fraction(s, paths, capital),
            SingleAgentStrategy::TerminalClaim(_) => Err(Error::Unsupported(
                "terminal-claim strategies are evaluated on terminal prices, not as path strategies".into(),
            )),
        }
    }
}

fn realize_fraction(s: &FractionSchedule, paths: &PathSet, capital: f64) -> Result<StrategyProcess> {
    let d = paths.n_assets();
    if s.base.len() != d {
        return invalid(format!("strategy has {} assets, paths have {d}", s.base.len()));
    }
    let (np, nt) = (paths.n_paths(), paths.n_steps() + 1);
    let mut shares = Array3::zeros((np, nt, d));
    for p in 0..np {
        let mut y = capital;
        for m in 0..nt {
            let t = paths.times[m];
            for k in 0..d {
                shares[[p, m, k]] = s.fraction(t, k) * y / paths.prices[[p, m, k]];
            }
            if m + 1 < nt {
                for k in 0..d {
                    y += shares[[p, m, k]] * (paths.prices[[p, m + 1, k]] - paths.prices[[p, m, k]]);
                }
            }
        }
    }
    StrategyProcess::new(Unit::Shares, shares)
}

/// Numerical settings shared by all solvers.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub cpt: CptConfig,
    #[serde(default)]
    pub heston: HestonAdjustment,
}

/// Dispatches on the (market, utility) pair.
pub fn solve_single_agent(
    market: &MarketModel,
    utility: &UtilitySpec,
    reduced_capital: f64,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<SingleAgentSolution> {
    match (market, &utility.kind) {
        (MarketModel::BlackScholes(p), UtilityKind::Exponential { delta }) => solve_exp_bs(p, *delta),
        (MarketModel::BlackScholes(p), UtilityKind::Power { delta }) => {
            if !(reduced_capital > 0.0) {
                return invalid(format!("power utility needs positive reduced capital, got {reduced_capital}"));
            }
            solve_crra_bs(p, CrraRisk::Delta(*delta))
        }
        (MarketModel::BlackScholes(p), UtilityKind::Cpt { .. }) => {
            solve_cpt_bs(p, utility, reduced_capital, horizon, &cfg.cpt)
        }
        (MarketModel::LevyJump(p), UtilityKind::Exponential { delta }) => solve_exp_levy(p, *delta, &cfg.newton),
        (MarketModel::Heston(p), UtilityKind::Power { delta }) => {
            if !(reduced_capital > 0.0) {
                return invalid(format!("power utility needs positive reduced capital, got {reduced_capital}"));
            }
            solve_crra_heston(p, *delta, &cfg.heston)
        }
        (MarketModel::Crr(p), UtilityKind::Exponential { delta }) => solve_exp_crr(p, *delta),
        (m, u) => Err(Error::Unsupported(format!(
            "no single-agent solver for {} market with {} utility",
            m.name(),
            match u {
                UtilityKind::Exponential { .. } => "exponential",
                UtilityKind::Power { .. } => "power",
                UtilityKind::Cpt { .. } => "cpt",
            }
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{simulate_bs, BlackScholesParams, SimulationGrid};

    #[test]
    fn table_adjustment_interpolates() {
        let a = FractionAdjustment::Table { times: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        a.validate().unwrap();
        assert_eq!(a.eval(-1.0), 0.0);
        assert_eq!(a.eval(0.25), 0.5);
        assert_eq!(a.eval(3.0), 2.0);
    }

    #[test]
    fn fraction_realization_keeps_amount_share_consistency() {
        let p = BlackScholesParams::one_dim(0.05, 0.2, 1.0);
        let paths = simulate_bs(&p, 1.0, &SimulationGrid::new(10, 5, 3)).unwrap();
        let sol = solve_crra_bs(&p, CrraRisk::Delta(2.0)).unwrap();
        let shares = sol.realize(&paths, 1.0).unwrap();
        let amounts = shares.to_amounts(&paths).unwrap();
        // amount / own wealth recovers the fraction on every node
        for j in 0..5 {
            let mut y = 1.0;
            for m in 0..=10 {
                let a = amounts.at(j, m, 0);
                assert!((a / y - 2.5).abs() < 1e-12);
                assert!((a - shares.at(j, m, 0) * paths.prices[[j, m, 0]]).abs() < 1e-12);
                if m < 10 {
                    y += shares.at(j, m, 0) * (paths.prices[[j, m + 1, 0]] - paths.prices[[j, m, 0]]);
                }
            }
        }
    }

    #[test]
    fn unsupported_pairs_are_reported() {
        let m = MarketModel::Crr(crate::markets::CrrParams { u: 2.0, d: 0.5, p: 0.6, s0: 1.0, steps: 2 });
        let u = UtilitySpec::power(2.0).unwrap();
        let err = solve_single_agent(&m, &u, 1.0, 1.0, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }
}
