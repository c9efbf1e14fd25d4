//! Market models and path generation.
//!
//! All markets share a zero-rate bond with price 1. Monte Carlo generators
//! draw every path from its own ChaCha stream derived from `(seed, path,
//! channel)`, so a path can be regenerated in isolation and the output does
//! not depend on the rayon worker count.

mod black_scholes;
mod crr;
mod heston;
mod levy;

pub use black_scholes::{simulate_bs, BlackScholesParams};
pub use crr::{build_crr_tree, simulate_crr, CrrParams, CrrTree, MAX_EXHAUSTIVE_STEPS};
pub use heston::{simulate_heston, HestonParams};
pub use levy::{simulate_levy, JumpAtom, LevyJumpParams};

use std::io::Write;

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MarketModel {
    BlackScholes(BlackScholesParams),
    LevyJump(LevyJumpParams),
    Heston(HestonParams),
    Crr(CrrParams),
}

impl MarketModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MarketModel::BlackScholes(p) => p.validate(),
            MarketModel::LevyJump(p) => p.validate(),
            MarketModel::Heston(p) => p.validate(),
            MarketModel::Crr(p) => p.validate(),
        }
    }

    pub fn n_assets(&self) -> usize {
        match self {
            MarketModel::BlackScholes(p) => p.dim(),
            MarketModel::LevyJump(p) => p.dim(),
            MarketModel::Heston(_) | MarketModel::Crr(_) => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarketModel::BlackScholes(_) => "black_scholes",
            MarketModel::LevyJump(_) => "levy_jump",
            MarketModel::Heston(_) => "heston",
            MarketModel::Crr(_) => "crr",
        }
    }

    pub fn initial_prices(&self) -> Vec<f64> {
        match self {
            MarketModel::BlackScholes(p) => p.s0.clone(),
            MarketModel::LevyJump(p) => p.s0.clone(),
            MarketModel::Heston(p) => vec![p.s0],
            MarketModel::Crr(p) => vec![p.s0],
        }
    }

    /// Paths for this market: Monte Carlo for continuous-time models, the
    /// exhaustive tree for CRR unless `grid.crr_monte_carlo` is set.
    pub fn generate_paths(&self, horizon: f64, grid: &SimulationGrid) -> Result<PathSet> {
        match self {
            MarketModel::BlackScholes(p) => simulate_bs(p, horizon, grid),
            MarketModel::LevyJump(p) => simulate_levy(p, horizon, grid),
            MarketModel::Heston(p) => simulate_heston(p, horizon, grid),
            MarketModel::Crr(p) if grid.crr_monte_carlo => simulate_crr(p, horizon, grid),
            MarketModel::Crr(p) => Ok(build_crr_tree(p, horizon)?.paths),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub crr_monte_carlo: bool,
}

impl SimulationGrid {
    pub fn new(steps: usize, n_paths: usize, seed: u64) -> Self {
        Self { steps, n_paths, seed, antithetic: false, crr_monte_carlo: false }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return invalid("simulation grid needs at least one step");
        }
        if self.n_paths == 0 {
            return invalid("simulation needs at least one path");
        }
        Ok(())
    }

    pub(crate) fn times(&self, horizon: f64) -> Vec<f64> {
        let dt = horizon / self.steps as f64;
        (0..=self.steps).map(|m| m as f64 * dt).collect()
    }
}

/// Random-number channels; each gets its own stream per path.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Channel {
    Diffusion = 0,
    Jumps = 1,
    Variance = 2,
    Tree = 3,
}

pub(crate) fn path_rng(seed: u64, path: usize, channel: Channel) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((path as u64) * 4 + channel as u64);
    rng
}

/// Simulated or enumerated price paths.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    /// `M+1` grid times in `[0, T]`.
    pub times: Vec<f64>,
    /// `(paths, M+1, d)` prices.
    pub prices: Array3<f64>,
    /// Heston variance paths `(paths, M+1)`.
    pub variance: Option<Array2<f64>>,
    /// Number of jumps per path (jump-diffusion only).
    pub jump_counts: Option<Vec<u32>>,
    pub seed: u64,
    /// Path probabilities for exhaustive trees; `None` means equal weights.
    pub weights: Option<Vec<f64>>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.prices.dim().0
    }

    pub fn n_steps(&self) -> usize {
        self.prices.dim().1 - 1
    }

    pub fn n_assets(&self) -> usize {
        self.prices.dim().2
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn is_exhaustive(&self) -> bool {
        self.weights.is_some()
    }

    pub fn terminal_price(&self, path: usize, asset: usize) -> f64 {
        self.prices[[path, self.n_steps(), asset]]
    }

    /// One row per `(path, step)`: `path,step,time,S_1..S_d[,variance][,weight]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.n_assets();
        let mut header = vec!["path".to_string(), "step".into(), "time".into()];
        header.extend((1..=d).map(|k| format!("S{k}")));
        if self.variance.is_some() {
            header.push("variance".into());
        }
        if self.weights.is_some() {
            header.push("weight".into());
        }
        w.write_record(&header)?;
        for p in 0..self.n_paths() {
            for (m, t) in self.times.iter().enumerate() {
                let mut row = vec![p.to_string(), m.to_string(), t.to_string()];
                row.extend((0..d).map(|k| self.prices[[p, m, k]].to_string()));
                if let Some(v) = &self.variance {
                    row.push(v[[p, m]].to_string());
                }
                if let Some(wt) = &self.weights {
                    row.push(wt[p].to_string());
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `simulate_one(path)` for every path in parallel and stacks the rows.
/// Each closure call returns the path's `(M+1)·d` prices in time-major order.
pub(crate) fn assemble_paths<F>(n_paths: usize, n_times: usize, d: usize, simulate_one: F) -> Array3<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let rows: Vec<Vec<f64>> = (0..n_paths).into_par_iter().map(&simulate_one).collect();
    let mut flat = Vec::with_capacity(n_paths * n_times * d);
    for r in rows {
        debug_assert_eq!(r.len(), n_times * d);
        flat.extend(r);
    }
    Array3::from_shape_vec((n_paths, n_times, d), flat).expect("consistent path lengths")
}

pub(crate) fn check_positive(name: &str, xs: &[f64]) -> Result<()> {
    for &x in xs {
        if !(x > 0.0) || !x.is_finite() {
            return invalid(format!("{name} must be positive, got {x}"));
        }
    }
    Ok(())
}
