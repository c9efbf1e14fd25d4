use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{path_rng, Channel, PathSet, SimulationGrid};
use crate::error::{invalid, Result};
use ndarray::{Array2, Array3};

/// Heston market with drift proportional to the variance:
///
/// ```text
/// dS = S (λ Z dt + √Z dW^S)
/// dZ = κ (θ − Z) dt + σ_v √Z dW^Z,   d⟨W^S, W^Z⟩ = ρ dt
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    /// Price of variance risk `λ`.
    pub lambda_mpr: f64,
    pub kappa: f64,
    /// Long-run variance level `θ`.
    pub mean_level: f64,
    pub vol_of_vol: f64,
    pub rho: f64,
    pub z0: f64,
    pub s0: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda_mpr, self.kappa, self.mean_level, self.vol_of_vol, self.rho, self.z0, self.s0]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return invalid("Heston parameters must be finite");
        }
        if self.kappa < 0.0 || self.vol_of_vol < 0.0 {
            return invalid("kappa and vol_of_vol must be non-negative");
        }
        if !(self.mean_level > 0.0) || !(self.z0 > 0.0) || !(self.s0 > 0.0) {
            return invalid("mean_level, z0 and s0 must be positive");
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return invalid(format!("rho must lie in [-1,1], got {}", self.rho));
        }
        if 2.0 * self.kappa * self.mean_level < self.vol_of_vol * self.vol_of_vol {
            return invalid(format!(
                "Feller condition violated: 2·kappa·mean_level = {} < vol_of_vol² = {}",
                2.0 * self.kappa * self.mean_level,
                self.vol_of_vol * self.vol_of_vol
            ));
        }
        Ok(())
    }

    /// `κ = σ_v = 0`: constant variance, i.e. Black-Scholes with drift `λ z0` and volatility `√z0`.
    pub fn is_degenerate(&self) -> bool {
        self.kappa == 0.0 && self.vol_of_vol == 0.0
    }

    /// `E[Z(t)] = θ + (z0 − θ) e^{−κt}`.
    pub fn expected_variance(&self, t: f64) -> f64 {
        self.mean_level + (self.z0 - self.mean_level) * (-self.kappa * t).exp()
    }
}

/// Full-truncation Euler for the variance, log-Euler for the price.
pub fn simulate_heston(params: &HestonParams, horizon: f64, grid: &SimulationGrid) -> Result<PathSet> {
    params.validate()?;
    grid.validate()?;
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let steps = grid.steps;
    let dt = horizon / steps as f64;
    let sq = dt.sqrt();
    let rho_perp = (1.0 - params.rho * params.rho).max(0.0).sqrt();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.n_paths)
        .into_par_iter()
        .map(|j| {
            let (stream, sign) = if grid.antithetic { (j / 2, if j % 2 == 1 { -1.0 } else { 1.0 }) } else { (j, 1.0) };
            let mut rs = path_rng(grid.seed, stream, Channel::Diffusion);
            let mut rv = path_rng(grid.seed, stream, Channel::Variance);
            let mut s = Vec::with_capacity(steps + 1);
            let mut z = Vec::with_capacity(steps + 1);
            let mut log_s = params.s0.ln();
            let mut var = params.z0;
            s.push(params.s0);
            z.push(var);
            for _ in 0..steps {
                let e1: f64 = rs.sample(StandardNormal);
                let e2: f64 = rv.sample(StandardNormal);
                let dws = sign * e1 * sq;
                let dwz = params.rho * dws + rho_perp * sign * e2 * sq;
                let vp = var.max(0.0);
                let root = vp.sqrt();
                log_s += (params.lambda_mpr * vp - 0.5 * vp) * dt + root * dws;
                var += params.kappa * (params.mean_level - vp) * dt + params.vol_of_vol * root * dwz;
                s.push(log_s.exp());
                z.push(var);
            }
            (s, z)
        })
        .collect();
    let n = grid.n_paths;
    let mut prices = Array3::zeros((n, steps + 1, 1));
    let mut variance = Array2::zeros((n, steps + 1));
    for (j, (s, z)) in rows.into_iter().enumerate() {
        for m in 0..=steps {
            prices[[j, m, 0]] = s[m];
            variance[[j, m]] = z[m];
        }
    }
    Ok(PathSet {
        times: grid.times(horizon),
        prices,
        variance: Some(variance),
        jump_counts: None,
        seed: grid.seed,
        weights: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markets::{simulate_bs, BlackScholesParams};
    use crate::stats::mean_and_se;

    fn params() -> HestonParams {
        HestonParams { lambda_mpr: 1.5, kappa: 2.0, mean_level: 0.04, vol_of_vol: 0.3, rho: -0.6, z0: 0.09, s0: 1.0 }
    }

    #[test]
    fn frozen_variance_when_no_vol_of_vol_and_at_mean() {
        let p = HestonParams { vol_of_vol: 0.0, z0: 0.04, ..params() };
        let ps = simulate_heston(&p, 1.0, &SimulationGrid::new(50, 20, 1)).unwrap();
        assert!(ps.variance.unwrap().iter().all(|&z| z == 0.04));
    }

    #[test]
    fn degenerate_reduces_to_black_scholes() {
        let z0: f64 = 0.04;
        let p = HestonParams { kappa: 0.0, vol_of_vol: 0.0, z0, lambda_mpr: 1.25, ..params() };
        let g = SimulationGrid::new(25, 50, 17);
        let h = simulate_heston(&p, 1.0, &g).unwrap();
        let bs = BlackScholesParams::one_dim(1.25 * z0, z0.sqrt(), 1.0);
        let b = simulate_bs(&bs, 1.0, &g).unwrap();
        for (x, y) in h.prices.iter().zip(b.prices.iter()) {
            assert!((x - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn mean_variance_follows_cir_mean() {
        let p = params();
        let ps = simulate_heston(&p, 1.0, &SimulationGrid::new(250, 100_000, 2)).unwrap();
        let var = ps.variance.as_ref().unwrap();
        let zt: Vec<f64> = (0..ps.n_paths()).map(|j| var[[j, 250]]).collect();
        let (m, se) = mean_and_se(&zt);
        let exact = p.expected_variance(1.0);
        assert!((m - exact).abs() <= 3.0 * se, "mean {m} exact {exact} se {se}");
        assert!(ps.prices.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn feller_violation_rejected() {
        let p = HestonParams { vol_of_vol: 1.0, ..params() };
        assert!(simulate_heston(&p, 1.0, &SimulationGrid::new(1, 1, 0)).is_err());
    }
}
