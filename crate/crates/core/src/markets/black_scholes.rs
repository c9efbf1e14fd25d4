use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{assemble_paths, check_positive, path_rng, Channel, PathSet, SimulationGrid};
use crate::error::{invalid, Result};

/// `dS_k = S_k (μ_k dt + Σ_ℓ σ_kℓ dW_ℓ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlackScholesParams {
    pub mu: Vec<f64>,
    /// Row-major `d × d` volatility matrix.
    pub sigma: Vec<Vec<f64>>,
    pub s0: Vec<f64>,
}

impl BlackScholesParams {
    pub fn one_dim(mu: f64, sigma: f64, s0: f64) -> Self {
        Self { mu: vec![mu], sigma: vec![vec![sigma]], s0: vec![s0] }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return invalid("market needs at least one asset");
        }
        if self.s0.len() != d || self.sigma.len() != d || self.sigma.iter().any(|r| r.len() != d) {
            return invalid(format!("drift has {d} entries; sigma must be {d}x{d} and s0 length {d}"));
        }
        if self.mu.iter().chain(self.sigma.iter().flatten()).any(|x| !x.is_finite()) {
            return invalid("drift and volatility must be finite");
        }
        check_positive("initial price", &self.s0)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if !self.sigma_matrix().is_invertible() {
            return invalid("volatility matrix must be invertible");
        }
        Ok(())
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.sigma[i][j])
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let s = self.sigma_matrix();
        &s * s.transpose()
    }

    /// `(σσᵀ)^{-1} μ`; computed as `μ/(σ·σ)` when `d = 1`.
    pub fn merton_direction(&self) -> Result<Vec<f64>> {
        if self.dim() == 1 {
            let s = self.sigma[0][0];
            if s == 0.0 {
                return invalid("volatility must be non-zero");
            }
            return Ok(vec![self.mu[0] / (s * s)]);
        }
        let cov = self.covariance();
        match cov.cholesky() {
            Some(ch) => Ok(ch.solve(&DVector::from_column_slice(&self.mu)).as_slice().to_vec()),
            None => invalid("σσᵀ is not positive definite"),
        }
    }

    /// Market price of risk `σ^{-1} μ`.
    pub fn market_price_of_risk(&self) -> Result<Vec<f64>> {
        match self.sigma_matrix().lu().solve(&DVector::from_column_slice(&self.mu)) {
            Some(x) => Ok(x.as_slice().to_vec()),
            None => invalid("volatility matrix must be invertible"),
        }
    }

    /// Itô-corrected log drift `μ_k − ½ Σ_ℓ σ_kℓ²`.
    pub(crate) fn log_drift(&self) -> Vec<f64> {
        self.mu.iter().zip(&self.sigma).map(|(m, row)| m - 0.5 * row.iter().map(|s| s * s).sum::<f64>()).collect()
    }
}

/// Exact log-normal stepping shared by the diffusive markets.
pub(crate) struct LogDiffusion<'a> {
    pub drift: Vec<f64>,
    pub sigma: &'a [Vec<f64>],
    pub s0: &'a [f64],
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl LogDiffusion<'_> {
    /// Prices of path `j`, time-major. `after_step(step, logs)` may add jump
    /// terms to the log prices after each diffusive increment.
    pub fn path(&self, j: usize, mut after_step: impl FnMut(usize, &mut [f64])) -> Vec<f64> {
        let d = self.s0.len();
        let (stream, sign) = if self.antithetic { (j / 2, if j % 2 == 1 { -1.0 } else { 1.0 }) } else { (j, 1.0) };
        let mut rng = path_rng(self.seed, stream, Channel::Diffusion);
        let sq = self.dt.sqrt();
        let mut logs: Vec<f64> = self.s0.iter().map(|s| s.ln()).collect();
        let mut z = vec![0.0; d];
        let mut out = Vec::with_capacity((self.steps + 1) * d);
        out.extend_from_slice(self.s0);
        for m in 0..self.steps {
            for zl in z.iter_mut() {
                let x: f64 = rng.sample(StandardNormal);
                *zl = sign * x * sq;
            }
            for k in 0..d {
                let shock: f64 = self.sigma[k].iter().zip(&z).map(|(s, w)| s * w).sum();
                logs[k] += self.drift[k] * self.dt + shock;
            }
            after_step(m, &mut logs);
            out.extend(logs.iter().map(|l| l.exp()));
        }
        out
    }
}

pub fn simulate_bs(params: &BlackScholesParams, horizon: f64, grid: &SimulationGrid) -> Result<PathSet> {
    params.validate()?;
    simulate_bs_unchecked(params, horizon, grid)
}

/// Skips the invertibility check so degenerate volatilities can be simulated.
pub(crate) fn simulate_bs_unchecked(
    params: &BlackScholesParams,
    horizon: f64,
    grid: &SimulationGrid,
) -> Result<PathSet> {
    params.validate_shape()?;
    grid.validate()?;
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let diffusion = LogDiffusion {
        drift: params.log_drift(),
        sigma: &params.sigma,
        s0: &params.s0,
        dt: horizon / grid.steps as f64,
        steps: grid.steps,
        seed: grid.seed,
        antithetic: grid.antithetic,
    };
    let prices = assemble_paths(grid.n_paths, grid.steps + 1, params.dim(), |j| diffusion.path(j, |_, _| {}));
    Ok(PathSet {
        times: grid.times(horizon),
        prices,
        variance: None,
        jump_counts: None,
        seed: grid.seed,
        weights: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_and_se;

    #[test]
    fn zero_volatility_is_deterministic_growth() {
        let p = BlackScholesParams::one_dim(0.05, 0.0, 2.0);
        assert!(p.validate().is_err());
        let ps = simulate_bs_unchecked(&p, 1.0, &SimulationGrid::new(10, 3, 7)).unwrap();
        for j in 0..3 {
            for (m, t) in ps.times.iter().enumerate() {
                let exact = 2.0 * (0.05 * t).exp();
                assert!((ps.prices[[j, m, 0]] - exact).abs() <= 1e-14 * exact);
            }
        }
    }

    #[test]
    fn terminal_mean_matches_gbm_moment() {
        let p = BlackScholesParams::one_dim(0.05, 0.2, 1.0);
        let ps = simulate_bs(&p, 1.0, &SimulationGrid::new(1, 1_000_000, 11)).unwrap();
        let st: Vec<f64> = (0..ps.n_paths()).map(|j| ps.terminal_price(j, 0)).collect();
        let (m, se) = mean_and_se(&st);
        assert!((m - 0.05f64.exp()).abs() <= 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn zero_drift_is_martingale() {
        let p = BlackScholesParams::one_dim(0.0, 0.3, 1.5);
        let ps = simulate_bs(&p, 2.0, &SimulationGrid::new(4, 200_000, 5)).unwrap();
        let st: Vec<f64> = (0..ps.n_paths()).map(|j| ps.terminal_price(j, 0)).collect();
        let (m, se) = mean_and_se(&st);
        assert!((m - 1.5).abs() <= 3.0 * se);
    }

    #[test]
    fn same_seed_same_paths() {
        let p = BlackScholesParams {
            mu: vec![0.05, 0.02],
            sigma: vec![vec![0.2, 0.0], vec![0.1, 0.15]],
            s0: vec![1.0, 3.0],
        };
        let g = SimulationGrid::new(20, 500, 99);
        let a = simulate_bs(&p, 1.0, &g).unwrap();
        let b = simulate_bs(&p, 1.0, &g).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| simulate_bs(&p, 1.0, &g).unwrap());
        assert_eq!(a, c);
        assert!(a.prices.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn antithetic_pairs_mirror_shocks() {
        let p = BlackScholesParams::one_dim(0.0, 0.2, 1.0);
        let mut g = SimulationGrid::new(1, 4, 3);
        g.antithetic = true;
        let ps = simulate_bs(&p, 1.0, &g).unwrap();
        // log S_T = -σ²/2 ± σ z
        let a = ps.terminal_price(0, 0).ln() + 0.02;
        let b = ps.terminal_price(1, 0).ln() + 0.02;
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn singular_sigma_rejected() {
        let p =
            BlackScholesParams { mu: vec![0.1, 0.1], sigma: vec![vec![1.0, 1.0], vec![1.0, 1.0]], s0: vec![1.0, 1.0] };
        assert!(simulate_bs(&p, 1.0, &SimulationGrid::new(1, 1, 0)).is_err());
    }
}
