use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::black_scholes::{BlackScholesParams, LogDiffusion};
use super::{assemble_paths, path_rng, Channel, PathSet, SimulationGrid};
use crate::error::{invalid, Result};

/// One jump size with its probability under the normalized jump measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    /// Relative jump per asset; every coordinate must exceed −1.
    pub size: Vec<f64>,
    pub prob: f64,
}

impl JumpAtom {
    pub fn norm(&self) -> f64 {
        self.size.iter().map(|z| z * z).sum::<f64>().sqrt()
    }

    /// Atoms with `‖z‖ < 1` are compensated in the drift.
    pub fn is_compensated(&self) -> bool {
        self.norm() < 1.0
    }
}

/// Black-Scholes diffusion plus a compound Poisson jump part with finitely many atoms:
/// `dS_k = S_k(t−)(μ_k dt + Σ_ℓ σ_kℓ dW_ℓ + ∫ z_k (N(dt,dz) − 1{‖z‖<1} ν(dz) dt))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevyJumpParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub s0: Vec<f64>,
    /// Expected number of jumps per year.
    pub jump_intensity: f64,
    pub atoms: Vec<JumpAtom>,
}

impl LevyJumpParams {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn diffusion(&self) -> BlackScholesParams {
        BlackScholesParams { mu: self.mu.clone(), sigma: self.sigma.clone(), s0: self.s0.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.diffusion().validate()?;
        if !(self.jump_intensity >= 0.0) || !self.jump_intensity.is_finite() {
            return invalid(format!("jump intensity must be >= 0, got {}", self.jump_intensity));
        }
        if self.jump_intensity > 0.0 && self.atoms.is_empty() {
            return invalid("positive jump intensity needs at least one atom");
        }
        let d = self.dim();
        let mut total = 0.0;
        for (m, a) in self.atoms.iter().enumerate() {
            if a.size.len() != d {
                return invalid(format!("jump atom {m} has {} coordinates, market has {d}", a.size.len()));
            }
            if a.size.iter().any(|&z| !(z > -1.0) || !z.is_finite()) {
                return invalid(format!("jump atom {m}: every coordinate must be > -1"));
            }
            if !(a.prob >= 0.0) {
                return invalid(format!("jump atom {m}: probability must be >= 0"));
            }
            total += a.prob;
        }
        if !self.atoms.is_empty() && (total - 1.0).abs() > 1e-12 {
            return invalid(format!("jump atom probabilities sum to {total}, expected 1"));
        }
        Ok(())
    }

    /// `λ_J Σ_m p_m z_{m,k} 1{‖z_m‖<1}`.
    pub fn compensator(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for a in self.atoms.iter().filter(|a| a.is_compensated()) {
            for (ck, z) in c.iter_mut().zip(&a.size) {
                *ck += self.jump_intensity * a.prob * z;
            }
        }
        c
    }
}

pub fn simulate_levy(params: &LevyJumpParams, horizon: f64, grid: &SimulationGrid) -> Result<PathSet> {
    params.validate()?;
    grid.validate()?;
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let d = params.dim();
    let dt = horizon / grid.steps as f64;
    let diffusion_params = params.diffusion();
    let comp = params.compensator();
    let drift: Vec<f64> =
        diffusion_params.log_drift().iter().zip(&comp).map(|(a, c)| if *c == 0.0 { *a } else { a - c }).collect();
    let diffusion = LogDiffusion {
        drift,
        sigma: &params.sigma,
        s0: &params.s0,
        dt,
        steps: grid.steps,
        seed: grid.seed,
        antithetic: grid.antithetic,
    };
    let log_jumps: Vec<Vec<f64>> =
        params.atoms.iter().map(|a| a.size.iter().map(|z| (1.0 + z).ln()).collect()).collect();
    let cumulative: Vec<f64> = params
        .atoms
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.prob;
            Some(*acc)
        })
        .collect();
    let rate = params.jump_intensity * dt;
    let poisson = if rate > 0.0 { Some(Poisson::new(rate).expect("positive rate")) } else { None };

    let rows: Vec<(Vec<f64>, u32)> = {
        use rayon::prelude::*;
        (0..grid.n_paths)
            .into_par_iter()
            .map(|j| {
                let mut rng = path_rng(grid.seed, j, Channel::Jumps);
                let mut count = 0u32;
                let prices = diffusion.path(j, |_, logs| {
                    let Some(pois) = &poisson else { return };
                    let jumps = pois.sample(&mut rng) as u32;
                    for _ in 0..jumps {
                        let u: f64 = rng.random();
                        let m = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
                        for (l, lj) in logs.iter_mut().zip(&log_jumps[m]) {
                            *l += lj;
                        }
                    }
                    count += jumps;
                });
                (prices, count)
            })
            .collect()
    };
    let jump_counts: Vec<u32> = rows.iter().map(|r| r.1).collect();
    let prices = assemble_paths(grid.n_paths, grid.steps + 1, d, |j| rows[j].0.clone());
    Ok(PathSet {
        times: grid.times(horizon),
        prices,
        variance: None,
        jump_counts: Some(jump_counts),
        seed: grid.seed,
        weights: None,
    })
}
