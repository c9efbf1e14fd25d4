use ndarray::Array3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{assemble_paths, path_rng, Channel, PathSet, SimulationGrid};
use crate::error::{invalid, Error, Result};

/// Largest step count enumerated path by path (`2^N` paths).
pub const MAX_EXHAUSTIVE_STEPS: usize = 20;

/// Cox-Ross-Rubinstein binomial market with gross returns `u` or `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrrParams {
    pub u: f64,
    pub d: f64,
    pub p: f64,
    pub s0: f64,
    pub steps: usize,
}

impl CrrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d < 1.0 && self.u > 1.0) || !self.u.is_finite() {
            return invalid(format!("need 0 < d < 1 < u, got d={}, u={}", self.d, self.u));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return invalid(format!("p must lie in (0,1), got {}", self.p));
        }
        if !(self.s0 > 0.0) {
            return invalid("s0 must be positive");
        }
        if self.steps == 0 {
            return invalid("CRR market needs at least one step");
        }
        Ok(())
    }

    /// Risk-neutral up probability `(1−d)/(u−d)`.
    pub fn q(&self) -> f64 {
        (1.0 - self.d) / (self.u - self.d)
    }
}

/// Exhaustive CRR enumeration plus the recombining lattice.
#[derive(Clone, Debug)]
pub struct CrrTree {
    pub q: f64,
    /// `lattice[k][j]` = price after `k` steps with `j` up moves.
    pub lattice: Vec<Vec<f64>>,
    /// All `2^N` paths with product probabilities as weights.
    pub paths: PathSet,
}

pub fn build_crr_tree(params: &CrrParams, horizon: f64) -> Result<CrrTree> {
    params.validate()?;
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let n = params.steps;
    if n > MAX_EXHAUSTIVE_STEPS {
        return Err(Error::Capacity(format!(
            "exhaustive CRR enumeration is limited to {MAX_EXHAUSTIVE_STEPS} steps (got {n}); \
             use Monte Carlo mode (crr_monte_carlo) instead"
        )));
    }
    let count = 1usize << n;
    let mut prices = Array3::zeros((count, n + 1, 1));
    let mut weights = Vec::with_capacity(count);
    for path in 0..count {
        let mut s = params.s0;
        let mut w = 1.0;
        prices[[path, 0, 0]] = s;
        for k in 0..n {
            if (path >> k) & 1 == 1 {
                s *= params.u;
                w *= params.p;
            } else {
                s *= params.d;
                w *= 1.0 - params.p;
            }
            prices[[path, k + 1, 0]] = s;
        }
        weights.push(w);
    }
    let lattice = (0..=n)
        .map(|k| (0..=k).map(|j| params.s0 * params.u.powi(j as i32) * params.d.powi((k - j) as i32)).collect())
        .collect();
    let dt = horizon / n as f64;
    Ok(CrrTree {
        q: params.q(),
        lattice,
        paths: PathSet {
            times: (0..=n).map(|k| k as f64 * dt).collect(),
            prices,
            variance: None,
            jump_counts: None,
            seed: 0,
            weights: Some(weights),
        },
    })
}

/// Monte Carlo sampling of CRR paths for step counts beyond the exhaustive limit.
pub fn simulate_crr(params: &CrrParams, horizon: f64, grid: &SimulationGrid) -> Result<PathSet> {
    params.validate()?;
    if grid.n_paths == 0 {
        return invalid("simulation needs at least one path");
    }
    let n = params.steps;
    let prices = assemble_paths(grid.n_paths, n + 1, 1, |j| {
        let mut rng = path_rng(grid.seed, j, Channel::Tree);
        let mut s = params.s0;
        let mut out = Vec::with_capacity(n + 1);
        out.push(s);
        for _ in 0..n {
            let up: f64 = rng.random();
            s *= if up < params.p { params.u } else { params.d };
            out.push(s);
        }
        out
    });
    let dt = horizon / n as f64;
    Ok(PathSet {
        times: (0..=n).map(|k| k as f64 * dt).collect(),
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

    fn params(steps: usize) -> CrrParams {
        CrrParams { u: 2.0, d: 0.5, p: 0.6, s0: 1.0, steps }
    }

    #[test]
    fn single_step_tree() {
        let t = build_crr_tree(&params(1), 1.0).unwrap();
        let ps = &t.paths;
        assert_eq!(ps.n_paths(), 2);
        let w = ps.weights.as_ref().unwrap();
        // path 0 = down, path 1 = up
        assert_eq!((ps.prices[[1, 0, 0]], ps.prices[[1, 1, 0]], w[1]), (1.0, 2.0, 0.6));
        assert_eq!((ps.prices[[0, 0, 0]], ps.prices[[0, 1, 0]]), (1.0, 0.5));
        assert!((w[0] - 0.4).abs() < 1e-16);
    }

    #[test]
    fn weights_are_complete() {
        let t = build_crr_tree(&params(3), 1.0).unwrap();
        assert_eq!(t.paths.n_paths(), 8);
        let s: f64 = t.paths.weights.unwrap().iter().sum();
        assert!((s - 1.0).abs() <= 1e-15);
        let t = build_crr_tree(&params(16), 1.0).unwrap();
        let s: f64 = t.paths.weights.unwrap().iter().sum();
        assert!((s - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn risk_neutral_probability() {
        let t = build_crr_tree(&params(2), 1.0).unwrap();
        assert!((t.q - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(t.lattice[2], vec![0.25, 1.0, 4.0]);
    }

    #[test]
    fn too_many_steps_is_a_capacity_error() {
        let err = build_crr_tree(&params(MAX_EXHAUSTIVE_STEPS + 1), 1.0).unwrap_err();
        assert!(matches!(err, Error::Capacity(ref m) if m.contains("Monte Carlo")));
        let mc = simulate_crr(&params(40), 1.0, &SimulationGrid::new(40, 10, 3)).unwrap();
        assert_eq!(mc.n_steps(), 40);
    }

    #[test]
    fn no_arbitrage_enforced() {
        assert!(CrrParams { u: 1.1, d: 1.05, p: 0.5, s0: 1.0, steps: 2 }.validate().is_err());
    }
}
