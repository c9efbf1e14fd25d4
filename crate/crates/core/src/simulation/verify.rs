//! Unilateral and joint deviation checks around a computed equilibrium.
//!
//! Deviations are restricted to two finite families, so a PASS is a
//! necessary condition for optimality, not a proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::RealizedEquilibrium;
use super::{relative_wealth, utility_estimate, weighted_mean};
use crate::error::{invalid, Result};
use crate::game::GameSpec;
use crate::stats::Estimate;

/// Monte Carlo acceptance threshold in standard errors.
pub const MC_THRESHOLD_SE: f64 = 3.0;
/// Absolute headroom for floating-point round-off in gap comparisons.
pub const ROUNDOFF_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationGrid {
    /// Offsets added to the equilibrium amount, one asset at a time.
    pub additive: Vec<f64>,
    /// Factors multiplying the equilibrium strategy.
    pub multiplicative: Vec<f64>,
}

impl DeviationGrid {
    /// `k·step` for every integer `k` with `lo ≤ k·step ≤ hi`.
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        assert!(step > 0.0 && hi >= lo, "uniform grid needs step > 0 and hi >= lo");
        let k0 = (lo / step - 1e-9).ceil() as i64;
        let k1 = (hi / step + 1e-9).floor() as i64;
        // divide by an integral inverse step when possible so that 0 and 1 land exactly
        let inv = 1.0 / step;
        if (inv - inv.round()).abs() < 1e-9 {
            (k0..=k1).map(|k| k as f64 / inv.round()).collect()
        } else {
            (k0..=k1).map(|k| k as f64 * step).collect()
        }
    }

    /// Offsets `−1..1` in steps of 0.01, factors `0..2` in steps of 0.05.
    pub fn standard() -> Self {
        Self { additive: Self::uniform(-1.0, 1.0, 0.01), multiplicative: Self::uniform(0.0, 2.0, 0.05) }
    }

    /// Only the equilibrium itself.
    pub fn identity() -> Self {
        Self { additive: vec![0.0], multiplicative: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asset: Option<usize>,
    pub parameter: f64,
    /// Mean utility improvement; `None` when the deviation leaves the utility domain.
    pub gap: Option<f64>,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestResponseReport {
    pub agent: usize,
    pub exhaustive: bool,
    pub equilibrium_utility: Estimate,
    pub max_gap: f64,
    pub max_gap_std_error: f64,
    pub max_gap_family: String,
    pub max_gap_parameter: f64,
    /// Grid-resolution bound `½|f''|h²` (exhaustive only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub pass: bool,
    pub rows: Vec<DeviationRow>,
}

fn grid_step(values: &[f64], center: f64) -> Option<f64> {
    values
        .iter()
        .map(|v| (v - center).abs())
        .filter(|d| *d > 1e-12)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
}

/// Largest improvement of agent `i`'s expected relative utility over the grid.
pub fn best_response_gap(
    i: usize,
    realized: &RealizedEquilibrium,
    game: &GameSpec,
    grid: &DeviationGrid,
) -> Result<BestResponseReport> {
    if i >= game.n() {
        return invalid(format!("agent {i} does not exist"));
    }
    let utility = &game.agents[i].utility;
    let weights = realized.weights.as_deref();
    let exhaustive = weights.is_some();
    let base_rel = realized.relative_wealth(i, game);
    let base = utility_estimate(utility, &base_rel, weights);
    let Some(eq_util) = base.estimate else {
        return invalid(format!(
            "agent {i}: equilibrium relative wealth leaves the utility domain on {} paths",
            base.domain_violations
        ));
    };
    let base_u: Vec<f64> = base_rel.iter().map(|&r| utility.eval(r)).collect();
    let np = realized.n_paths();
    let d = realized.unit_gains.dim().1;
    let phi_i = &realized.phi_gains[i];

    // shift of own gains under a deviation, per path
    let shift = |family: &str, asset: usize, c: f64, p: usize| -> f64 {
        match family {
            "additive" => c * realized.unit_gains[[p, asset]],
            _ => (c - 1.0) * phi_i[p],
        }
    };
    let eval = |family: &str, asset: usize, c: f64| -> (Option<f64>, f64) {
        let mut diff = Vec::with_capacity(np);
        for p in 0..np {
            let r = base_rel[p] + shift(family, asset, c, p);
            if !utility.admits(r) {
                return (None, 0.0);
            }
            diff.push(utility.eval(r) - base_u[p]);
        }
        let e = Estimate::from_samples(&diff, weights);
        (Some(e.mean), e.std_error)
    };

    let mut cases: Vec<(&str, Option<usize>, f64)> = Vec::new();
    for k in 0..d {
        cases.extend(grid.additive.iter().map(|&c| ("additive", Some(k), c)));
    }
    cases.extend(grid.multiplicative.iter().map(|&c| ("multiplicative", None, c)));
    let rows: Vec<DeviationRow> = cases
        .par_iter()
        .map(|&(family, asset, c)| {
            let (gap, std_error) = eval(family, asset.unwrap_or(0), c);
            DeviationRow { family: family.to_string(), asset, parameter: c, gap, std_error }
        })
        .collect();

    let mut best: Option<&DeviationRow> = None;
    for r in &rows {
        if let Some(g) = r.gap {
            if best.is_none_or(|b| g > b.gap.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(r);
            }
        }
    }
    let (max_gap, max_gap_std_error, max_gap_family, max_gap_parameter) = match best {
        Some(r) => (r.gap.unwrap_or(f64::NEG_INFINITY), r.std_error, r.family.clone(), r.parameter),
        None => (f64::NEG_INFINITY, 0.0, String::new(), f64::NAN),
    };

    let (bound, pass) = if exhaustive {
        let mut bound = 0.0_f64;
        let families: Vec<(&str, usize, &[f64], f64)> = (0..d)
            .map(|k| ("additive", k, grid.additive.as_slice(), 0.0))
            .chain(std::iter::once(("multiplicative", 0, grid.multiplicative.as_slice(), 1.0)))
            .collect();
        for (family, asset, values, center) in families {
            let Some(h) = grid_step(values, center) else { continue };
            let f = |c: f64| eval(family, asset, c).0;
            if let (Some(up), Some(dn)) = (f(center + h), f(center - h)) {
                // f(center) = 0 by construction
                bound = bound.max(0.5 * (up + dn).abs());
            }
        }
        (Some(bound), max_gap <= bound + ROUNDOFF_TOL)
    } else {
        let pass = rows.iter().all(|r| r.gap.is_none_or(|g| g <= MC_THRESHOLD_SE * r.std_error + ROUNDOFF_TOL));
        (None, pass)
    };

    Ok(BestResponseReport {
        agent: i,
        exhaustive,
        equilibrium_utility: eq_util,
        max_gap: if max_gap.is_finite() { max_gap } else { 0.0 },
        max_gap_std_error,
        max_gap_family,
        max_gap_parameter: if max_gap_parameter.is_finite() { max_gap_parameter } else { 0.0 },
        bound,
        pass,
        rows,
    })
}

/// Every combination of `values` across `n` coordinates.
pub fn product_grid(n: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub betas: Vec<f64>,
    pub welfare_at_equilibrium: f64,
    pub max_gap: f64,
    pub argmax: Vec<f64>,
    /// `½ ρ n h²` with `ρ` a Gershgorin bound on the welfare Hessian.
    pub bound: f64,
    pub pass: bool,
    pub evaluated: usize,
}

/// Weighted welfare `Σ β_i E[U_i(relative wealth)]` under joint amount
/// perturbations in `asset`, compared with the equilibrium. Exhaustive trees only.
pub fn welfare_gap(
    realized: &RealizedEquilibrium,
    game: &GameSpec,
    betas: &[f64],
    perturbations: &[Vec<f64>],
    asset: usize,
    step: f64,
) -> Result<WelfareReport> {
    let n = game.n();
    if betas.len() != n || betas.iter().any(|b| !(*b > 0.0)) {
        return invalid("welfare check needs one positive beta per agent");
    }
    let Some(weights) = realized.weights.as_deref() else {
        return invalid("welfare check needs an exhaustive (weighted) path set");
    };
    if perturbations.iter().any(|c| c.len() != n) {
        return invalid("every perturbation needs one offset per agent");
    }
    let thetas = game.weights();
    let unit: Vec<f64> = realized.unit_gains.column(asset).to_vec();
    let welfare = |c: &[f64]| -> f64 {
        let terminal: Vec<Vec<f64>> = realized
            .terminal_wealth
            .iter()
            .zip(c)
            .map(|(x, ci)| x.iter().zip(&unit).map(|(x, u)| x + ci * u).collect())
            .collect();
        (0..n)
            .map(|i| {
                let rel = relative_wealth(i, &terminal[i], &terminal, &thetas);
                let u = &game.agents[i].utility;
                let vals: Vec<f64> = rel.iter().map(|&r| u.eval(r)).collect();
                betas[i] * weighted_mean(&vals, Some(weights))
            })
            .sum()
    };
    let zero = vec![0.0; n];
    let w0 = welfare(&zero);
    let values: Vec<f64> = perturbations.par_iter().map(|c| welfare(c) - w0).collect();
    let (mut max_gap, mut argmax) = (f64::NEG_INFINITY, zero.clone());
    for (c, v) in perturbations.iter().zip(&values) {
        if *v > max_gap {
            max_gap = *v;
            argmax = c.clone();
        }
    }
    let mut hess = vec![vec![0.0; n]; n];
    let e = |i: usize, s: f64| {
        let mut v = zero.clone();
        v[i] += s;
        v
    };
    for i in 0..n {
        hess[i][i] = (welfare(&e(i, step)) - 2.0 * w0 + welfare(&e(i, -step))) / (step * step);
        for j in 0..i {
            let f = |si: f64, sj: f64| {
                let mut v = zero.clone();
                v[i] += si;
                v[j] += sj;
                welfare(&v)
            };
            let h = (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step)) / (4.0 * step * step);
            hess[i][j] = h;
            hess[j][i] = h;
        }
    }
    let rho = hess.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let bound = 0.5 * rho * n as f64 * step * step;
    Ok(WelfareReport {
        betas: betas.to_vec(),
        welfare_at_equilibrium: w0,
        max_gap,
        argmax,
        bound,
        pass: max_gap <= bound + ROUNDOFF_TOL,
        evaluated: perturbations.len(),
    })
}
