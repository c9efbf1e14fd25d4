//! Prospect-theory investor in a one-asset Black-Scholes market.
//!
//! The market is complete, so the investor chooses a terminal wealth profile
//! `Y(L_T) ≥ 0` priced by the state-price density
//! `L_T = exp(−κ W_T − ½ κ² T)`, `κ = μ/σ`. With relative wealth `Y − ξ`
//! and utility `b x^γ` on gains, `−a (−x)^δ` on losses, the pointwise
//! maximizer of `U(Y − ξ) − λ L Y` is
//!
//! ```text
//! Y = ξ + (bγ/(λL))^{1/(1−γ)}   if L < L̄   (gain branch)
//! Y = 0                          otherwise   (loss branch)
//! ```
//!
//! where `L̄` is the root of `b(1−γ)D(L)^γ − λLξ + aξ^δ`. The loss branch
//! never lands strictly inside `(0, ξ)` because `−a(ξ−Y)^δ` is convex in `Y`.
//! The multiplier `λ` is found by bisection on the budget
//! `E[L_T Y] = x̃0 + ξ`, evaluated on an equal-probability quantile grid of
//! `W_T`. The grid cell containing the branch switch is weighted by the
//! fraction of its probability on the gain side, which keeps the budget
//! continuous in `λ`.

use serde::{Deserialize, Serialize};

use super::{SingleAgentSolution, SingleAgentStrategy, SolverDiagnostics};
use crate::error::{invalid, Error, Result};
use crate::game::{UtilityKind, UtilitySpec};
use crate::markets::BlackScholesParams;
use crate::stats::{normal_cdf, normal_quantile, pairwise_sum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptConfig {
    /// Number of equal-probability cells for `W_T/√T`.
    pub grid_size: usize,
    /// Relative budget tolerance for the multiplier bisection.
    pub budget_tol: f64,
    pub max_bisection: usize,
    /// Shift in standard-normal units for the central-difference delta.
    pub fd_step: f64,
}

impl Default for CptConfig {
    fn default() -> Self {
        Self { grid_size: 200_000, budget_tol: 1e-12, max_bisection: 400, fd_step: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptSolution {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub delta_loss: f64,
    pub xi: f64,
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
    pub horizon: f64,
    pub reduced_capital: f64,
    /// Budget multiplier `λ`.
    pub multiplier: f64,
    /// Branch threshold `L̄` of the state-price density.
    pub threshold: f64,
    pub time0_amount: f64,
    /// `time0_amount / (x̃0 + ξ)`.
    pub time0_fraction: f64,
    /// Grid value of `E[L_T Y]`.
    pub budget: f64,
    pub budget_rel_error: f64,
}

impl CptSolution {
    pub fn market_price_of_risk(&self) -> f64 {
        self.mu / self.sigma
    }

    /// Optimal terminal wealth `Y` at state-price density level `l`.
    pub fn wealth_at_density(&self, l: f64) -> f64 {
        if l < self.threshold {
            self.xi + gain_size(self.b, self.gamma, self.multiplier, l)
        } else {
            0.0
        }
    }

    /// `L_T` as a function of the terminal stock price.
    pub fn density_from_price(&self, s_t: f64) -> f64 {
        let k = self.market_price_of_risk();
        let w = ((s_t / self.s0).ln() - (self.mu - 0.5 * self.sigma * self.sigma) * self.horizon) / self.sigma;
        (-k * w - 0.5 * k * k * self.horizon).exp()
    }

    pub fn wealth_at_price(&self, s_t: f64) -> f64 {
        self.wealth_at_density(self.density_from_price(s_t))
    }

    /// Gain of the auxiliary problem, `Y − ξ − x̃0`.
    pub fn gain_at_price(&self, s_t: f64) -> f64 {
        self.wealth_at_price(s_t) - self.xi - self.reduced_capital
    }
}

fn gain_size(b: f64, gamma: f64, lambda: f64, l: f64) -> f64 {
    (b * gamma / (lambda * l)).powf(1.0 / (1.0 - gamma))
}

struct Problem {
    a: f64,
    b: f64,
    gamma: f64,
    delta_loss: f64,
    xi: f64,
    /// `|κ|√T`.
    k_sqrt_t: f64,
    z: Vec<f64>,
    l: Vec<f64>,
}

impl Problem {
    /// Gain-minus-loss objective difference; decreasing in `l`.
    fn branch_gap(&self, lambda: f64, l: f64) -> f64 {
        let d = gain_size(self.b, self.gamma, lambda, l);
        self.b * (1.0 - self.gamma) * d.powf(self.gamma) - lambda * l * self.xi + self.a * self.xi.powf(self.delta_loss)
    }

    fn threshold(&self, lambda: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
        let mut expand = 0;
        while self.branch_gap(lambda, lo.exp()) <= 0.0 {
            lo -= 10.0;
            expand += 1;
            if expand > 100 {
                return Err(bracket_error("threshold lower end"));
            }
        }
        while self.branch_gap(lambda, hi.exp()) > 0.0 {
            hi += 10.0;
            expand += 1;
            if expand > 200 {
                return Err(bracket_error("threshold upper end"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.branch_gap(lambda, mid.exp()) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// Per-cell gain-side probability share for threshold `l_bar`.
    fn fractions(&self, l_bar: f64) -> Vec<f64> {
        let j = self.z.len() as f64;
        let t = self.k_sqrt_t;
        // L(z) = exp(−t z − t²/2) < l_bar  ⇔  z > z_bar
        let z_bar = (-l_bar.ln() - 0.5 * t * t) / t;
        let cut = j * normal_cdf(z_bar);
        (0..self.z.len()).map(|i| (i as f64 + 1.0 - cut).clamp(0.0, 1.0)).collect()
    }

    fn profile(&self, lambda: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let l_bar = self.threshold(lambda)?;
        let frac = self.fractions(l_bar);
        let y = self
            .l
            .iter()
            .zip(&frac)
            .map(|(&l, &f)| if f > 0.0 { self.xi + gain_size(self.b, self.gamma, lambda, l) } else { 0.0 })
            .collect();
        Ok((l_bar, frac, y))
    }

    /// Grid price of the claim after shifting `W_T/√T` by `h`.
    fn value(&self, frac: &[f64], y: &[f64], h: f64) -> f64 {
        let t = self.k_sqrt_t;
        let terms: Vec<f64> = (0..self.z.len())
            .map(|i| {
                if frac[i] == 0.0 {
                    0.0
                } else {
                    self.l[i] * frac[i] * y[i] * (t * h + self.z[i] * h - 0.5 * h * h).exp()
                }
            })
            .collect();
        pairwise_sum(&terms) / self.z.len() as f64
    }

    fn budget(&self, lambda: f64) -> Result<f64> {
        let (_, frac, y) = self.profile(lambda)?;
        Ok(self.value(&frac, &y, 0.0))
    }
}

fn bracket_error(what: &str) -> Error {
    Error::Solver { message: format!("bisection bracket failure ({what})"), iterations: 0, residual: f64::NAN }
}

pub fn solve_cpt_bs(
    params: &BlackScholesParams,
    utility: &UtilitySpec,
    x0_reduced: f64,
    horizon: f64,
    cfg: &CptConfig,
) -> Result<SingleAgentSolution> {
    params.validate()?;
    if params.dim() != 1 {
        return invalid("CPT solver needs a one-asset market");
    }
    let UtilityKind::Cpt { a, b, gamma, delta_loss, xi_ref: xi } = utility.kind else {
        return invalid("CPT solver needs a CPT utility");
    };
    utility.validate()?;
    if !(horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let target = x0_reduced + xi;
    if !(target > 0.0) {
        return invalid(format!("budget x̃0 + ξ must be positive, got {target}"));
    }
    if cfg.grid_size < 2 || !(cfg.budget_tol > 0.0) || !(cfg.fd_step > 0.0) {
        return invalid("CPT grid needs at least 2 cells and positive tolerances");
    }
    let (mu, sigma, s0) = (params.mu[0], params.sigma[0][0], params.s0[0]);
    let kappa = mu / sigma;
    if kappa == 0.0 {
        return invalid("CPT solver needs a non-zero market price of risk");
    }
    let k_sqrt_t = kappa.abs() * horizon.sqrt();
    let jn = cfg.grid_size;
    let z: Vec<f64> = (0..jn).map(|j| normal_quantile((j as f64 + 0.5) / jn as f64)).collect();
    let l: Vec<f64> = z.iter().map(|&zj| (-k_sqrt_t * zj - 0.5 * k_sqrt_t * k_sqrt_t).exp()).collect();
    let prob = Problem { a, b, gamma, delta_loss, xi, k_sqrt_t, z, l };

    // budget is strictly decreasing in λ
    let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
    let mut expand = 0;
    while prob.budget(lo.exp())? < target {
        lo -= 2.0;
        expand += 1;
        if expand > 200 {
            return Err(bracket_error("multiplier lower end"));
        }
    }
    while prob.budget(hi.exp())? > target {
        hi += 2.0;
        expand += 1;
        if expand > 400 {
            return Err(bracket_error("multiplier upper end"));
        }
    }
    let mut iterations = 0;
    let mut rel = f64::INFINITY;
    let mut ln_lambda = 0.5 * (lo + hi);
    while iterations < cfg.max_bisection {
        iterations += 1;
        ln_lambda = 0.5 * (lo + hi);
        let bval = prob.budget(ln_lambda.exp())?;
        rel = (bval - target).abs() / target;
        if rel <= cfg.budget_tol || ln_lambda == lo || ln_lambda == hi {
            break;
        }
        if bval > target {
            lo = ln_lambda;
        } else {
            hi = ln_lambda;
        }
    }
    if rel > cfg.budget_tol.max(1e-8) {
        return Err(Error::Solver { message: "budget bisection did not converge".into(), iterations, residual: rel });
    }
    let lambda = ln_lambda.exp();
    let (l_bar, frac, y) = prob.profile(lambda)?;
    let budget = prob.value(&frac, &y, 0.0);
    let h = cfg.fd_step;
    let dv = (prob.value(&frac, &y, h) - prob.value(&frac, &y, -h)) / (2.0 * h);
    let amount = kappa.signum() * dv / (sigma * horizon.sqrt());
    let sol = CptSolution {
        a,
        b,
        gamma,
        delta_loss,
        xi,
        mu,
        sigma,
        s0,
        horizon,
        reduced_capital: x0_reduced,
        multiplier: lambda,
        threshold: l_bar,
        time0_amount: amount,
        time0_fraction: amount / target,
        budget,
        budget_rel_error: (budget - target).abs() / target,
    };
    Ok(SingleAgentSolution {
        strategy: SingleAgentStrategy::TerminalClaim(sol),
        unique: true,
        diagnostics: SolverDiagnostics { iterations, residual: rel, note: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(a: f64, b: f64, gamma: f64, xi: f64, x0: f64, grid: usize) -> CptSolution {
        let p = BlackScholesParams::one_dim(0.05, 0.2, 1.0);
        let u = UtilitySpec::cpt(a, b, gamma, 0.88, xi).unwrap();
        let cfg = CptConfig { grid_size: grid, ..Default::default() };
        match solve_cpt_bs(&p, &u, x0, 1.0, &cfg).unwrap().strategy {
            SingleAgentStrategy::TerminalClaim(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn merton_limit() {
        let c = solve(2.25 * 2.0, 2.0, 0.5, 1e-4, 1.0, 200_000);
        assert!((c.time0_fraction - 2.5).abs() / 2.5 < 0.01, "fraction {}", c.time0_fraction);
        assert!(c.budget_rel_error < 1e-8);
    }

    #[test]
    fn profile_is_nonincreasing_in_density() {
        let c = solve(50.0, 1.0, 0.5, 0.5, 0.2, 20_000);
        assert!(c.threshold.is_finite());
        let ls: Vec<f64> = (0..400).map(|i| (-4.0 + i as f64 * 0.02).exp()).collect();
        let ys: Vec<f64> = ls.iter().map(|&l| c.wealth_at_density(l)).collect();
        assert!(ys.windows(2).all(|w| w[1] <= w[0]));
        assert!(ys.contains(&0.0) && ys.iter().any(|&y| y > c.xi));
    }

    #[test]
    fn branch_choice_matches_pointwise_search() {
        let c = solve(3.0, 1.0, 0.6, 0.4, 0.3, 20_000);
        let u = |y: f64| {
            let x = y - c.xi;
            if x <= 0.0 {
                -c.a * (-x).powf(c.delta_loss)
            } else {
                c.b * x.powf(c.gamma)
            }
        };
        for &l in &[0.3, 0.8, 1.0, 1.5, 3.0, 8.0] {
            let obj = |y: f64| u(y) - c.multiplier * l * y;
            let best = (0..200_001).map(|i| i as f64 * 1e-4).map(obj).fold(f64::NEG_INFINITY, f64::max);
            let ours = obj(c.wealth_at_density(l));
            assert!(ours >= best - 1e-6, "l={l}: ours {ours} grid {best}");
        }
    }

    #[test]
    fn infeasible_budget_rejected() {
        let p = BlackScholesParams::one_dim(0.05, 0.2, 1.0);
        let u = UtilitySpec::cpt(2.0, 1.0, 0.5, 0.88, 0.1).unwrap();
        assert!(matches!(solve_cpt_bs(&p, &u, -0.2, 1.0, &CptConfig::default()), Err(Error::InvalidInput(_))));
    }
}
