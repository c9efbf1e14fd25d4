//! Exponential utility `−exp(−x/δ)`: constant invested amounts.

use nalgebra::{DMatrix, DVector};

use super::newton::{damped_newton, NewtonConfig};
use super::{SingleAgentSolution, SingleAgentStrategy, SolverDiagnostics};
use crate::error::{invalid, Result};
use crate::markets::{BlackScholesParams, CrrParams, LevyJumpParams};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return invalid(format!("risk tolerance delta must be positive, got {delta}"));
    }
    Ok(())
}

/// `π* = δ (σσᵀ)^{-1} μ`.
pub fn solve_exp_bs(params: &BlackScholesParams, delta: f64) -> Result<SingleAgentSolution> {
    check_delta(delta)?;
    params.validate()?;
    let dir = params.merton_direction()?;
    let amounts = dir.iter().map(|x| delta * x).collect();
    Ok(SingleAgentSolution::closed_form(SingleAgentStrategy::ConstantAmounts(amounts)))
}

/// Left-hand side of the first-order condition for constant amounts `π`:
/// `μ_k − (1/δ)(σσᵀπ)_k + λ Σ_m p_m z_mk (exp(−π·z_m/δ) − 1{‖z_m‖<1})`.
pub fn levy_foc_residual(params: &LevyJumpParams, delta: f64, pi: &[f64]) -> Vec<f64> {
    let cov = params.diffusion().covariance();
    let p = DVector::from_column_slice(pi);
    let mut r: Vec<f64> = (0..params.dim()).map(|k| params.mu[k] - (cov.row(k) * &p)[0] / delta).collect();
    for a in &params.atoms {
        let dot: f64 = a.size.iter().zip(pi).map(|(z, x)| z * x).sum();
        let ind = if a.is_compensated() { 1.0 } else { 0.0 };
        let w = params.jump_intensity * a.prob * ((-dot / delta).exp() - ind);
        for (rk, z) in r.iter_mut().zip(&a.size) {
            *rk += w * z;
        }
    }
    r
}

/// `−(1/δ) σσᵀ − (λ/δ) Σ_m p_m z_m z_mᵀ exp(−π·z_m/δ)`; negative definite.
pub fn levy_foc_jacobian(params: &LevyJumpParams, delta: f64, pi: &[f64]) -> DMatrix<f64> {
    let d = params.dim();
    let mut j = params.diffusion().covariance() * (-1.0 / delta);
    for a in &params.atoms {
        let dot: f64 = a.size.iter().zip(pi).map(|(z, x)| z * x).sum();
        let w = params.jump_intensity * a.prob * (-dot / delta).exp() / delta;
        for r in 0..d {
            for c in 0..d {
                j[(r, c)] -= w * a.size[r] * a.size[c];
            }
        }
    }
    j
}

/// Newton solve of the jump-diffusion first-order condition, started at the
/// no-jump closed form. Extra starts check that the root is unique.
pub fn solve_exp_levy(params: &LevyJumpParams, delta: f64, cfg: &NewtonConfig) -> Result<SingleAgentSolution> {
    check_delta(delta)?;
    params.validate()?;
    let closed: Vec<f64> = params.diffusion().merton_direction()?.iter().map(|x| delta * x).collect();
    if params.jump_intensity == 0.0 || params.atoms.iter().all(|a| a.norm() == 0.0) {
        return Ok(SingleAgentSolution::closed_form(SingleAgentStrategy::ConstantAmounts(closed)));
    }
    let f = |x: &DVector<f64>| DVector::from_vec(levy_foc_residual(params, delta, x.as_slice()));
    let jac = |x: &DVector<f64>| levy_foc_jacobian(params, delta, x.as_slice());
    let main = damped_newton(DVector::from_column_slice(&closed), f, jac, cfg)?;

    let scale = closed.iter().map(|x| x.abs()).fold(delta, f64::max);
    let d = params.dim();
    let starts = [DVector::zeros(d), DVector::from_element(d, scale), DVector::from_element(d, -scale)];
    let mut agree = true;
    let mut note = None;
    for s in starts {
        match damped_newton(s, f, jac, cfg) {
            Ok(o) => {
                let gap = (&o.x - &main.x).amax();
                if gap > 1e-8 * (1.0 + main.x.amax()) {
                    agree = false;
                    note = Some(format!("alternate start converged to a root {gap:e} away"));
                }
            }
            Err(e) => note = Some(format!("alternate start did not converge: {e}")),
        }
    }
    Ok(SingleAgentSolution {
        strategy: SingleAgentStrategy::ConstantAmounts(main.x.as_slice().to_vec()),
        unique: agree && main.negative_definite,
        diagnostics: SolverDiagnostics { iterations: main.iterations, residual: main.residual, note },
    })
}

/// `π* = δ (ln((1−q)/(1−p)) − ln(q/p)) / (u − d)` with `q = (1−d)/(u−d)`.
pub fn solve_exp_crr(params: &CrrParams, delta: f64) -> Result<SingleAgentSolution> {
    check_delta(delta)?;
    params.validate()?;
    let q = params.q();
    let p = params.p;
    let amount =
        if p == q { 0.0 } else { delta * (((1.0 - q) / (1.0 - p)).ln() - (q / p).ln()) / (params.u - params.d) };
    Ok(SingleAgentSolution::closed_form(SingleAgentStrategy::ConstantAmounts(vec![amount])))
}
