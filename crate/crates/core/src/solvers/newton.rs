//! Damped Newton iteration for small nonlinear systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Stop once the Euclidean residual norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per iteration before accepting a non-improving step.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, max_halvings: 60 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Whether `−J` admitted a Cholesky factor at every visited iterate.
    pub negative_definite: bool,
}

/// Extra undamped steps past the tolerance, kept only while the residual strictly falls.
const POLISH_STEPS: usize = 3;

fn polish<F, J>(mut x: DVector<f64>, mut norm: f64, f: &F, jac: &J) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    for _ in 0..POLISH_STEPS {
        let Some(step) = jac(&x).lu().solve(&(-f(&x))) else { break };
        let cand = &x + step;
        let nc = f(&cand).norm();
        if !(nc < norm) {
            break;
        }
        x = cand;
        norm = nc;
    }
    (x, norm)
}

pub fn damped_newton<F, J>(x0: DVector<f64>, f: F, jac: J, cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = x0;
    let mut fx = f(&x);
    let mut norm = fx.norm();
    let mut negative_definite = true;
    for it in 0..cfg.max_iter {
        if norm < cfg.tol {
            let (x, norm) = polish(x, norm, &f, &jac);
            return Ok(NewtonOutcome { x, iterations: it, residual: norm, negative_definite });
        }
        let jx = jac(&x);
        negative_definite &= (-&jx).cholesky().is_some();
        let step = match jx.lu().solve(&(-&fx)) {
            Some(s) => s,
            None => return Err(Error::Solver { message: "singular Jacobian".into(), iterations: it, residual: norm }),
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let cand = &x + &step * scale;
            let fc = f(&cand);
            let nc = fc.norm();
            if nc.is_finite() && nc < norm {
                accepted = Some((cand, fc, nc));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, fc, nc)) => {
                x = cand;
                fx = fc;
                norm = nc;
            }
            None => {
                return Err(Error::Solver {
                    message: "line search could not reduce the residual".into(),
                    iterations: it,
                    residual: norm,
                })
            }
        }
    }
    if norm < cfg.tol {
        let (x, norm) = polish(x, norm, &f, &jac);
        return Ok(NewtonOutcome { x, iterations: cfg.max_iter, residual: norm, negative_definite });
    }
    Err(Error::Solver { message: "maximum iterations reached".into(), iterations: cfg.max_iter, residual: norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_scalar_exponential_equation() {
        // 1 − x − e^{x} + 1 = 0 has the root x = 0... shift it: f(x) = 2 − x − e^x
        let f = |x: &DVector<f64>| DVector::from_element(1, 2.0 - x[0] - x[0].exp());
        let j = |x: &DVector<f64>| DMatrix::from_element(1, 1, -1.0 - x[0].exp());
        let out = damped_newton(DVector::from_element(1, 5.0), f, j, &NewtonConfig::default()).unwrap();
        assert!(out.residual < 1e-10);
        assert!((2.0 - out.x[0] - out.x[0].exp()).abs() < 1e-10);
        assert!(out.negative_definite);
    }

    #[test]
    fn reports_non_convergence() {
        let f = |x: &DVector<f64>| DVector::from_element(1, x[0] * x[0] + 1.0);
        let j = |x: &DVector<f64>| DMatrix::from_element(1, 1, 2.0 * x[0]);
        let cfg = NewtonConfig { max_iter: 5, ..Default::default() };
        let err = damped_newton(DVector::from_element(1, 1.0), f, j, &cfg).unwrap_err();
        assert!(matches!(err, Error::Solver { .. }));
    }
}
