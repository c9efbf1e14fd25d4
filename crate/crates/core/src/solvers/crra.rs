//! Power (CRRA) utility: wealth-fraction strategies.

use serde::{Deserialize, Serialize};

use super::{FractionAdjustment, FractionSchedule, SingleAgentSolution, SingleAgentStrategy, SolverDiagnostics};
use crate::error::{invalid, Result};
use crate::markets::{BlackScholesParams, HestonParams};

/// Risk parameter of a power utility, either as `δ` or as `γ = 1 − 1/δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrraRisk {
    Delta(f64),
    Gamma(f64),
}

impl CrraRisk {
    pub fn delta(self) -> Result<f64> {
        match self {
            CrraRisk::Delta(d) if d > 0.0 && d.is_finite() => Ok(d),
            CrraRisk::Delta(d) => invalid(format!("delta must be positive, got {d}")),
            CrraRisk::Gamma(g) if g < 1.0 && g.is_finite() => Ok(1.0 / (1.0 - g)),
            CrraRisk::Gamma(g) => invalid(format!("gamma must be below 1, got {g}")),
        }
    }
}

/// Fraction `δ (σσᵀ)^{-1} μ` of own wealth in each asset.
pub fn solve_crra_bs(params: &BlackScholesParams, risk: CrraRisk) -> Result<SingleAgentSolution> {
    let delta = risk.delta()?;
    params.validate()?;
    let base = params.merton_direction()?.iter().map(|x| delta * x).collect();
    Ok(SingleAgentSolution::closed_form(SingleAgentStrategy::WealthFraction(FractionSchedule {
        base,
        adjustment: FractionAdjustment::Zero,
    })))
}

/// Hedging term `f(t)` added to the myopic Heston fraction.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct HestonAdjustment {
    #[serde(default)]
    pub f: FractionAdjustment,
    /// Whether `f` is the exact hedging term rather than an approximation.
    #[serde(default)]
    pub exact: bool,
}

/// Fraction `δλ + f(t)`.
pub fn solve_crra_heston(params: &HestonParams, delta: f64, adj: &HestonAdjustment) -> Result<SingleAgentSolution> {
    CrraRisk::Delta(delta).delta()?;
    params.validate()?;
    adj.f.validate()?;
    let degenerate = params.is_degenerate();
    let zero_f = matches!(adj.f, FractionAdjustment::Zero);
    let unique = adj.exact || (degenerate && zero_f);
    let note = (!unique).then(|| "myopic fraction; hedging term not supplied as exact".to_string());
    Ok(SingleAgentSolution {
        strategy: SingleAgentStrategy::WealthFraction(FractionSchedule {
            base: vec![delta * params.lambda_mpr],
            adjustment: adj.f.clone(),
        }),
        unique,
        diagnostics: SolverDiagnostics { iterations: 0, residual: 0.0, note },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fraction0(s: &SingleAgentSolution) -> f64 {
        match &s.strategy {
            SingleAgentStrategy::WealthFraction(f) => f.fraction(0.0, 0),
            _ => panic!("expected a wealth fraction"),
        }
    }

    #[test]
    fn merton_fraction() {
        let p = BlackScholesParams::one_dim(0.05, 0.2, 1.0);
        assert!((fraction0(&solve_crra_bs(&p, CrraRisk::Delta(2.0)).unwrap()) - 2.5).abs() < 1e-14);
        assert!((fraction0(&solve_crra_bs(&p, CrraRisk::Gamma(0.5)).unwrap()) - 2.5).abs() < 1e-14);
        let log = fraction0(&solve_crra_bs(&p, CrraRisk::Gamma(1e-6)).unwrap());
        assert!((log - 1.25).abs() < 1e-5);
        let flat = BlackScholesParams::one_dim(0.0, 0.2, 1.0);
        assert_eq!(fraction0(&solve_crra_bs(&flat, CrraRisk::Delta(2.0)).unwrap()), 0.0);
        assert!(solve_crra_bs(&p, CrraRisk::Gamma(1.0)).is_err());
    }

    fn heston(lambda: f64, kappa: f64, vol: f64, z0: f64) -> HestonParams {
        HestonParams { lambda_mpr: lambda, kappa, mean_level: 0.04, vol_of_vol: vol, rho: 0.0, z0, s0: 1.0 }
    }

    #[test]
    fn degenerate_heston_equals_black_scholes() {
        let (mu, sig): (f64, f64) = (0.05, 0.2);
        let h = heston(mu / (sig * sig), 0.0, 0.0, sig * sig);
        let s = solve_crra_heston(&h, 1.0, &HestonAdjustment::default()).unwrap();
        let b = solve_crra_bs(&BlackScholesParams::one_dim(mu, sig, 1.0), CrraRisk::Delta(1.0)).unwrap();
        assert_eq!(fraction0(&s), fraction0(&b));
        assert!((fraction0(&s) - 1.25).abs() < 1e-14);
        assert!(s.unique);
    }

    #[test]
    fn adjustment_pass_through() {
        let h = heston(0.0, 2.0, 0.3, 0.04);
        let zero = solve_crra_heston(&h, 1.0, &HestonAdjustment::default()).unwrap();
        assert_eq!(fraction0(&zero), 0.0);
        assert!(!zero.unique);
        let h = heston(1.5, 2.0, 0.3, 0.04);
        let adj = HestonAdjustment { f: FractionAdjustment::Constant { value: 0.3 }, exact: true };
        let s = solve_crra_heston(&h, 2.0, &adj).unwrap();
        assert!((fraction0(&s) - 3.3).abs() < 1e-14);
        assert!(s.unique);
    }
}
