//! Game data model, feasibility of competition weights and the linear map
//! from single-agent optima to the Nash equilibrium.
//!
//! For weights `θ ∈ [0,1]^n` the equilibrium strategies `φ^i` are tied to the
//! single-agent optima `ψ^{i,*}` by
//!
//! ```text
//! ψ^{i,*} = φ^i − (θ_i/n) Σ_{j≠i} φ^j
//! ```
//!
//! pointwise in path, time and asset. The system has the closed-form solution
//!
//! ```text
//! φ^i = n/(n+θ_i) ψ^{i,*} + θ_i / ((n+θ_i)(1−θ̂)) Σ_j n/(n+θ_j) ψ^{j,*},
//! θ̂   = Σ_i θ_i/(n+θ_i) < n/(n+1).
//! ```

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markets::MarketModel;
use crate::strategy::{broadcast_shape, StrategyProcess};

/// Where a utility function is finite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Reals,
    NonnegativeReals,
    PositiveReals,
}

impl Domain {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Domain::Reals => x.is_finite(),
            Domain::NonnegativeReals => x >= 0.0,
            Domain::PositiveReals => x > 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UtilityKind {
    /// `U(x) = −exp(−x/δ)`.
    Exponential { delta: f64 },
    /// `U(x) = x^{1−1/δ} / (1−1/δ)`; `δ = 1/(1−γ)` in the `b·x^γ` form.
    Power { delta: f64 },
    /// S-shaped utility of relative wealth `r`: `−a(−r)^δ` for `r ≤ 0`,
    /// `b r^γ` for `r > 0`, with the floor `r ≥ −ξ`.
    Cpt { a: f64, b: f64, gamma: f64, delta_loss: f64, xi_ref: f64 },
}

/// Utility family plus its domain. For CPT the domain applies to the shifted
/// wealth `r + ξ` (wealth above the floor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub domain: Domain,
}

impl UtilitySpec {
    pub fn exponential(delta: f64) -> Result<Self> {
        Self::new(UtilityKind::Exponential { delta }, Domain::Reals)
    }

    pub fn power(delta: f64) -> Result<Self> {
        Self::new(UtilityKind::Power { delta }, Domain::PositiveReals)
    }

    /// Power utility written as `x^γ`-type with `γ < 1`, `γ ≠ 0`.
    pub fn power_from_gamma(gamma: f64) -> Result<Self> {
        if !(gamma < 1.0) || gamma == 0.0 {
            return invalid(format!("power utility needs gamma < 1 and gamma != 0, got {gamma}"));
        }
        Self::power(1.0 / (1.0 - gamma))
    }

    pub fn cpt(a: f64, b: f64, gamma: f64, delta_loss: f64, xi_ref: f64) -> Result<Self> {
        Self::new(UtilityKind::Cpt { a, b, gamma, delta_loss, xi_ref }, Domain::NonnegativeReals)
    }

    pub fn new(kind: UtilityKind, domain: Domain) -> Result<Self> {
        let spec = Self { kind, domain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            UtilityKind::Exponential { delta } => {
                if !(delta > 0.0) || !delta.is_finite() {
                    return invalid(format!("exponential utility needs delta > 0, got {delta}"));
                }
            }
            UtilityKind::Power { delta } => {
                if !(delta > 0.0) || delta == 1.0 || !delta.is_finite() {
                    return invalid(format!("power utility needs delta > 0 and delta != 1, got {delta}"));
                }
                match self.domain {
                    Domain::Reals => return invalid("power utility cannot live on the whole real line"),
                    Domain::NonnegativeReals if delta < 1.0 => {
                        return invalid("power utility with delta < 1 is -inf at 0; use positive_reals")
                    }
                    _ => {}
                }
            }
            UtilityKind::Cpt { a, b, gamma, delta_loss, xi_ref } => {
                if !(a > b && b > 0.0) {
                    return invalid(format!("CPT utility needs a > b > 0, got a={a}, b={b}"));
                }
                if !(gamma > 0.0 && gamma < 1.0) {
                    return invalid(format!("CPT utility needs 0 < gamma < 1, got {gamma}"));
                }
                if !(delta_loss > 0.0 && delta_loss <= 1.0) {
                    return invalid(format!("CPT utility needs 0 < delta_loss <= 1, got {delta_loss}"));
                }
                if !(xi_ref > 0.0) {
                    return invalid(format!("CPT utility needs xi_ref > 0, got {xi_ref}"));
                }
                if self.domain != Domain::NonnegativeReals {
                    return invalid("CPT utility uses the nonnegative_reals domain above its floor");
                }
            }
        }
        Ok(())
    }

    /// Risk parameter `δ` for exponential and power utilities.
    pub fn risk_param(&self) -> Option<f64> {
        match self.kind {
            UtilityKind::Exponential { delta } | UtilityKind::Power { delta } => Some(delta),
            UtilityKind::Cpt { .. } => None,
        }
    }

    fn shift(&self) -> f64 {
        match self.kind {
            UtilityKind::Cpt { xi_ref, .. } => xi_ref,
            _ => 0.0,
        }
    }

    /// Whether a (relative) wealth level is admissible.
    pub fn admits(&self, x: f64) -> bool {
        self.domain.contains(x + self.shift())
    }

    /// Utility of a relative wealth level; `-inf` outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.admits(x) {
            return f64::NEG_INFINITY;
        }
        match self.kind {
            UtilityKind::Exponential { delta } => -(-x / delta).exp(),
            UtilityKind::Power { delta } => {
                let p = 1.0 - 1.0 / delta;
                x.powf(p) / p
            }
            UtilityKind::Cpt { a, b, gamma, delta_loss, .. } => {
                if x <= 0.0 {
                    -a * (-x).powf(delta_loss)
                } else {
                    b * x.powf(gamma)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub initial_capital: f64,
    pub competition_weight: f64,
    pub utility: UtilitySpec,
}

impl AgentProfile {
    pub fn new(initial_capital: f64, competition_weight: f64, utility: UtilitySpec) -> Result<Self> {
        let a = Self { initial_capital, competition_weight, utility };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        check_weight(self.competition_weight)?;
        if !self.initial_capital.is_finite() {
            return invalid("initial capital must be finite");
        }
        self.utility.validate()?;
        if !self.utility.admits(self.initial_capital) {
            return invalid(format!(
                "initial capital {} lies outside the utility domain {:?}",
                self.initial_capital, self.utility.domain
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub agents: Vec<AgentProfile>,
    pub market: MarketModel,
    pub horizon: f64,
}

impl GameSpec {
    pub fn new(agents: Vec<AgentProfile>, market: MarketModel, horizon: f64) -> Result<Self> {
        let g = Self { agents, market, horizon };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return invalid("a game needs at least one agent");
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.validate().map_err(|e| Error::InvalidInput(format!("agent {i}: {e}")))?;
        }
        self.market.validate()
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.competition_weight).collect()
    }

    pub fn initial_capitals(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.initial_capital).collect()
    }

    /// `x̃0_i = x0_i − (θ_i/n) Σ_{j≠i} x0_j`.
    pub fn reduced_capital(&self, i: usize) -> f64 {
        reduced_capitals(&self.initial_capitals(), &self.weights())[i]
    }
}

pub(crate) fn reduced_capitals(x0: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = x0.len() as f64;
    let total: f64 = x0.iter().sum();
    x0.iter().zip(weights).map(|(&x, &th)| x - th / n * (total - x)).collect()
}

fn check_weight(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("competition weight must lie in [0,1], got {theta}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub reduced_capital: f64,
    /// Largest weight keeping the reduced capital positive, `n α/(1−α)` capped to `[0, 1]`.
    pub theta_upper_bound: f64,
}

/// Reduced capital and weight bound per agent. The bound is reported, never enforced.
pub fn check_feasibility(game: &GameSpec) -> Result<Vec<Feasibility>> {
    if game.agents.is_empty() {
        return invalid("feasibility check needs at least one agent");
    }
    let weights = game.weights();
    for &w in &weights {
        check_weight(w)?;
    }
    let x0 = game.initial_capitals();
    let n = x0.len() as f64;
    let total: f64 = x0.iter().sum();
    let reduced = reduced_capitals(&x0, &weights);
    Ok(game
        .agents
        .iter()
        .zip(reduced)
        .zip(&x0)
        .map(|((agent, reduced_capital), &x)| {
            let alpha = if total > 0.0 { x / total } else { f64::NAN };
            let theta_upper_bound = if alpha.is_nan() {
                0.0
            } else if alpha >= 1.0 {
                1.0
            } else {
                (n * alpha / (1.0 - alpha)).clamp(0.0, 1.0)
            };
            Feasibility { feasible: agent.utility.admits(reduced_capital), reduced_capital, theta_upper_bound }
        })
        .collect())
}

/// `θ̂ = Σ_i θ_i/(n+θ_i)`.
pub fn theta_hat(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return invalid("theta_hat needs at least one weight");
    }
    for &w in weights {
        check_weight(w)?;
    }
    Ok(theta_hat_unchecked(weights))
}

pub(crate) fn theta_hat_unchecked(weights: &[f64]) -> f64 {
    let n = weights.len() as f64;
    weights.iter().map(|&t| t / (n + t)).sum()
}

/// Closed-form solver of the equilibrium linear system for fixed weights.
#[derive(Clone, Debug)]
pub struct NashAggregator {
    weights: Vec<f64>,
    own: Vec<f64>,
    cross: Vec<f64>,
    theta_hat: f64,
}

impl NashAggregator {
    pub fn new(weights: &[f64]) -> Result<Self> {
        theta_hat(weights)?;
        Ok(Self::unchecked(weights))
    }

    /// Skips the `[0,1]` check; callers must ensure `θ̂ < 1`.
    pub(crate) fn unchecked(weights: &[f64]) -> Self {
        let n = weights.len() as f64;
        let theta_hat = theta_hat_unchecked(weights);
        let own = weights.iter().map(|&t| n / (n + t)).collect();
        let cross = weights.iter().map(|&t| t / ((n + t) * (1.0 - theta_hat))).collect();
        Self { weights: weights.to_vec(), own, cross, theta_hat }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Maps one value per agent (at a fixed path/time/asset) to the equilibrium values.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; psi.len()];
        self.apply_into(psi, &mut out);
        out
    }

    pub fn apply_into(&self, psi: &[f64], out: &mut [f64]) {
        debug_assert_eq!(psi.len(), self.n());
        let pooled: f64 = psi.iter().zip(&self.own).map(|(p, c)| p * c).sum();
        for i in 0..psi.len() {
            out[i] = self.own[i] * psi[i] + self.cross[i] * pooled;
        }
    }

    /// Per-agent constants `C_i` when every `ψ^{i,*}` is `δ_i` times a common direction.
    pub fn constants(&self, deltas: &[f64]) -> Vec<f64> {
        self.apply(deltas)
    }
}

fn check_family(psi: &[StrategyProcess], weights: &[f64]) -> Result<(usize, usize, usize)> {
    if psi.is_empty() {
        return invalid("need at least one agent strategy");
    }
    if psi.len() != weights.len() {
        return invalid(format!("{} strategies but {} weights", psi.len(), weights.len()));
    }
    let refs: Vec<&StrategyProcess> = psi.iter().collect();
    broadcast_shape(&refs)
}

fn map_pointwise(
    psi: &[StrategyProcess],
    shape: (usize, usize, usize),
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> Vec<StrategyProcess> {
    let n = psi.len();
    let mut out: Vec<Array3<f64>> = (0..n).map(|_| Array3::zeros(shape)).collect();
    let mut inp = vec![0.0; n];
    let mut res = vec![0.0; n];
    let (pp, tt, dd) = shape;
    for p in 0..pp {
        for t in 0..tt {
            for k in 0..dd {
                for (i, s) in psi.iter().enumerate() {
                    inp[i] = s.at(p, t, k);
                }
                f(&inp, &mut res);
                for i in 0..n {
                    out[i][[p, t, k]] = res[i];
                }
            }
        }
    }
    let unit = psi[0].unit();
    out.into_iter().map(|v| StrategyProcess::new(unit, v).expect("non-empty shape")).collect()
}

/// Nash equilibrium strategies from single-agent optima, pointwise.
pub fn aggregate_nash(psi_star: &[StrategyProcess], weights: &[f64]) -> Result<Vec<StrategyProcess>> {
    let shape = check_family(psi_star, weights)?;
    let agg = NashAggregator::new(weights)?;
    Ok(map_pointwise(psi_star, shape, |inp, out| agg.apply_into(inp, out)))
}

/// Max over agents, paths, times and assets of `|ψ^{i,*} − φ^i + (θ_i/n) Σ_{j≠i} φ^j|`.
pub fn verify_linear_system(phi: &[StrategyProcess], psi_star: &[StrategyProcess], weights: &[f64]) -> Result<f64> {
    if phi.len() != psi_star.len() {
        return invalid("phi and psi_star have different agent counts");
    }
    let all: Vec<StrategyProcess> = phi.iter().chain(psi_star).cloned().collect();
    let refs: Vec<&StrategyProcess> = all.iter().collect();
    let (pp, tt, dd) = broadcast_shape(&refs)?;
    check_family(psi_star, weights)?;
    let n = phi.len();
    let nf = n as f64;
    let mut worst = 0.0_f64;
    for p in 0..pp {
        for t in 0..tt {
            for k in 0..dd {
                let total: f64 = phi.iter().map(|s| s.at(p, t, k)).sum();
                for i in 0..n {
                    let own = phi[i].at(p, t, k);
                    let r = psi_star[i].at(p, t, k) - own + weights[i] / nf * (total - own);
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Same system solved by LU factorization of `I − (θ_i/n)(1 − δ_ij)`; cross-check path.
pub fn solve_linear_system_direct(psi_star: &[StrategyProcess], weights: &[f64]) -> Result<Vec<StrategyProcess>> {
    let shape = check_family(psi_star, weights)?;
    theta_hat(weights)?;
    let n = weights.len();
    let nf = n as f64;
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { -weights[i] / nf });
    let lu = a.lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("equilibrium system matrix is not invertible".into()));
    }
    let mut failed = false;
    let out = map_pointwise(psi_star, shape, |inp, out| match lu.solve(&DVector::from_column_slice(inp)) {
        Some(x) => out.copy_from_slice(x.as_slice()),
        None => failed = true,
    });
    if failed {
        return Err(Error::Singular("LU solve failed".into()));
    }
    Ok(out)
}
