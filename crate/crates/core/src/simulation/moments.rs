//! Closed-form moments for exponential investors in Black-Scholes markets.

use serde::{Deserialize, Serialize};

use super::flow::RealizedEquilibrium;
use crate::error::{invalid, Result};
use crate::game::{GameSpec, NashAggregator, UtilityKind};
use crate::markets::{BlackScholesParams, MarketModel};
use crate::stats::{normal_cdf, Estimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsExpMoments {
    pub agent: usize,
    /// `C_i` with equilibrium amounts `C_i (σσᵀ)^{-1} μ`.
    pub c: f64,
    pub expected_terminal_wealth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_probability: Option<f64>,
}

/// `E[X_i] = x0_i + C_i ‖σ^{-1}μ‖² T` and
/// `P(X_i ≤ K) = Φ((K − x0_i)/(C_i ‖σ^{-1}μ‖ √T) − ‖σ^{-1}μ‖ √T)`.
pub fn bs_exp_moments(game: &GameSpec, loss_levels: Option<&[f64]>) -> Result<Vec<BsExpMoments>> {
    game.validate()?;
    let MarketModel::BlackScholes(bs) = &game.market else {
        return invalid("closed-form moments need a Black-Scholes market");
    };
    let mut deltas = Vec::with_capacity(game.n());
    for (i, a) in game.agents.iter().enumerate() {
        match a.utility.kind {
            UtilityKind::Exponential { delta } => deltas.push(delta),
            _ => return invalid(format!("agent {i}: closed-form moments need exponential utility")),
        }
    }
    if let Some(k) = loss_levels {
        if k.len() != game.n() {
            return invalid("need one loss level per agent");
        }
    }
    let c = NashAggregator::new(&game.weights())?.constants(&deltas);
    let m: f64 = bs.market_price_of_risk()?.iter().map(|x| x * x).sum::<f64>().sqrt();
    let t = game.horizon;
    game.agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let x0 = a.initial_capital;
            let (loss_level, loss_probability) = match loss_levels {
                Some(ks) => {
                    let k = ks[i];
                    if !(k < x0) {
                        return invalid(format!("agent {i}: loss level {k} must lie below x0 = {x0}"));
                    }
                    let scale = c[i] * m * t.sqrt();
                    let p = if scale > 0.0 { normal_cdf((k - x0) / scale - m * t.sqrt()) } else { 0.0 };
                    (Some(k), Some(p))
                }
                None => (None, None),
            };
            Ok(BsExpMoments {
                agent: i,
                c: c[i],
                expected_terminal_wealth: x0 + c[i] * m * m * t,
                loss_level,
                loss_probability,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McMoments {
    pub agent: usize,
    pub terminal_wealth: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_probability: Option<Estimate>,
}

/// Sample mean of terminal wealth and of `1{X_T ≤ K}`.
pub fn mc_moments(realized: &RealizedEquilibrium, loss_levels: Option<&[f64]>) -> Result<Vec<McMoments>> {
    let n = realized.terminal_wealth.len();
    if loss_levels.is_some_and(|k| k.len() != n) {
        return invalid("need one loss level per agent");
    }
    let w = realized.weights.as_deref();
    Ok((0..n)
        .map(|i| {
            let x = &realized.terminal_wealth[i];
            let loss_level = loss_levels.map(|k| k[i]);
            let loss_probability = loss_level.map(|k| {
                let ind: Vec<f64> = x.iter().map(|&v| if v <= k { 1.0 } else { 0.0 }).collect();
                Estimate::from_samples(&ind, w)
            });
            McMoments { agent: i, terminal_wealth: Estimate::from_samples(x, w), loss_level, loss_probability }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReparamCheck {
    /// Amounts from `C_i` under the mapped parameters.
    pub aggregation_route: Vec<f64>,
    /// Amounts `(δ_i + θ_i δ̄/(1−θ̄)) μ/σ²`.
    pub formula_route: Vec<f64>,
    pub max_abs_diff: f64,
}

/// Compares two expressions for the same equilibrium amounts in a
/// one-asset market. `(deltas, thetas)` parametrize an objective in which
/// the competitor average includes the agent; mapping
/// `θ̃ = θ/(1−θ/n)`, `δ̃ = δ/(1−θ/n)` turns it into the exclusive-average
/// game solved by the linear aggregation.
pub fn reparametrization_crosscheck(
    params: &BlackScholesParams,
    deltas: &[f64],
    thetas: &[f64],
) -> Result<ReparamCheck> {
    params.validate()?;
    if params.dim() != 1 {
        return invalid("reparametrization check uses a one-asset market");
    }
    let n = deltas.len();
    if n == 0 || thetas.len() != n {
        return invalid("need matching, non-empty delta and theta lists");
    }
    let nf = n as f64;
    for (&d, &t) in deltas.iter().zip(thetas) {
        if !(d > 0.0) {
            return invalid(format!("delta must be positive, got {d}"));
        }
        if !(0.0..=1.0).contains(&t) || t == nf {
            return invalid(format!("theta must lie in [0,1] and differ from n, got {t}"));
        }
    }
    let theta_bar = thetas.iter().sum::<f64>() / nf;
    if !(theta_bar < 1.0) {
        return invalid("mean theta must be below 1");
    }
    let delta_bar = deltas.iter().sum::<f64>() / nf;
    let dir = params.merton_direction()?[0];
    let tilde_theta: Vec<f64> = thetas.iter().map(|t| t / (1.0 - t / nf)).collect();
    let tilde_delta: Vec<f64> = deltas.iter().zip(thetas).map(|(d, t)| d / (1.0 - t / nf)).collect();
    // mapped weights may exceed 1; their θ̂ equals the mean of θ, so the system stays regular
    let agg = NashAggregator::unchecked(&tilde_theta);
    let aggregation_route: Vec<f64> = agg.constants(&tilde_delta).iter().map(|c| c * dir).collect();
    let formula_route: Vec<f64> =
        deltas.iter().zip(thetas).map(|(d, t)| (d + t * delta_bar / (1.0 - theta_bar)) * dir).collect();
    let max_abs_diff = aggregation_route.iter().zip(&formula_route).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ReparamCheck { aggregation_route, formula_route, max_abs_diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AgentProfile, UtilitySpec};

    fn game(thetas: &[f64], deltas: &[f64]) -> GameSpec {
        let agents = thetas
            .iter()
            .zip(deltas)
            .map(|(&t, &d)| AgentProfile::new(1.0, t, UtilitySpec::exponential(d).unwrap()).unwrap())
            .collect();
        GameSpec::new(agents, MarketModel::BlackScholes(BlackScholesParams::one_dim(0.05, 0.2, 1.0)), 1.0).unwrap()
    }

    #[test]
    fn constants_and_classical_case() {
        let m = bs_exp_moments(&game(&[1.0, 1.0], &[1.0, 1.0]), None).unwrap();
        assert!((m[0].c - 2.0).abs() < 1e-14 && (m[1].c - 2.0).abs() < 1e-14);
        let m = bs_exp_moments(&game(&[0.0, 0.0], &[3.0, 0.5]), None).unwrap();
        assert!((m[0].c - 3.0).abs() < 1e-14);
        assert!((m[0].expected_terminal_wealth - (1.0 + 3.0 * 0.0625)).abs() < 1e-14);
    }

    #[test]
    fn loss_probability_limit() {
        let m = bs_exp_moments(&game(&[0.3], &[1.0]), Some(&[1.0 - 1e-12])).unwrap();
        assert!((m[0].loss_probability.unwrap() - normal_cdf(-0.25)).abs() < 1e-9);
        assert!(bs_exp_moments(&game(&[0.3], &[1.0]), Some(&[1.0])).is_err());
    }

    #[test]
    fn reparametrization_examples() {
        let p = BlackScholesParams::one_dim(0.05, 0.2, 1.0);
        let r = reparametrization_crosscheck(&p, &[2.0 / 3.0, 2.0 / 3.0], &[2.0 / 3.0, 2.0 / 3.0]).unwrap();
        for (a, b) in r.aggregation_route.iter().zip(&r.formula_route) {
            assert!((a - 2.5).abs() < 1e-12 && (b - 2.5).abs() < 1e-12);
        }
        let r = reparametrization_crosscheck(&p, &[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert!((r.formula_route[1] - 3.75).abs() < 1e-14);
        assert!(r.max_abs_diff < 1e-14);
    }
}
