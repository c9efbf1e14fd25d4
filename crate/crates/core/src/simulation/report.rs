use std::io::Write;

use serde::{Deserialize, Serialize};

use super::flow::{realize_equilibrium, GainsScheme};
use super::moments::{bs_exp_moments, mc_moments, BsExpMoments};
use super::verify::{best_response_gap, BestResponseReport, DeviationGrid};
use crate::equilibrium::EquilibriumResult;
use crate::error::Result;
use crate::game::{GameSpec, UtilityKind};
use crate::markets::{MarketModel, PathSet};
use crate::stats::Estimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: usize,
    /// `None` when the relative wealth leaves the utility domain on some path.
    pub expected_utility: Option<Estimate>,
    pub domain_violations: usize,
    pub terminal_wealth: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_probability: Option<Estimate>,
    /// Closed forms when every agent is exponential in a Black-Scholes market.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<BsExpMoments>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub market: String,
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub exhaustive: bool,
    pub scheme: GainsScheme,
    pub agents: Vec<AgentReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub best_response: Vec<BestResponseReport>,
}

/// Evaluates the equilibrium on `paths` and collects per-agent statistics.
pub fn build_report(
    game: &GameSpec,
    eq: &EquilibriumResult,
    paths: &PathSet,
    loss_levels: Option<&[f64]>,
    grid: Option<&DeviationGrid>,
) -> Result<SimulationReport> {
    let scheme = GainsScheme::for_market(&game.market);
    let realized = realize_equilibrium(game, eq, paths, scheme)?;
    let mc = mc_moments(&realized, loss_levels)?;
    let all_exp = game.agents.iter().all(|a| matches!(a.utility.kind, UtilityKind::Exponential { .. }));
    let closed = if all_exp && matches!(game.market, MarketModel::BlackScholes(_)) {
        Some(bs_exp_moments(game, loss_levels)?)
    } else {
        None
    };
    let agents = (0..game.n())
        .zip(mc)
        .map(|(i, m)| {
            let u = realized.relative_utility(i, game);
            AgentReport {
                agent: i,
                expected_utility: u.estimate,
                domain_violations: u.domain_violations,
                terminal_wealth: m.terminal_wealth,
                loss_level: m.loss_level,
                loss_probability: m.loss_probability,
                closed_form: closed.as_ref().map(|c| c[i].clone()),
            }
        })
        .collect();
    let best_response = match grid {
        Some(g) => (0..game.n()).map(|i| best_response_gap(i, &realized, game, g)).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(SimulationReport {
        market: game.market.name().to_string(),
        n_paths: paths.n_paths(),
        steps: paths.n_steps(),
        seed: paths.seed,
        exhaustive: paths.is_exhaustive(),
        scheme,
        agents,
        best_response,
    })
}

impl SimulationReport {
    /// Long format: `agent,metric,value,std_error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["agent", "metric", "value", "std_error"])?;
        let mut row = |agent: usize, metric: &str, value: f64, se: Option<f64>| {
            w.write_record([
                agent.to_string(),
                metric.to_string(),
                value.to_string(),
                se.map(|s| s.to_string()).unwrap_or_default(),
            ])
        };
        for a in &self.agents {
            if let Some(e) = &a.expected_utility {
                row(a.agent, "expected_utility", e.mean, Some(e.std_error))?;
            }
            row(a.agent, "domain_violations", a.domain_violations as f64, None)?;
            row(a.agent, "terminal_wealth", a.terminal_wealth.mean, Some(a.terminal_wealth.std_error))?;
            if let (Some(k), Some(p)) = (a.loss_level, &a.loss_probability) {
                row(a.agent, "loss_level", k, None)?;
                row(a.agent, "loss_probability", p.mean, Some(p.std_error))?;
            }
            if let Some(c) = &a.closed_form {
                row(a.agent, "closed_form_c", c.c, None)?;
                row(a.agent, "closed_form_terminal_wealth", c.expected_terminal_wealth, None)?;
                if let Some(p) = c.loss_probability {
                    row(a.agent, "closed_form_loss_probability", p, None)?;
                }
            }
        }
        for b in &self.best_response {
            row(b.agent, "best_response_max_gap", b.max_gap, Some(b.max_gap_std_error))?;
            if let Some(bound) = b.bound {
                row(b.agent, "best_response_bound", bound, None)?;
            }
            row(b.agent, "best_response_pass", if b.pass { 1.0 } else { 0.0 }, None)?;
        }
        w.flush()?;
        Ok(())
    }
}
