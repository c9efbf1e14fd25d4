//! Experiment configuration: one JSON document per run.
//!
//! Syntax errors carry the line and column reported by the parser. Semantic
//! errors name the offending field (`agents[1].theta`) and, where the key can
//! be found in the source text, its line.

use std::path::Path;

use relnash_core::markets::SimulationGrid;
use relnash_core::meanfield::{PopulationSpec, TypeDistribution, UtilityFamily};
use relnash_core::simulation::DeviationGrid;
use relnash_core::solvers::SolverConfig;
use relnash_core::{AgentProfile, GameSpec, MarketModel, UtilityKind, UtilitySpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketModel,
    /// Investment horizon in years.
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<AgentConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub x0: f64,
    pub theta: f64,
    pub utility: UtilityKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub family: UtilityFamily,
    pub distribution: TypeDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
    /// Fresh draws for the fixed-point check of a sampled population.
    #[serde(default = "default_fresh_samples")]
    pub fixed_point_samples: usize,
}

fn default_fresh_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridRange {
    fn values(&self, field: &str) -> Result<Vec<f64>, String> {
        if !(self.step > 0.0) || !(self.lo <= self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(format!("{field}: need lo ≤ hi and step > 0"));
        }
        Ok(DeviationGrid::uniform(self.lo, self.hi, self.step))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub agent: usize,
    #[serde(default)]
    pub asset: usize,
    pub offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WelfareConfig {
    pub betas: Vec<f64>,
    pub offsets: GridRange,
    #[serde(default)]
    pub asset: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    /// Defaults to `−1..1` step `0.01`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additive: Option<GridRange>,
    /// Defaults to `0..2` step `0.05`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicative: Option<GridRange>,
    /// One loss level `K_i < x0_i` per agent for loss probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_levels: Option<Vec<f64>>,
    /// Shifts one agent's equilibrium amount before verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub welfare: Option<WelfareConfig>,
}

impl VerificationConfig {
    pub fn deviation_grid(&self) -> Result<DeviationGrid, String> {
        let std = DeviationGrid::standard();
        Ok(DeviationGrid {
            additive: match &self.additive {
                Some(r) => r.values("verification.additive")?,
                None => std.additive,
            },
            multiplicative: match &self.multiplicative {
                Some(r) => r.values("verification.multiplicative")?,
                None => std.multiplicative,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Keeps the source text so semantic errors can point at a line.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    source: String,
    origin: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: cannot read: {e}", path.display())))?;
        Self::parse(source, path.display().to_string())
    }

    pub fn parse(source: String, origin: String) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(&source).map_err(|e| {
            CliError::Config(format!("{origin}:{}:{}: {}", e.line(), e.column(), strip_position(&e.to_string())))
        })?;
        let loaded = Self { config, source, origin };
        loaded.validate()?;
        Ok(loaded)
    }

    /// Error pointing at the first line mentioning `key`.
    fn error(&self, key: &str, field: &str, message: impl std::fmt::Display) -> CliError {
        let needle = format!("\"{key}\"");
        match self.source.lines().position(|l| l.contains(&needle)) {
            Some(line) => CliError::Config(format!("{}:{}: {field}: {message}", self.origin, line + 1)),
            None => CliError::Config(format!("{}: {field}: {message}", self.origin)),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        if !(c.horizon > 0.0) || !c.horizon.is_finite() {
            return Err(self.error("horizon", "horizon", "must be positive and finite"));
        }
        c.market.validate().map_err(|e| self.error("market", "market", e))?;
        match (&c.agents, &c.population) {
            (Some(_), Some(_)) => {
                return Err(self.error("population", "config", "give exactly one of `agents` and `population`"))
            }
            (None, None) => {
                return Err(CliError::Config(format!("{}: config: need `agents` or `population`", self.origin)))
            }
            (Some(_), None) => {
                self.game()?;
            }
            (None, Some(p)) => {
                self.population_spec()?;
                if let Some(cv) = &p.convergence {
                    if cv.n_list.is_empty() || cv.n_list.contains(&0) || cv.replications == 0 {
                        return Err(self.error(
                            "convergence",
                            "population.convergence",
                            "n_list needs positive entries and replications must be positive",
                        ));
                    }
                }
            }
        }
        if let Some(s) = &c.simulation {
            if s.n_paths == 0 || s.steps == 0 {
                return Err(self.error("simulation", "simulation", "paths and steps must be positive"));
            }
        }
        if let Some(v) = &c.verification {
            v.deviation_grid().map_err(|e| self.error("verification", "verification", e))?;
            let n = c.agents.as_ref().map_or(0, Vec::len);
            if let Some(k) = &v.loss_levels {
                if k.len() != n {
                    return Err(self.error("loss_levels", "verification.loss_levels", "need one level per agent"));
                }
            }
            if let Some(p) = &v.perturb {
                if p.agent >= n || p.asset >= c.market.n_assets() || !p.offset.is_finite() {
                    return Err(self.error("perturb", "verification.perturb", "agent or asset out of range"));
                }
            }
            if let Some(w) = &v.welfare {
                if w.betas.len() != n || w.betas.iter().any(|b| !(*b > 0.0)) || w.asset >= c.market.n_assets() {
                    return Err(self.error("welfare", "verification.welfare", "need one positive beta per agent"));
                }
                w.offsets
                    .values("verification.welfare.offsets")
                    .map_err(|e| self.error("welfare", "verification.welfare", e))?;
            }
        }
        Ok(())
    }

    pub fn game(&self) -> Result<GameSpec, CliError> {
        let Some(agents) = &self.config.agents else {
            return Err(CliError::Config(format!("{}: config: this command needs an `agents` list", self.origin)));
        };
        if agents.is_empty() {
            return Err(self.error("agents", "agents", "need at least one agent"));
        }
        let profiles = agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                utility_spec(&a.utility)
                    .and_then(|u| AgentProfile::new(a.x0, a.theta, u))
                    .map_err(|e| self.error("agents", &format!("agents[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        GameSpec::new(profiles, self.config.market.clone(), self.config.horizon)
            .map_err(|e| self.error("agents", "agents", e))
    }

    pub fn population_spec(&self) -> Result<PopulationSpec, CliError> {
        let Some(p) = &self.config.population else {
            return Err(CliError::Config(format!("{}: config: this command needs a `population` block", self.origin)));
        };
        let spec = PopulationSpec { family: p.family, distribution: p.distribution.clone() };
        spec.validate().map_err(|e| self.error("population", "population", e))?;
        Ok(spec)
    }

    /// Simulation grid with command-line overrides; the seed is mandatory.
    pub fn grid(&self, seed: Option<u64>, paths: Option<usize>) -> Result<SimulationGrid, CliError> {
        let Some(mut g) = self.config.simulation.clone() else {
            return Err(CliError::Config(format!(
                "{}: config: this command needs a `simulation` block with an explicit seed",
                self.origin
            )));
        };
        if let Some(s) = seed {
            g.seed = s;
        }
        if let Some(p) = paths {
            if p == 0 {
                return Err(CliError::Config("--paths must be positive".into()));
            }
            g.n_paths = p;
        }
        Ok(g)
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn utility_spec(kind: &UtilityKind) -> relnash_core::Result<UtilitySpec> {
    match *kind {
        UtilityKind::Exponential { delta } => UtilitySpec::exponential(delta),
        UtilityKind::Power { delta } => UtilitySpec::power(delta),
        UtilityKind::Cpt { a, b, gamma, delta_loss, xi_ref } => UtilitySpec::cpt(a, b, gamma, delta_loss, xi_ref),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<LoadedConfig, CliError> {
        LoadedConfig::parse(s.to_string(), "test.json".into())
    }

    const BASE: &str = r#"{
  "market": {"type": "black_scholes", "mu": [0.05], "sigma": [[0.2]], "s0": [1.0]},
  "horizon": 1.0,
  "agents": [
    {"x0": 1.0, "theta": 1.0, "utility": {"type": "exponential", "delta": 1.0}},
    {"x0": 1.0, "theta": 1.0, "utility": {"type": "exponential", "delta": 1.0}}
  ]
}"#;

    #[test]
    fn parses_base() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.game().unwrap().n(), 2);
    }

    #[test]
    fn syntax_error_has_line() {
        let bad = BASE.replace("\"horizon\": 1.0,", "\"horizon\": 1.0");
        let msg = parse(&bad).err().unwrap().to_string();
        assert!(msg.starts_with("test.json:4:"), "{msg}");
    }

    #[test]
    fn semantic_error_names_field_and_line() {
        let bad = BASE.replacen("\"theta\": 1.0", "\"theta\": 1.5", 1);
        let msg = parse(&bad).err().unwrap().to_string();
        assert!(msg.contains("test.json:4: agents[0]"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = BASE.replace("\"horizon\"", "\"horizn\"");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn exactly_one_of_agents_and_population() {
        let both = BASE.replace(
            "\"horizon\": 1.0,",
            r#""horizon": 1.0, "population": {"family": "exponential", "distribution": {"type": "atoms", "atoms": [{"xi": 1.0, "delta": 1.0, "theta": 0.0, "prob": 1.0}]}},"#,
        );
        assert!(parse(&both).err().unwrap().to_string().contains("exactly one"));
        let none =
            r#"{"market": {"type": "black_scholes", "mu": [0.05], "sigma": [[0.2]], "s0": [1.0]}, "horizon": 1.0}"#;
        assert!(parse(none).is_err());
    }
}
