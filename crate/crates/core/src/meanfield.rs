//! Mean-field limit: a continuum of agents with random type `ζ = (ξ, δ, θ)`.
//!
//! The representative agent solves the auxiliary problem with capital
//! `ξ − θ ξ̄` and then holds `φ* = ψ* + θ/(1−θ̄) · E[ψ* | market path]`.
//! Types are independent of the market, so the conditional expectation is an
//! average over the type distribution at a fixed market path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::solve_game;
use crate::error::{invalid, Error, Result};
use crate::game::{AgentProfile, GameSpec, UtilitySpec};
use crate::markets::{MarketModel, PathSet};
use crate::simulation::flow::{solution_gains, unit_gains};
use crate::simulation::GainsScheme;
use crate::solvers::{solve_single_agent, SingleAgentSolution, SolverConfig};
use crate::stats::{mean_and_se, ols_slope, pairwise_sum};

/// Stream offset keeping type draws apart from market path streams.
const TYPE_STREAM_BASE: u64 = 1 << 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFamily {
    Exponential,
    Power,
}

impl UtilityFamily {
    pub fn utility(self, delta: f64) -> Result<UtilitySpec> {
        match self {
            UtilityFamily::Exponential => UtilitySpec::exponential(delta),
            UtilityFamily::Power => UtilitySpec::power(delta),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationAtom {
    pub xi: f64,
    pub delta: f64,
    pub theta: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarDist {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl ScalarDist {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ScalarDist::Constant { value } => value.is_finite(),
            ScalarDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            ScalarDist::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma >= 0.0,
            ScalarDist::Discrete { values, probs } => {
                !values.is_empty()
                    && values.len() == probs.len()
                    && probs.iter().all(|p| *p >= 0.0)
                    && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-12
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("{name}: malformed distribution {self:?}"))
        }
    }

    /// Smallest and largest attainable values.
    fn support(&self) -> (f64, f64) {
        match self {
            ScalarDist::Constant { value } => (*value, *value),
            ScalarDist::Uniform { low, high } => (*low, *high),
            ScalarDist::LogNormal { sigma, mu } if *sigma == 0.0 => (mu.exp(), mu.exp()),
            ScalarDist::LogNormal { .. } => (0.0, f64::INFINITY),
            ScalarDist::Discrete { values, .. } => (
                values.iter().cloned().fold(f64::INFINITY, f64::min),
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDist::Constant { value } => *value,
            ScalarDist::Uniform { low, high } => Uniform::new(*low, *high).expect("validated bounds").sample(rng),
            ScalarDist::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma).expect("validated").sample(rng),
            ScalarDist::Discrete { values, probs } => values[pick(probs, rng.random())],
        }
    }
}

fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TypeDistribution {
    /// Finitely many types; conditional expectations are exact.
    Atoms { atoms: Vec<PopulationAtom> },
    /// Independent marginals, represented by `samples` fixed-seed draws.
    Sampled { xi: ScalarDist, delta: ScalarDist, theta: ScalarDist, samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub family: UtilityFamily,
    pub distribution: TypeDistribution,
}

fn type_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TYPE_STREAM_BASE + stream);
    rng
}

impl PopulationSpec {
    pub fn atoms_spec(family: UtilityFamily, atoms: Vec<PopulationAtom>) -> Result<Self> {
        let p = Self { family, distribution: TypeDistribution::Atoms { atoms } };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.distribution {
            TypeDistribution::Atoms { atoms } => {
                if atoms.is_empty() {
                    return invalid("population needs at least one atom");
                }
                let total: f64 = atoms.iter().map(|a| a.prob).sum();
                if (total - 1.0).abs() > 1e-12 || atoms.iter().any(|a| !(a.prob >= 0.0)) {
                    return invalid(format!("atom probabilities must be non-negative and sum to 1, got {total}"));
                }
                for (i, a) in atoms.iter().enumerate() {
                    check_type(a.xi, a.delta, a.theta).map_err(|e| Error::InvalidInput(format!("atom {i}: {e}")))?;
                }
            }
            TypeDistribution::Sampled { xi, delta, theta, samples, .. } => {
                xi.validate("xi")?;
                delta.validate("delta")?;
                theta.validate("theta")?;
                if *samples == 0 {
                    return invalid("sampled population needs at least one draw");
                }
                let (xl, xh) = xi.support();
                let (dl, dh) = delta.support();
                let (tl, th) = theta.support();
                if !(xl > 0.0 || matches!(xi, ScalarDist::LogNormal { .. }))
                    || !xh.is_finite() && !matches!(xi, ScalarDist::LogNormal { .. })
                {
                    return invalid("xi must be positive");
                }
                if !(dl > 0.0 || matches!(delta, ScalarDist::LogNormal { .. })) || !dh.is_finite() {
                    return invalid("delta must be positive and bounded");
                }
                if tl < 0.0 || th > 1.0 {
                    return invalid("theta must lie in [0,1]");
                }
            }
        }
        let atoms = self.atoms()?;
        let theta_bar = mean_of(&atoms, |a| a.theta);
        if !(theta_bar < 1.0) {
            return invalid(format!("mean competition weight must be below 1, got {theta_bar}"));
        }
        if self.family == UtilityFamily::Power {
            let xi_bar = mean_of(&atoms, |a| a.xi);
            if atoms.iter().any(|a| !(a.xi - a.theta * xi_bar > 0.0)) {
                return invalid("power utility needs xi − theta·mean(xi) > 0 for every type");
            }
        }
        Ok(())
    }

    /// Types with probabilities; sampled populations become equally weighted draws.
    pub fn atoms(&self) -> Result<Vec<PopulationAtom>> {
        match &self.distribution {
            TypeDistribution::Atoms { atoms } => Ok(atoms.clone()),
            TypeDistribution::Sampled { samples, seed, .. } => self.draw(*seed, 0, *samples).map(|draws| {
                let p = 1.0 / *samples as f64;
                draws.into_iter().map(|(xi, delta, theta)| PopulationAtom { xi, delta, theta, prob: p }).collect()
            }),
        }
    }

    /// `n` i.i.d. types from stream `stream` of `seed`.
    pub fn draw(&self, seed: u64, stream: u64, n: usize) -> Result<Vec<(f64, f64, f64)>> {
        let mut rng = type_rng(seed, stream);
        let out = match &self.distribution {
            TypeDistribution::Atoms { atoms } => {
                let probs: Vec<f64> = atoms.iter().map(|a| a.prob).collect();
                (0..n)
                    .map(|_| {
                        let a = &atoms[pick(&probs, rng.random())];
                        (a.xi, a.delta, a.theta)
                    })
                    .collect()
            }
            TypeDistribution::Sampled { xi, delta, theta, .. } => (0..n)
                .map(|_| {
                    let x = xi.sample(&mut rng);
                    let d = delta.sample(&mut rng);
                    let t = theta.sample(&mut rng);
                    (x, d, t)
                })
                .collect(),
        };
        Ok(out)
    }
}

fn check_type(xi: f64, delta: f64, theta: f64) -> Result<()> {
    if !(xi > 0.0) || !xi.is_finite() {
        return invalid(format!("initial capital must be positive, got {xi}"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return invalid(format!("risk parameter must be positive, got {delta}"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return invalid(format!("competition weight must lie in [0,1], got {theta}"));
    }
    Ok(())
}

fn mean_of(atoms: &[PopulationAtom], f: impl Fn(&PopulationAtom) -> f64) -> f64 {
    let terms: Vec<f64> = atoms.iter().map(|a| a.prob * f(a)).collect();
    pairwise_sum(&terms)
}

#[derive(Clone, Debug)]
pub struct MeanFieldEquilibrium {
    pub atoms: Vec<PopulationAtom>,
    pub theta_bar: f64,
    pub xi_bar: f64,
    pub delta_bar: f64,
    /// Auxiliary capital `ξ − θ ξ̄` per atom.
    pub reduced_capitals: Vec<f64>,
    /// Time-0 amounts of the auxiliary optimum per atom.
    pub psi_time0: Vec<Vec<f64>>,
    /// Population average of `psi_time0`.
    pub mean_psi_time0: Vec<f64>,
    /// Time-0 amounts of the representative equilibrium strategy per atom.
    pub phi_time0: Vec<Vec<f64>>,
    pub unique: bool,
    pub solutions: Vec<SingleAgentSolution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSummary {
    pub theta_bar: f64,
    pub xi_bar: f64,
    pub delta_bar: f64,
    pub atoms: Vec<PopulationAtom>,
    pub reduced_capitals: Vec<f64>,
    pub psi_time0: Vec<Vec<f64>>,
    pub mean_psi_time0: Vec<f64>,
    pub phi_time0: Vec<Vec<f64>>,
    pub unique: bool,
}

impl MeanFieldEquilibrium {
    pub fn summary(&self) -> MeanFieldSummary {
        MeanFieldSummary {
            theta_bar: self.theta_bar,
            xi_bar: self.xi_bar,
            delta_bar: self.delta_bar,
            atoms: self.atoms.clone(),
            reduced_capitals: self.reduced_capitals.clone(),
            psi_time0: self.psi_time0.clone(),
            mean_psi_time0: self.mean_psi_time0.clone(),
            phi_time0: self.phi_time0.clone(),
            unique: self.unique,
        }
    }

    /// Time-0 amounts of `φ*` for a type outside the atom list.
    pub fn phi_for_type(
        &self,
        family: UtilityFamily,
        market: &MarketModel,
        horizon: f64,
        cfg: &SolverConfig,
        xi: f64,
        delta: f64,
        theta: f64,
    ) -> Result<Vec<f64>> {
        let capital = xi - theta * self.xi_bar;
        let sol = solve_single_agent(market, &family.utility(delta)?, capital, horizon, cfg)?;
        let c = theta / (1.0 - self.theta_bar);
        Ok(sol.time0_amounts(capital).iter().zip(&self.mean_psi_time0).map(|(p, m)| p + c * m).collect())
    }
}

pub fn mf_equilibrium(
    population: &PopulationSpec,
    market: &MarketModel,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<MeanFieldEquilibrium> {
    population.validate()?;
    market.validate()?;
    let atoms = population.atoms()?;
    let theta_bar = mean_of(&atoms, |a| a.theta);
    let xi_bar = mean_of(&atoms, |a| a.xi);
    let delta_bar = mean_of(&atoms, |a| a.delta);
    let reduced_capitals: Vec<f64> = atoms.iter().map(|a| a.xi - a.theta * xi_bar).collect();
    let solutions = atoms
        .par_iter()
        .zip(&reduced_capitals)
        .map(|(a, &x)| solve_single_agent(market, &population.family.utility(a.delta)?, x, horizon, cfg))
        .collect::<Result<Vec<_>>>()?;
    let psi_time0: Vec<Vec<f64>> = solutions.iter().zip(&reduced_capitals).map(|(s, &x)| s.time0_amounts(x)).collect();
    let d = psi_time0[0].len();
    let mean_psi_time0: Vec<f64> = (0..d)
        .map(|k| {
            let terms: Vec<f64> = atoms.iter().zip(&psi_time0).map(|(a, p)| a.prob * p[k]).collect();
            pairwise_sum(&terms)
        })
        .collect();
    let phi_time0 = atoms
        .iter()
        .zip(&psi_time0)
        .map(|(a, p)| {
            let c = a.theta / (1.0 - theta_bar);
            p.iter().zip(&mean_psi_time0).map(|(x, m)| x + c * m).collect()
        })
        .collect();
    Ok(MeanFieldEquilibrium {
        unique: solutions.iter().all(|s| s.unique),
        atoms,
        theta_bar,
        xi_bar,
        delta_bar,
        reduced_capitals,
        psi_time0,
        mean_psi_time0,
        phi_time0,
        solutions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCheck {
    /// Max over paths of `|X̄_avg − X̄_aux|`.
    pub residual: f64,
    /// Max over paths of the discrepancy in combined standard errors (sampled check only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_z: Option<f64>,
    pub n_paths: usize,
}

struct TypeGains {
    /// Per atom and path, auxiliary gains.
    gains: Vec<Vec<f64>>,
}

fn type_gains(mfe: &MeanFieldEquilibrium, market: &MarketModel, paths: &PathSet) -> Result<TypeGains> {
    let scheme = GainsScheme::for_market(market);
    let unit = unit_gains(market, paths, scheme)?;
    let gains = mfe
        .solutions
        .par_iter()
        .zip(&mfe.reduced_capitals)
        .map(|(s, &x)| solution_gains(s, x, market, paths, scheme, &unit))
        .collect::<Result<Vec<_>>>()?;
    Ok(TypeGains { gains })
}

fn weighted_path_mean(atoms: &[PopulationAtom], per_atom: &[Vec<f64>], p: usize) -> f64 {
    let terms: Vec<f64> = atoms.iter().zip(per_atom).map(|(a, v)| a.prob * v[p]).collect();
    pairwise_sum(&terms)
}

/// Compares, on every market path, the population average of terminal
/// wealth under `φ*` with `E[Z^{ψ*}_T | path] / (1 − θ̄)`.
pub fn mf_fixed_point_check(
    mfe: &MeanFieldEquilibrium,
    market: &MarketModel,
    paths: &PathSet,
) -> Result<FixedPointCheck> {
    let tg = type_gains(mfe, market, paths)?;
    let np = paths.n_paths();
    let scale = 1.0 / (1.0 - mfe.theta_bar);
    let residual = (0..np)
        .into_par_iter()
        .map(|p| {
            let mean_g = weighted_path_mean(&mfe.atoms, &tg.gains, p);
            let wealth: Vec<f64> =
                mfe.atoms.iter().zip(&tg.gains).map(|(a, g)| a.xi + g[p] + a.theta * scale * mean_g).collect();
            let z: Vec<f64> = mfe.reduced_capitals.iter().zip(&tg.gains).map(|(x, g)| x + g[p]).collect();
            let avg = weighted_path_mean(&mfe.atoms, &wealth.iter().map(|w| vec![*w]).collect::<Vec<_>>(), 0);
            let aux = scale * weighted_path_mean(&mfe.atoms, &z.iter().map(|w| vec![*w]).collect::<Vec<_>>(), 0);
            (avg - aux).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(FixedPointCheck { residual, max_z: None, n_paths: np })
}

/// Fixed-point check for a sampled population: `X̄` is averaged over
/// `fresh_samples` new type draws and compared with the value implied by
/// the draws the equilibrium was built from.
pub fn mf_fixed_point_check_sampled(
    mfe: &MeanFieldEquilibrium,
    population: &PopulationSpec,
    market: &MarketModel,
    horizon: f64,
    cfg: &SolverConfig,
    paths: &PathSet,
    fresh_seed: u64,
    fresh_samples: usize,
) -> Result<FixedPointCheck> {
    let TypeDistribution::Sampled { .. } = population.distribution else {
        return invalid("sampled fixed-point check needs a sampled population");
    };
    let fresh: Vec<PopulationAtom> = population
        .draw(fresh_seed, 1, fresh_samples)?
        .into_iter()
        .map(|(xi, delta, theta)| PopulationAtom { xi, delta, theta, prob: 1.0 / fresh_samples as f64 })
        .collect();
    let scheme = GainsScheme::for_market(market);
    let unit = unit_gains(market, paths, scheme)?;
    let fresh_gains = fresh
        .par_iter()
        .map(|a| {
            let capital = a.xi - a.theta * mfe.xi_bar;
            let sol = solve_single_agent(market, &population.family.utility(a.delta)?, capital, horizon, cfg)?;
            solution_gains(&sol, capital, market, paths, scheme, &unit)
        })
        .collect::<Result<Vec<_>>>()?;
    let base = type_gains(mfe, market, paths)?;
    let scale = 1.0 / (1.0 - mfe.theta_bar);
    let np = paths.n_paths();
    let rows: Vec<(f64, f64)> = (0..np)
        .into_par_iter()
        .map(|p| {
            let mean_g = weighted_path_mean(&mfe.atoms, &base.gains, p);
            let wealth: Vec<f64> =
                fresh.iter().zip(&fresh_gains).map(|(a, g)| a.xi + g[p] + a.theta * scale * mean_g).collect();
            let z: Vec<f64> = mfe.reduced_capitals.iter().zip(&base.gains).map(|(x, g)| scale * (x + g[p])).collect();
            let (avg, se_a) = mean_and_se(&wealth);
            let (aux, se_b) = mean_and_se(&z);
            let diff = (avg - aux).abs();
            (diff, diff / (se_a * se_a + se_b * se_b).sqrt())
        })
        .collect();
    Ok(FixedPointCheck {
        residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        max_z: Some(rows.iter().map(|r| r.1).fold(0.0, f64::max)),
        n_paths: np,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    /// Mean over replications of the agent-averaged Euclidean distance
    /// between n-agent and mean-field time-0 amounts.
    pub mean_error: f64,
    pub std_error: f64,
    pub replications: usize,
    /// Draws discarded because some reduced capital left the utility domain.
    pub resamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub points: Vec<ConvergencePoint>,
    /// OLS slope of `ln(error)` on `ln(n)`; absent when some error is zero.
    pub log_log_slope: Option<f64>,
}

impl ConvergenceCurve {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "mean_error", "std_error", "replications", "resamples"])?;
        for p in &self.points {
            w.write_record([
                p.n.to_string(),
                p.mean_error.to_string(),
                p.std_error.to_string(),
                p.replications.to_string(),
                p.resamples.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const MAX_RESAMPLES: usize = 1000;

/// Draws i.i.d. n-agent games, solves each exactly and measures the
/// distance of every agent's strategy to the mean-field strategy of the
/// same type.
pub fn n_agent_to_mf_convergence(
    population: &PopulationSpec,
    market: &MarketModel,
    horizon: f64,
    n_list: &[usize],
    replications: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ConvergenceCurve> {
    if n_list.is_empty() || n_list.contains(&0) || replications == 0 {
        return invalid("convergence study needs positive agent counts and replications");
    }
    let mfe = mf_equilibrium(population, market, horizon, cfg)?;
    let mut points = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let results = (0..replications)
            .into_par_iter()
            .map(|r| -> Result<(f64, usize)> {
                let stream = ((idx as u64) << 32) + r as u64 + 2;
                let mut resamples = 0;
                let mut rng_stream = stream;
                loop {
                    let draws = population.draw(seed, rng_stream, n)?;
                    let agents = draws
                        .iter()
                        .map(|&(xi, delta, theta)| AgentProfile::new(xi, theta, population.family.utility(delta)?))
                        .collect::<Result<Vec<_>>>()?;
                    let game = GameSpec::new(agents, market.clone(), horizon)?;
                    match solve_game(&game, cfg) {
                        Ok(eq) => {
                            let mut errs = Vec::with_capacity(n);
                            for (i, &(xi, delta, theta)) in draws.iter().enumerate() {
                                let mf = mfe.phi_for_type(population.family, market, horizon, cfg, xi, delta, theta)?;
                                let e: f64 = eq.phi_star[i].iter().zip(&mf).map(|(a, b)| (a - b).powi(2)).sum();
                                errs.push(e.sqrt());
                            }
                            return Ok((pairwise_sum(&errs) / n as f64, resamples));
                        }
                        Err(Error::InvalidInput(_)) if resamples < MAX_RESAMPLES => {
                            resamples += 1;
                            rng_stream += (replications as u64) << 16;
                        }
                        Err(e) => return Err(e),
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let errs: Vec<f64> = results.iter().map(|r| r.0).collect();
        let (mean_error, std_error) = mean_and_se(&errs);
        points.push(ConvergencePoint {
            n,
            mean_error,
            std_error,
            replications,
            resamples: results.iter().map(|r| r.1).sum(),
        });
    }
    let log_log_slope = if points.len() >= 2 && points.iter().all(|p| p.mean_error > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.mean_error.ln()).collect();
        Some(ols_slope(&x, &y))
    } else {
        None
    };
    Ok(ConvergenceCurve { points, log_log_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::theta_hat;
    use crate::markets::{BlackScholesParams, SimulationGrid};

    fn bs() -> MarketModel {
        MarketModel::BlackScholes(BlackScholesParams::one_dim(0.05, 0.2, 1.0))
    }

    fn two_atoms(theta: f64) -> PopulationSpec {
        PopulationSpec::atoms_spec(
            UtilityFamily::Exponential,
            vec![
                PopulationAtom { xi: 1.0, delta: 1.0, theta, prob: 0.5 },
                PopulationAtom { xi: 1.0, delta: 2.0, theta, prob: 0.5 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn two_atom_closed_form() {
        let m = mf_equilibrium(&two_atoms(0.5), &bs(), 1.0, &SolverConfig::default()).unwrap();
        assert!((m.phi_time0[0][0] - 3.125).abs() < 1e-12);
        assert!((m.phi_time0[1][0] - 4.375).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_leave_auxiliary_optimum() {
        let m = mf_equilibrium(&two_atoms(0.0), &bs(), 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(m.phi_time0, m.psi_time0);
        let ps = bs().generate_paths(1.0, &SimulationGrid::new(1, 200, 3)).unwrap();
        assert!(mf_fixed_point_check(&m, &bs(), &ps).unwrap().residual <= 1e-12);
    }

    #[test]
    fn fixed_point_with_atoms() {
        let m = mf_equilibrium(&two_atoms(0.5), &bs(), 1.0, &SolverConfig::default()).unwrap();
        let ps = bs().generate_paths(1.0, &SimulationGrid::new(1, 1000, 4)).unwrap();
        assert!(mf_fixed_point_check(&m, &bs(), &ps).unwrap().residual <= 1e-10);
    }

    #[test]
    fn point_mass_matches_symmetric_limit() {
        let theta = 0.4;
        let pop = PopulationSpec::atoms_spec(
            UtilityFamily::Exponential,
            vec![PopulationAtom { xi: 1.0, delta: 1.5, theta, prob: 1.0 }],
        )
        .unwrap();
        let m = mf_equilibrium(&pop, &bs(), 1.0, &SolverConfig::default()).unwrap();
        // symmetric n-agent amounts, Richardson-extrapolated in 1/n
        let sym = |n: usize| {
            let agg = crate::game::NashAggregator::new(&vec![theta; n]).unwrap();
            agg.apply(&vec![1.5 * 1.25; n])[0]
        };
        let n = 1_000_000;
        let limit = 2.0 * sym(2 * n) - sym(n);
        assert!((m.phi_time0[0][0] - limit).abs() < 1e-10, "{} vs {limit}", m.phi_time0[0][0]);
    }

    #[test]
    fn theta_hat_sandwich() {
        let pop = PopulationSpec {
            family: UtilityFamily::Exponential,
            distribution: TypeDistribution::Sampled {
                xi: ScalarDist::Constant { value: 1.0 },
                delta: ScalarDist::Constant { value: 1.0 },
                theta: ScalarDist::Uniform { low: 0.0, high: 1.0 },
                samples: 10,
                seed: 1,
            },
        };
        for n in [10, 100, 1000] {
            let th: Vec<f64> = pop.draw(5, 9, n).unwrap().iter().map(|d| d.2).collect();
            let mean = th.iter().sum::<f64>() / n as f64;
            let h = theta_hat(&th).unwrap();
            assert!(n as f64 / (n as f64 + 1.0) * mean <= h + 1e-15 && h <= mean + 1e-15);
        }
    }

    #[test]
    fn mean_weight_of_one_rejected() {
        let pop = PopulationSpec {
            family: UtilityFamily::Exponential,
            distribution: TypeDistribution::Atoms {
                atoms: vec![PopulationAtom { xi: 1.0, delta: 1.0, theta: 1.0, prob: 1.0 }],
            },
        };
        assert!(pop.validate().is_err());
    }

    #[test]
    fn zero_weight_population_converges_exactly() {
        let c =
            n_agent_to_mf_convergence(&two_atoms(0.0), &bs(), 1.0, &[5, 50], 4, 7, &SolverConfig::default()).unwrap();
        assert!(c.points.iter().all(|p| p.mean_error < 1e-14));
        assert!(c.log_log_slope.is_none());
    }
}
