//! Nash equilibria for investors who care about relative wealth.
//!
//! Each of `n` agents maximizes the expected utility of their terminal wealth
//! minus `θ_i / n` times the sum of the other agents' terminal wealth. Pricing
//! the competitors' wealth as a claim reduces every agent's problem to a
//! classical single-agent problem with reduced capital
//! `x̃0_i = x0_i − (θ_i/n) Σ_{j≠i} x0_j`; the equilibrium is then the unique
//! solution of a linear system in the single-agent optima.
//!
//! Layout:
//! - [`game`]: agents, utilities, feasibility and the linear aggregation.
//! - [`markets`]: Black-Scholes, jump-diffusion, Heston and CRR models and path generators.
//! - [`solvers`]: single-agent optimal strategies per (market, utility) pair.
//! - [`simulation`]: wealth, expected utilities, closed-form moments, best-response checks.
//! - [`meanfield`]: the continuum-of-agents limit.

pub mod equilibrium;
pub mod error;
pub mod game;
pub mod markets;
pub mod meanfield;
pub mod simulation;
pub mod solvers;
pub mod stats;
pub mod strategy;

pub use equilibrium::{solve_game, EquilibriumResult};
pub use error::{Error, Result};
pub use game::{
    aggregate_nash, check_feasibility, solve_linear_system_direct, theta_hat, verify_linear_system, AgentProfile,
    Domain, Feasibility, GameSpec, NashAggregator, UtilityKind, UtilitySpec,
};
pub use markets::{MarketModel, PathSet};
pub use strategy::{StrategyProcess, Unit};
