//! Strategy processes on a (path, time, asset) lattice.
//!
//! A strategy is stored as a three-axis array. An axis of length one is
//! broadcast, so a constant strategy is `(1, 1, d)`, a deterministic function
//! of time is `(1, M+1, d)` and a path functional is `(P, M+1, d)`. All
//! pointwise operations (aggregation, residuals, unit conversion) go through
//! the same broadcast rules.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::markets::PathSet;

/// What a strategy value measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    /// Number of shares held.
    Shares,
    /// Currency amount invested, `shares · S_k(t)`.
    Amounts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProcess {
    unit: Unit,
    values: Array3<f64>,
}

impl StrategyProcess {
    pub fn new(unit: Unit, values: Array3<f64>) -> Result<Self> {
        let (p, t, d) = values.dim();
        if p == 0 || t == 0 || d == 0 {
            return invalid("strategy arrays must be non-empty on every axis");
        }
        Ok(Self { unit, values })
    }

    /// Same value at every path and time.
    pub fn constant(unit: Unit, per_asset: &[f64]) -> Self {
        assert!(!per_asset.is_empty(), "constant strategy needs at least one asset");
        let values = Array3::from_shape_fn((1, 1, per_asset.len()), |(_, _, k)| per_asset[k]);
        Self { unit, values }
    }

    /// Deterministic in time; `values` is `(times, assets)`.
    pub fn deterministic(unit: Unit, values: Array2<f64>) -> Result<Self> {
        let (t, d) = values.dim();
        Self::new(unit, values.into_shape_with_order((1, t, d)).expect("contiguous reshape"))
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn n_assets(&self) -> usize {
        self.values.dim().2
    }

    pub fn is_constant(&self) -> bool {
        let (p, t, _) = self.values.dim();
        p == 1 && t == 1
    }

    /// Broadcast lookup.
    #[inline]
    pub fn at(&self, path: usize, time: usize, asset: usize) -> f64 {
        let (p, t, d) = self.values.dim();
        let pi = if p == 1 { 0 } else { path };
        let ti = if t == 1 { 0 } else { time };
        let ki = if d == 1 { 0 } else { asset };
        self.values[[pi, ti, ki]]
    }

    /// Shares held at `(path, time, asset)`, converting from amounts with the path's price.
    #[inline]
    pub fn shares_at(&self, paths: &PathSet, path: usize, time: usize, asset: usize) -> f64 {
        match self.unit {
            Unit::Shares => self.at(path, time, asset),
            Unit::Amounts => self.at(path, time, asset) / paths.prices[[path, time, asset]],
        }
    }

    pub(crate) fn check_against(&self, paths: &PathSet) -> Result<()> {
        let (p, t, d) = self.values.dim();
        let (pp, pt, pd) = paths.prices.dim();
        if (p != 1 && p != pp) || (t != 1 && t != pt) || d != pd {
            return invalid(format!("strategy shape {:?} does not fit path set shape {:?}", (p, t, d), (pp, pt, pd)));
        }
        Ok(())
    }

    /// Materialize as shares on every `(path, time, asset)` of `paths`.
    pub fn to_shares(&self, paths: &PathSet) -> Result<StrategyProcess> {
        self.check_against(paths)?;
        if self.unit == Unit::Shares {
            return Ok(self.clone());
        }
        let (pp, pt, pd) = paths.prices.dim();
        let values = Array3::from_shape_fn((pp, pt, pd), |(p, t, k)| self.shares_at(paths, p, t, k));
        Ok(Self { unit: Unit::Shares, values })
    }

    pub fn to_amounts(&self, paths: &PathSet) -> Result<StrategyProcess> {
        self.check_against(paths)?;
        if self.unit == Unit::Amounts {
            return Ok(self.clone());
        }
        let (pp, pt, pd) = paths.prices.dim();
        let values = Array3::from_shape_fn((pp, pt, pd), |(p, t, k)| self.at(p, t, k) * paths.prices[[p, t, k]]);
        Ok(Self { unit: Unit::Amounts, values })
    }

    /// Pointwise `a·self + b·other` on the broadcast shape.
    pub fn linear_combination(&self, a: f64, other: &StrategyProcess, b: f64) -> Result<StrategyProcess> {
        let shape = broadcast_shape(&[self, other])?;
        if self.unit != other.unit {
            return invalid("cannot combine strategies with different units");
        }
        let values = Array3::from_shape_fn(shape, |(p, t, k)| a * self.at(p, t, k) + b * other.at(p, t, k));
        Ok(Self { unit: self.unit, values })
    }

    pub fn scaled(&self, factor: f64) -> StrategyProcess {
        Self { unit: self.unit, values: &self.values * factor }
    }
}

/// Common broadcast shape of a family of strategies sharing one unit.
pub fn broadcast_shape(strategies: &[&StrategyProcess]) -> Result<(usize, usize, usize)> {
    let first = match strategies.first() {
        Some(s) => s,
        None => return invalid("no strategies given"),
    };
    let mut shape = first.dim();
    for s in &strategies[1..] {
        if s.unit != first.unit {
            return invalid("strategies use different units; convert to shares first");
        }
        let (p, t, d) = s.dim();
        shape.0 = merge_axis(shape.0, p, "path")?;
        shape.1 = merge_axis(shape.1, t, "time")?;
        if d != shape.2 {
            return invalid(format!("asset count mismatch: {} vs {}", shape.2, d));
        }
    }
    Ok(shape)
}

fn merge_axis(a: usize, b: usize, name: &str) -> Result<usize> {
    match (a, b) {
        (x, y) if x == y => Ok(x),
        (1, y) => Ok(y),
        (x, 1) => Ok(x),
        (x, y) => invalid(format!("mismatched {name} grid lengths: {x} vs {y}")),
    }
}
