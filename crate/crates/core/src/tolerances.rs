//! Numerical thresholds used across the crate.
//!
//! Defaults are tuned for `f64`. [`Tolerances::scaled_for`] widens them for
//! lower-precision scalars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative slack for symmetry and definiteness checks.
    pub validation: f64,
    /// Optional relative singular-value cutoff overriding the default
    /// `max(rows, cols) * eps * sigma_max` numerical rank rule.
    pub rank: Option<f64>,
    /// Eigenpair residual bound, relative to the operator norm.
    pub residual: f64,
    /// Maximum distance for two eigenvalues to be matched as equal.
    pub matching: f64,
    /// A mode is overdamped when `|Re z| <= overdamped * max(1, |Im z|)`.
    pub overdamped: f64,
    /// Eigenvalues with `Im z` above `dissipativity * ||A||` are rejected.
    pub dissipativity: f64,
    /// Slack applied to disc membership and band inequalities.
    pub bounds: f64,
    /// Relative local error target of the adaptive integrator.
    pub integrator_rtol: f64,
    /// Absolute local error target of the adaptive integrator.
    pub integrator_atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            validation: 1e-10,
            rank: None,
            residual: 1e-8,
            matching: 1e-7,
            overdamped: 1e-7,
            dissipativity: 1e-8,
            bounds: 1e-8,
            integrator_rtol: 1e-11,
            integrator_atol: 1e-13,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 9] = [
        "validation",
        "rank",
        "residual",
        "matching",
        "overdamped",
        "dissipativity",
        "bounds",
        "integrator_rtol",
        "integrator_atol",
    ];

    /// Defaults widened by the ratio of machine epsilons, capped at `1e-2`.
    pub fn scaled_for<T: Scalar>() -> Self {
        let factor = T::EPSILON.as_f64() / f64::EPSILON;
        let widen = |x: f64| (x * factor).min(1e-2);
        let d = Self::default();
        Self {
            validation: widen(d.validation),
            rank: None,
            residual: widen(d.residual),
            matching: widen(d.matching),
            overdamped: widen(d.overdamped),
            dissipativity: widen(d.dissipativity),
            bounds: widen(d.bounds),
            integrator_rtol: widen(d.integrator_rtol),
            integrator_atol: widen(d.integrator_atol),
        }
    }

    /// Overrides a single tolerance by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::Parameter(format!(
                "tolerance {key} must be positive and finite, got {value}"
            )));
        }
        match key {
            "validation" => self.validation = value,
            "rank" => self.rank = Some(value),
            "residual" => self.residual = value,
            "matching" => self.matching = value,
            "overdamped" => self.overdamped = value,
            "dissipativity" => self.dissipativity = value,
            "bounds" => self.bounds = value,
            "integrator_rtol" => self.integrator_rtol = value,
            "integrator_atol" => self.integrator_atol = value,
            _ => {
                return Err(Error::Parameter(format!(
                    "unknown tolerance key {key:?}; expected one of {:?}",
                    Self::KEYS
                )))
            }
        }
        Ok(())
    }

    /// Parses a `KEY=VALUE` override.
    pub fn apply_override(&mut self, item: &str) -> Result<()> {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("expected KEY=VALUE, got {item:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("cannot parse tolerance value {value:?}")))?;
        self.set(key.trim(), value)
    }
}
