//! Quadrature configuration and results.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tensor-product Gauss-Legendre base rule with adaptive box refinement and
/// geometric shells toward singular strata.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureScheme {
    /// Base rule order per axis (`p >= 2`).
    pub order: usize,
    /// Target relative tolerance.
    pub rel_tol: f64,
    /// Target absolute tolerance.
    pub abs_tol: f64,
    /// Geometric ratio of successive shell radii, in `(0, 1)`.
    pub shell_ratio: f64,
    /// Innermost shell radius as a fraction of the domain diagonal.
    pub r_min_factor: f64,
    /// Maximum refinement depth / shell count.
    pub max_depth: usize,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            order: 5,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            shell_ratio: 0.5,
            r_min_factor: 1e-8,
            max_depth: 30,
        }
    }
}

impl QuadratureScheme {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::InvalidScheme("quadrature order must be >= 2".into()));
        }
        if !(self.shell_ratio > 0.0 && self.shell_ratio < 1.0) {
            return Err(Error::InvalidScheme("shell ratio must lie in (0, 1)".into()));
        }
        if !(self.r_min_factor > 0.0) {
            return Err(Error::InvalidScheme("innermost radius must be positive".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidScheme("max depth must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidScheme("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Tolerance actually demanded for a value of the given magnitude.
    pub fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    pub fn with_tols(mut self, rel: f64, abs: f64) -> Self {
        self.rel_tol = rel;
        self.abs_tol = abs;
        self
    }
}

/// Partial sums over the geometric shells of one stratum, outermost first.
#[derive(Clone, Debug, Serialize)]
pub struct ShellTrace {
    pub stratum: usize,
    /// Outer radius of each shell.
    pub radii: Vec<f64>,
    /// Integral over each shell.
    pub sums: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    /// Conservative error estimate (adaptive discrepancies plus shell tails).
    pub error: f64,
    /// Number of integrand evaluations.
    pub evals: u64,
    /// Whether the error estimate met the tolerance contract.
    pub converged: bool,
    pub shells: Vec<ShellTrace>,
}

impl IntegralResult {
    pub fn exact_zero() -> Self {
        IntegralResult { value: 0.0, error: 0.0, evals: 0, converged: true, shells: vec![] }
    }
}
