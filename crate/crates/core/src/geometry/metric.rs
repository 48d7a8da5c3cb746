//! Chart-local metric fields: pointwise symmetric positive-definite matrices
//! with optional analytic derivative and Christoffel closures.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::Chart;
use crate::geometry::singular::SingularSet;
use crate::linalg::{Mat, Tensor3};

/// Declared regularity of a metric on its chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regularity {
    Smooth,
    Lipschitz,
    /// Weak first derivatives only; the Levi-Civita Christoffel symbols are
    /// merely locally integrable.
    W11Loc,
}

/// Eigenvalue-ratio cutoff below which a metric counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

pub type MetricFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;
pub type MetricDerivFn = Arc<dyn Fn(&[f64]) -> Tensor3 + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&[f64]) -> Tensor3 + Send + Sync>;

#[derive(Clone)]
pub struct MetricField {
    pub chart: Chart,
    eval: MetricFn,
    /// `d.get(k, i, j) = d_k g_ij`, when supplied analytically.
    d_eval: Option<MetricDerivFn>,
    /// `t.get(i, j, k) = Gamma^i_jk`, when supplied analytically.
    christoffel: Option<ChristoffelFn>,
    pub singular: SingularSet,
    pub regularity: Regularity,
}

impl MetricField {
    pub fn new(chart: Chart, eval: MetricFn, singular: SingularSet, regularity: Regularity) -> Self {
        MetricField { chart, eval, d_eval: None, christoffel: None, singular, regularity }
    }

    pub fn with_d_eval(mut self, d: MetricDerivFn) -> Self {
        self.d_eval = Some(d);
        self
    }

    pub fn with_christoffel(mut self, c: ChristoffelFn) -> Self {
        self.christoffel = Some(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    /// Raw evaluation, symmetrized.
    pub fn eval(&self, x: &[f64]) -> Mat {
        (self.eval)(x).symmetrize()
    }

    /// Evaluation with the degeneracy check: the smallest eigenvalue must
    /// exceed `DEGENERACY_RATIO` times the largest.
    pub fn eval_checked(&self, x: &[f64]) -> Result<Mat> {
        let g = self.eval(x);
        let eig = g.sym_eigenvalues();
        let smallest = eig[0];
        let largest = eig[eig.len() - 1].abs().max(f64::MIN_POSITIVE);
        let ratio = smallest / largest;
        if !(ratio > DEGENERACY_RATIO) {
            return Err(Error::DegenerateMetric { point: x.to_vec(), ratio });
        }
        Ok(g)
    }

    pub fn inverse_at(&self, x: &[f64]) -> Result<Mat> {
        let g = self.eval_checked(x)?;
        g.inverse()
            .ok_or_else(|| Error::DegenerateMetric { point: x.to_vec(), ratio: 0.0 })
    }

    pub(crate) fn strip_closures(&mut self) {
        self.d_eval = None;
        self.christoffel = None;
    }

    pub fn has_d_eval(&self) -> bool {
        self.d_eval.is_some()
    }

    pub fn has_christoffel(&self) -> bool {
        self.christoffel.is_some()
    }

    pub fn d_eval_at(&self, x: &[f64]) -> Option<Tensor3> {
        self.d_eval.as_ref().map(|d| d(x))
    }

    pub fn christoffel_at(&self, x: &[f64]) -> Option<Tensor3> {
        self.christoffel.as_ref().map(|c| c(x))
    }

    /// Central-difference metric derivative `d_k g_ij` at `x`, with one
    /// Richardson sweep when requested.
    pub fn fd_metric_derivative(&self, x: &[f64], step: f64, richardson: bool) -> Tensor3 {
        let n = self.dim();
        let diff = |h: f64| -> Tensor3 {
            Tensor3::from_fn(n, |k, i, j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                (self.eval(&xp).get(i, j) - self.eval(&xm).get(i, j)) / (2.0 * h)
            })
        };
        if richardson {
            let d1 = diff(step);
            let d2 = diff(0.5 * step);
            Tensor3::from_fn(n, |k, i, j| {
                (4.0 * d2.get(k, i, j) - d1.get(k, i, j)) / 3.0
            })
        } else {
            diff(step)
        }
    }

    /// Checks symmetry and positive definiteness on an interior grid,
    /// skipping points inside exclusion radii.
    pub fn validate_spd(&self, per_axis: usize) -> Result<()> {
        for p in self.chart.domain.interior_grid(per_axis) {
            if self.singular.excludes(&p) {
                continue;
            }
            self.eval_checked(&p)?;
        }
        Ok(())
    }

    /// Cross-checks a supplied analytic derivative closure against central
    /// differences on smooth-region grid points.
    pub fn validate_d_eval(&self, per_axis: usize, step: f64, tol: f64) -> Result<()> {
        let d_eval = self
            .d_eval
            .as_ref()
            .ok_or_else(|| Error::MissingClosure("metric has no derivative closure".into()))?;
        for p in self.chart.domain.interior_grid(per_axis) {
            if self.singular.distance(&p) < 10.0 * step {
                continue;
            }
            let analytic = d_eval(&p);
            let fd = self.fd_metric_derivative(&p, step, false);
            let n = self.dim();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let diff = (analytic.get(k, i, j) - fd.get(k, i, j)).abs();
                        let scale = 1.0 + analytic.get(k, i, j).abs();
                        if diff > tol * scale {
                            return Err(Error::Precondition(format!(
                                "derivative closure disagrees with finite differences at {p:?} ({diff:.3e})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
