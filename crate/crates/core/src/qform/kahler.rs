//! Complex-dimension-one Kaehler pairing.
//!
//! For a Hermitian metric `h = exp(2 phi)` on a chart of the complex line,
//! the curvature density against a holomorphic-type field `v = v1 + i v2`
//! and an antiholomorphic-type field `wbar = w1 - i w2` is
//! `-(d_z d_zbar log det h) v wbar`. Matched real test fields enter through
//! their type projections; summing the two conjugate pairings gives back
//! the real conformal-surface form, which is the scalar reported here:
//! `-1/2 int laplacian(log det h) (v . w) dx`.

use crate::error::{Error, Result};
use crate::geometry::builtins::KahlerMetric;
use crate::geometry::half_density::HalfDensityField;
use crate::quadrature::{integrate, IntegralResult, QuadratureScheme};

/// Matched-real Kaehler pairing of two coefficient fields.
///
/// Positivity of `det h` is checked on a coarse grid before integrating.
pub fn kahler_q(
    h: &KahlerMetric,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<IntegralResult> {
    if h.metric.dim() != 2 {
        return Err(Error::Precondition(
            "the Kaehler pairing is implemented for complex dimension one".into(),
        ));
    }
    for p in h.metric.chart.domain.interior_grid(4) {
        if h.metric.eval(&p).det() <= 0.0 {
            return Err(Error::DegenerateMetric { point: p, ratio: 0.0 });
        }
    }
    let lap_phi = h
        .factor
        .field
        .laplacian
        .clone()
        .ok_or_else(|| Error::MissingClosure("log det h needs a Laplacian oracle".into()))?;
    let domain = match v
        .support
        .intersect(&w.support)
        .and_then(|b| b.intersect(&h.metric.chart.domain))
    {
        Some(b) => b,
        None => return Ok(IntegralResult::exact_zero()),
    };
    // log det h = 2 phi, so -1/2 laplacian(log det h) = -laplacian(phi).
    let f = |x: &[f64]| -> Result<f64> {
        let vx = v.coeffs_at(x);
        let wx = w.coeffs_at(x);
        Ok(-lap_phi(x) * (vx[0] * wx[0] + vx[1] * wx[1]))
    };
    integrate(&f, &domain, &h.metric.singular, scheme)
}
