//! Surface-curvature pairing for conformal factors: the form evaluated as
//! `int (v1 w1 + v2 w2) dK`, where the curvature measure
//! `dK = -laplacian(phi) dx` splits into point atoms, constant line
//! densities and an absolutely continuous part. The coefficient pairing
//! `v . w` extends Lipschitz-continuously over the singularities, so atoms
//! and line densities pair by direct evaluation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::builtins::ConformalFactor;
use crate::geometry::half_density::HalfDensityField;
use crate::geometry::singular::SingularSet;
use crate::quadrature::{adaptive_1d, integrate, QuadratureScheme};

/// Pairing value split by measure component.
#[derive(Clone, Debug, Serialize)]
pub struct SurfacePairing {
    pub value: f64,
    pub error: f64,
    pub atom_part: f64,
    pub line_part: f64,
    pub ac_part: f64,
}

/// Pairs the curvature measure of a conformal factor against two coefficient
/// fields over the intersection of their supports.
///
/// The factor must supply a Laplacian oracle whenever its curvature measure
/// has an absolutely continuous part; `ConformalFactor::with_fd_laplacian`
/// equips smooth factors with a mollified (finite-difference) oracle.
pub fn alexandrov_q(
    factor: &ConformalFactor,
    v: &HalfDensityField,
    w: &HalfDensityField,
    singular: &SingularSet,
    scheme: &QuadratureScheme,
) -> Result<SurfacePairing> {
    let domain = match v.support.intersect(&w.support) {
        Some(b) => b,
        None => {
            return Ok(SurfacePairing {
                value: 0.0,
                error: 0.0,
                atom_part: 0.0,
                line_part: 0.0,
                ac_part: 0.0,
            })
        }
    };
    let pair_at = |x: &[f64]| -> f64 {
        let a = v.coeffs_at(x);
        let b = w.coeffs_at(x);
        a[0] * b[0] + a[1] * b[1]
    };

    let mut atom_part = 0.0;
    for (p, mass) in &factor.curvature.atoms {
        if domain.contains(p, 0.0) {
            atom_part += mass * pair_at(p);
        }
    }

    let mut line_part = 0.0;
    let mut line_err = 0.0;
    for (axis, value, density) in &factor.curvature.lines {
        if *value < domain.lo[*axis] || *value > domain.hi[*axis] {
            continue;
        }
        let other = 1 - axis;
        let mut g = |t: f64| -> f64 {
            let mut x = [0.0; 2];
            x[*axis] = *value;
            x[other] = t;
            pair_at(&x)
        };
        let (line, err) = adaptive_1d(
            &mut g,
            domain.lo[other],
            domain.hi[other],
            scheme.order.max(6),
            scheme.abs_tol,
            12,
        );
        line_part += density * line;
        line_err += density.abs() * err;
    }

    let mut ac_part = 0.0;
    let mut ac_err = 0.0;
    if factor.curvature.has_ac {
        let lap = factor
            .field
            .laplacian
            .clone()
            .ok_or_else(|| Error::MissingClosure(
                "curvature measure has an absolutely continuous part but no Laplacian oracle"
                    .into(),
            ))?;
        let f = |x: &[f64]| -> Result<f64> { Ok(-lap(x) * pair_at(x)) };
        let r = integrate(&f, &domain, singular, scheme)?;
        ac_part = r.value;
        ac_err = r.error;
    }

    Ok(SurfacePairing {
        value: atom_part + line_part + ac_part,
        error: line_err + ac_err,
        atom_part,
        line_part,
        ac_part,
    })
}

impl ConformalFactor {
    /// Equips a smooth factor with a central-difference Laplacian oracle
    /// (the mollified route for factors lacking a closed form).
    pub fn with_fd_laplacian(mut self, step: f64) -> Self {
        let phi = self.field.phi.clone();
        self.field.laplacian = Some(Arc::new(move |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..x.len() {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += step;
                xm[i] -= step;
                s += (phi(&xp) - 2.0 * phi(x) + phi(&xm)) / (step * step);
            }
            s
        }));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtins::{self, PhiSpec};
    use crate::geometry::christoffel::{christoffel_from_metric, DiffScheme};
    use crate::geometry::half_density::{plateau_field, CoeffSpec};

    use crate::geometry::chart::BoxDomain;

    fn bump2(chart: &crate::geometry::Chart, h: f64, c: Vec<f64>) -> HalfDensityField {
        plateau_field(chart, BoxDomain::centered_cube(2, h), 0.3, CoeffSpec::Constant(c))
    }

    #[test]
    fn smooth_factor_agrees_with_direct_form() {
        let (metric, factor) = builtins::conformal2d(&PhiSpec::Gaussian { amplitude: 1.0 }, 1.5);
        let gamma = christoffel_from_metric(&metric, &DiffScheme::Analytic).unwrap();
        let v = bump2(&metric.chart, 1.2, vec![1.0, 0.2]);
        let w = bump2(&metric.chart, 1.1, vec![-0.4, 1.0]);
        let scheme = QuadratureScheme::default();
        let surface = alexandrov_q(&factor, &v, &w, &metric.singular, &scheme).unwrap();
        let direct = crate::qform::q_form(&gamma, &v, &w, &scheme).unwrap();
        assert!(
            (surface.value - direct.value).abs() < 1e-4 * direct.value.abs().max(1e-6),
            "surface {} vs direct {}",
            surface.value,
            direct.value
        );
    }

    #[test]
    fn cone_atom_pairs_at_the_vertex() {
        let alpha = 0.5;
        let (metric, factor) = builtins::conformal2d(&PhiSpec::ConeLog { alpha }, 1.0);
        let v = bump2(&metric.chart, 0.8, vec![1.0, 0.0]);
        let surface =
            alexandrov_q(&factor, &v, &v, &metric.singular, &QuadratureScheme::default()).unwrap();
        let want = 2.0 * std::f64::consts::PI * alpha;
        assert!((surface.value - want).abs() < 1e-12 * want.abs().max(1.0));
        assert_eq!(surface.value, surface.atom_part);
    }

    #[test]
    fn kink_factor_carries_line_density() {
        // phi = -c |x1|: line density 2c along {x1 = 0}.
        let c = 1.0;
        let (metric, factor) = builtins::conformal2d(&PhiSpec::AbsKink { c }, 1.0);
        let v = bump2(&metric.chart, 0.8, vec![1.0, 0.0]);
        let surface =
            alexandrov_q(&factor, &v, &v, &metric.singular, &QuadratureScheme::default()).unwrap();
        // 2c int psi(0, t)^2 dt with psi the plateau profile.
        let mut g = |t: f64| {
            let vv = v.coeffs_at(&[0.0, t]);
            vv[0] * vv[0]
        };
        let (want_int, _) = adaptive_1d(&mut g, -0.8, 0.8, 10, 1e-12, 14);
        let want = 2.0 * c * want_int;
        assert!(
            (surface.value - want).abs() < 1e-8 * want.abs(),
            "{} vs {want}",
            surface.value
        );
    }

    #[test]
    fn fd_laplacian_fallback_matches_closure() {
        let (_, factor) = builtins::conformal2d(&PhiSpec::Gaussian { amplitude: 0.7 }, 1.0);
        let closed = factor.field.laplacian.clone().unwrap();
        let mut stripped = factor.clone();
        stripped.field.laplacian = None;
        let fd = stripped.with_fd_laplacian(1e-4);
        let got = (fd.field.laplacian.unwrap())(&[0.3, -0.2]);
        let want = closed(&[0.3, -0.2]);
        assert!((got - want).abs() < 1e-6);
    }

    #[test]
    fn missing_laplacian_oracle_is_an_error() {
        let (metric, factor) = builtins::conformal2d(&PhiSpec::Gaussian { amplitude: 0.7 }, 1.0);
        let mut stripped = factor;
        stripped.field.laplacian = None;
        let v = bump2(&metric.chart, 0.8, vec![1.0, 0.0]);
        let err = alexandrov_q(&stripped, &v, &v, &metric.singular, &QuadratureScheme::default());
        assert!(matches!(err, Err(Error::MissingClosure(_))));
    }
}
