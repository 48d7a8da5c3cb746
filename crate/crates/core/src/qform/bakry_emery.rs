//! Weighted variant of the form: the drift correction
//! `-1/2 (d_i f) D_j (V^i W^j + V^j W^i)` added to the plain integrand.
//! On smooth regions with a twice-differentiable weight, the value matches
//! pairing against the curvature tensor plus the weight Hessian.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::christoffel::ChristoffelField;
use crate::geometry::half_density::{covariant_matrix, HalfDensityField};
use crate::linalg::Mat;
use crate::qform::oracle::ricci_tensor_fd;
use crate::qform::QResult;
use crate::quadrature::{integrate, QuadratureScheme};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WeightRegularity {
    W11Loc,
    Semiconvex,
}

/// Weight function with gradient oracle (analytic or finite-difference).
#[derive(Clone)]
pub struct WeightFunction {
    pub f: ScalarFn,
    pub grad: Option<GradFn>,
    pub hessian: Option<HessFn>,
    pub regularity: WeightRegularity,
    pub fd_step: f64,
}

impl WeightFunction {
    pub fn new(f: ScalarFn, regularity: WeightRegularity) -> Self {
        WeightFunction { f, grad: None, hessian: None, regularity, fd_step: 1e-5 }
    }

    pub fn with_grad(mut self, g: GradFn) -> Self {
        self.grad = Some(g);
        self
    }

    pub fn with_hessian(mut self, h: HessFn) -> Self {
        self.hessian = Some(h);
        self
    }

    pub fn grad_at(&self, x: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.grad {
            return g(x);
        }
        let h = self.fd_step;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                ((self.f)(&xp) - (self.f)(&xm)) / (2.0 * h)
            })
            .collect()
    }

    /// Coordinate Hessian `d_k d_l f` (before the connection correction).
    pub fn coordinate_hessian_at(&self, x: &[f64]) -> Mat {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let n = x.len();
        let h = self.fd_step;
        Mat::symmetric_from_fn(n, |k, l| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            (self.grad_at(&xp)[l] - self.grad_at(&xm)[l]) / (2.0 * h)
        })
    }

    /// Cross-checks the gradient oracle against central differences.
    pub fn validate_grad(&self, points: &[Vec<f64>], tol: f64) -> Result<()> {
        let h = self.fd_step;
        for p in points {
            let g = self.grad_at(p);
            for i in 0..p.len() {
                let mut xp = p.clone();
                let mut xm = p.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = ((self.f)(&xp) - (self.f)(&xm)) / (2.0 * h);
                if (g[i] - fd).abs() > tol * (1.0 + fd.abs()) {
                    return Err(Error::Precondition(format!(
                        "weight gradient oracle disagrees with finite differences at {p:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The weighted form: plain integrand plus the drift correction built by the
/// product rule from half-density covariant derivatives.
pub fn bakry_emery_q(
    gamma: &ChristoffelField,
    weight: &WeightFunction,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<QResult> {
    let domain = match v
        .support
        .intersect(&w.support)
        .and_then(|b| b.intersect(&gamma.chart.domain))
    {
        Some(b) => b,
        None => {
            return Ok(QResult {
                value: 0.0,
                error: 0.0,
                q1: 0.0,
                q1_error: 0.0,
                q2: 0.0,
                q2_error: 0.0,
                evals: 0,
                converged: true,
                shells: vec![],
            })
        }
    };
    let plain = crate::qform::q_value(gamma, v, w, scheme)?;
    let corr = |x: &[f64]| -> Result<f64> {
        let g = gamma.eval(x)?;
        let vx = v.coeffs_at(x);
        let wx = w.coeffs_at(x);
        let dv = covariant_matrix(&g, &vx, &v.d_coeffs_at(x));
        let dw = covariant_matrix(&g, &wx, &w.d_coeffs_at(x));
        let grad = weight.grad_at(x);
        let n = g.dim();
        // sum_j D_j (V^i W^j + V^j W^i) via the product rule; the density
        // weights cancel inside the contraction.
        let tr_dv = dv.trace();
        let tr_dw = dw.trace();
        let mut s = 0.0;
        for i in 0..n {
            let mut div_i = vx[i] * tr_dw + wx[i] * tr_dv;
            for j in 0..n {
                div_i += dv.get(j, i) * wx[j] + vx[j] * dw.get(j, i);
            }
            s += grad[i] * div_i;
        }
        Ok(-0.5 * s)
    };
    let correction = integrate(&corr, &domain, &gamma.singular, scheme)?;
    Ok(QResult {
        value: plain.value + correction.value,
        error: plain.error + correction.error,
        q1: plain.value,
        q1_error: plain.error,
        q2: correction.value,
        q2_error: correction.error,
        evals: plain.evals + correction.evals,
        converged: plain.converged && correction.converged,
        shells: plain.shells,
    })
}

/// Smooth-region cross-check: pairs the fields against
/// `R_(kl) + Hess(f)_kl` with `Hess(f)_kl = d_k d_l f - G^i_kl d_i f`.
pub fn bakry_emery_oracle(
    gamma: &ChristoffelField,
    weight: &WeightFunction,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
    fd_step: f64,
) -> Result<f64> {
    let domain = v
        .support
        .intersect(&w.support)
        .and_then(|b| b.intersect(&gamma.chart.domain))
        .ok_or_else(|| Error::Precondition("supports do not meet".into()))?;
    if !gamma.singular.restricted_to(&domain).is_empty() {
        return Err(Error::OracleIneligible(
            "weighted oracle needs stratum-free supports".into(),
        ));
    }
    let f = |x: &[f64]| -> Result<f64> {
        let r = ricci_tensor_fd(gamma, x, fd_step, true)?;
        let g = gamma.eval(x)?;
        let grad = weight.grad_at(x);
        let ch = weight.coordinate_hessian_at(x);
        let n = g.dim();
        let hess = Mat::symmetric_from_fn(n, |k, l| {
            let mut s = ch.get(k, l);
            for i in 0..n {
                s -= g.get(i, k, l) * grad[i];
            }
            s
        });
        Ok(r.add(&hess).pair(&v.coeffs_at(x), &w.coeffs_at(x)))
    };
    let r = integrate(&f, &domain, &crate::geometry::SingularSet::empty(), scheme)?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtins;
    use crate::geometry::christoffel::{christoffel_from_metric, DiffScheme};
    use crate::geometry::half_density::{plateau_field, CoeffSpec};
    use crate::geometry::BoxDomain;

    fn quadratic_weight() -> WeightFunction {
        WeightFunction::new(
            Arc::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            WeightRegularity::Semiconvex,
        )
        .with_grad(Arc::new(|x: &[f64]| x.to_vec()))
        .with_hessian(Arc::new(|x: &[f64]| Mat::identity(x.len())))
    }

    #[test]
    fn constant_weight_reduces_to_plain_form() {
        let g = builtins::cone(2, 0.5, 1.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let v = plateau_field(
            &g.chart,
            BoxDomain::centered_cube(2, 0.8),
            0.3,
            CoeffSpec::Constant(vec![1.0, 0.0]),
        );
        let weight = WeightFunction::new(Arc::new(|_: &[f64]| 3.7), WeightRegularity::Semiconvex)
            .with_grad(Arc::new(|x: &[f64]| vec![0.0; x.len()]));
        let scheme = QuadratureScheme::default();
        let weighted = bakry_emery_q(&gamma, &weight, &v, &v, &scheme).unwrap();
        let plain = crate::qform::q_value(&gamma, &v, &v, &scheme).unwrap();
        assert!(
            (weighted.value - plain.value).abs() < 1e-9 + plain.error,
            "{} vs {}",
            weighted.value,
            plain.value
        );
    }

    #[test]
    fn flat_metric_quadratic_weight_pairs_like_identity() {
        // With a flat connection and f = |x|^2 / 2 the weighted form equals
        // int sum_k v^k w^k dx.
        let g = builtins::flat(2, 1.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let scheme = QuadratureScheme::default();
        let v = plateau_field(
            &g.chart,
            BoxDomain::centered_cube(2, 0.8),
            0.3,
            CoeffSpec::Constant(vec![1.0, 0.0]),
        );
        let r = bakry_emery_q(&gamma, &quadratic_weight(), &v, &v, &scheme).unwrap();
        let pairing = |x: &[f64]| -> Result<f64> {
            let a = v.coeffs_at(x);
            Ok(a.iter().map(|c| c * c).sum())
        };
        let want = integrate(
            &pairing,
            &BoxDomain::centered_cube(2, 0.8),
            &crate::geometry::SingularSet::empty(),
            &scheme,
        )
        .unwrap();
        assert!(
            (r.value - want.value).abs() < 5e-3 * want.value.abs(),
            "{} vs {}",
            r.value,
            want.value
        );
        // And against the curvature-plus-Hessian oracle.
        let oracle = bakry_emery_oracle(&gamma, &quadratic_weight(), &v, &v, &scheme, 1e-4).unwrap();
        assert!((r.value - oracle).abs() < 5e-3 * oracle.abs());
    }

    #[test]
    fn linear_weight_has_no_effect_on_flat_space() {
        let g = builtins::flat(2, 1.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let weight = WeightFunction::new(
            Arc::new(|x: &[f64]| 0.7 * x[0] - 0.2 * x[1]),
            WeightRegularity::Semiconvex,
        )
        .with_grad(Arc::new(|_: &[f64]| vec![0.7, -0.2]));
        let v = plateau_field(
            &g.chart,
            BoxDomain::centered_cube(2, 0.8),
            0.3,
            CoeffSpec::Constant(vec![0.0, 1.0]),
        );
        let r = bakry_emery_q(&gamma, &weight, &v, &v, &QuadratureScheme::default()).unwrap();
        assert!(r.value.abs() < 1e-8, "linear-weight value {}", r.value);
    }

    #[test]
    fn fd_gradient_fallback_matches_analytic() {
        let analytic = quadratic_weight();
        let fd = WeightFunction::new(analytic.f.clone(), WeightRegularity::Semiconvex);
        let x = [0.3, -0.8];
        let ga = analytic.grad_at(&x);
        let gf = fd.grad_at(&x);
        for i in 0..2 {
            assert!((ga[i] - gf[i]).abs() < 1e-8);
        }
        fd.validate_grad(&[vec![0.1, 0.2], vec![-0.4, 0.9]], 1e-6).unwrap();
    }
}
