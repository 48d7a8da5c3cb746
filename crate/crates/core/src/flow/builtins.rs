//! Built-in metric families for the flow checks: the shrinking round
//! sphere, its pullback by a fixed shear, static singular metrics, and
//! smoothed-cone sequences.

use std::sync::Arc;

use crate::geometry::builtins::{conformal_christoffel, sphere_phi};
use crate::geometry::chart::{BoxDomain, Chart};
use crate::geometry::metric::{MetricField, Regularity};
use crate::geometry::singular::SingularSet;
use crate::linalg::{Mat, Tensor3};

use super::{MetricDtFn, TimeDependentMetric};

/// `g(t) = (1 - 2t) * 4 r0^2 / (1 + |x|^2)^2 * delta` on `[-h, h]^2`:
/// the round sphere of shrinking radius, in its stereographic chart.
/// Defined for `t < 1/2`.
pub fn shrinking_sphere_flow(r0: f64, half_width: f64, horizon: f64) -> TimeDependentMetric {
    assert!(horizon <= 0.5, "the family collapses at t = 1/2");
    let chart = Chart::new(BoxDomain::centered_cube(2, half_width));
    let phi0 = sphere_phi(r0);
    let at = {
        let chart = chart.clone();
        let phi0 = phi0.clone();
        Arc::new(move |t: f64| -> MetricField {
            let scale = 1.0 - 2.0 * t;
            let base_phi = phi0.phi.clone();
            let grad = phi0.grad.clone();
            let phi_t = crate::geometry::builtins::PhiField {
                phi: Arc::new(move |x: &[f64]| base_phi(x) + 0.5 * scale.ln()),
                grad,
                laplacian: phi0.laplacian.clone(),
            };
            crate::geometry::builtins::conformal_metric(
                chart.clone(),
                phi_t,
                SingularSet::empty(),
                Regularity::Smooth,
            )
        })
    };
    let dt: MetricDtFn = Arc::new(move |_t: f64, x: &[f64]| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let c = 4.0 * r0 * r0 / ((1.0 + r2) * (1.0 + r2));
        Mat::from_fn(2, |i, j| if i == j { -2.0 * c } else { 0.0 })
    });
    TimeDependentMetric::new(chart, horizon, at).with_dt(dt)
}

/// The shear map `y = (x0 + a x1^2, x1)` with its inverse and derivatives.
#[derive(Clone, Copy)]
pub struct Shear {
    pub a: f64,
}

impl Shear {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] + self.a * x[1] * x[1], x[1]]
    }

    pub fn jacobian(&self, x: &[f64]) -> Mat {
        let mut j = Mat::identity(2);
        j.set(0, 1, 2.0 * self.a * x[1]);
        j
    }
}

/// Pullback of the shrinking-sphere family by a fixed shear: the slice
/// metrics are `J^T h(t, y(x)) J`, with symbols transported analytically.
/// Still a weak-flow solution, now with off-diagonal Lipschitz structure.
pub fn sheared_sphere_flow(r0: f64, shear: f64, half_width: f64, horizon: f64) -> TimeDependentMetric {
    assert!(horizon <= 0.5);
    let chart = Chart::new(BoxDomain::centered_cube(2, half_width));
    let s = Shear { a: shear };
    let conf = move |y: &[f64]| -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        4.0 * r0 * r0 / ((1.0 + r2) * (1.0 + r2))
    };
    let at = {
        let chart = chart.clone();
        Arc::new(move |t: f64| -> MetricField {
            let scale = 1.0 - 2.0 * t;
            let eval = {
                Arc::new(move |x: &[f64]| -> Mat {
                    let y = s.forward(x);
                    let j = s.jacobian(x);
                    let c = scale * conf(&y);
                    // J^T (c I) J = c J^T J.
                    Mat::from_fn(2, |p, q| {
                        c * (0..2).map(|k| j.get(k, p) * j.get(k, q)).sum::<f64>()
                    })
                })
            };
            let phi0 = sphere_phi(r0);
            let christoffel = Arc::new(move |x: &[f64]| -> Tensor3 {
                // Transport the conformal symbols through the shear:
                // G^i_jk(x) = Jinv^i_a J^b_j J^c_k G_h^a_bc(y) + Jinv^i_a H^a_jk
                // with H the forward-map Hessian (only H^0_11 = 2a).
                let y = s.forward(x);
                let j = s.jacobian(x);
                let mut jinv = Mat::identity(2);
                jinv.set(0, 1, -j.get(0, 1));
                let gh = conformal_christoffel(2, &(phi0.grad)(&y));
                Tensor3::symmetric_lower_from_fn(2, |i, jj, kk| {
                    let mut out = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                out += jinv.get(i, a) * j.get(b, jj) * j.get(c, kk) * gh.get(a, b, c);
                            }
                        }
                        let h_a = if a == 0 && jj == 1 && kk == 1 { 2.0 * s.a } else { 0.0 };
                        out += jinv.get(i, a) * h_a;
                    }
                    out
                })
            });
            MetricField::new(chart.clone(), eval, SingularSet::empty(), Regularity::Smooth)
                .with_christoffel(christoffel)
        })
    };
    let dt: MetricDtFn = Arc::new(move |_t: f64, x: &[f64]| {
        let y = s.forward(x);
        let j = s.jacobian(x);
        let c = conf(&y);
        Mat::from_fn(2, |p, q| {
            -2.0 * c * (0..2).map(|k| j.get(k, p) * j.get(k, q)).sum::<f64>()
        })
    });
    TimeDependentMetric::new(chart, horizon, at).with_dt(dt)
}

/// A static family from any chart metric.
pub fn static_flow(metric: MetricField, horizon: f64) -> TimeDependentMetric {
    TimeDependentMetric::static_metric(metric, horizon)
}

/// Static smoothings of the planar cone at scale `eps`: each member is a
/// smooth metric but not a flow solution, so the sequence fails the
/// stability precondition by design.
pub fn mollified_cone_flow(alpha: f64, eps: f64, half_width: f64, horizon: f64) -> TimeDependentMetric {
    static_flow(crate::geometry::builtins::mollified_cone(2, alpha, eps, half_width), horizon)
}
