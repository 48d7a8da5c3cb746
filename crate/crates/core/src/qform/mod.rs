//! The curvature quadratic form on vector-valued half-densities.
//!
//! The direct path integrates
//! `sum_ij [ (D_i v^i)(D_j w^j) - (D_i v^j)(D_j w^i) ]`
//! built from the half-density covariant derivative. An independent
//! diagnostic path splits the same number into the connection-linear part
//! (`q1`, derivative placement symmetrized by parts) and the
//! connection-quadratic part (`q2`); for tame connections and compactly
//! supported fields the pure-derivative remainder integrates to zero, so
//! `value ~ q1 + q2` within the quadrature error bars.

pub mod alexandrov;
pub mod bakry_emery;
pub mod kahler;
pub mod killing;
pub mod oracle;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::BoxDomain;
use crate::geometry::christoffel::{perturb, ChristoffelField, ConnectionPerturbation};
use crate::geometry::half_density::{covariant_matrix, HalfDensityField};
use crate::linalg::Mat;
use crate::quadrature::{
    fit_shell_decay, integrability_diagnostic, integrate, IntegralResult, QuadratureScheme,
    Verdict,
};

pub use alexandrov::alexandrov_q;
pub use bakry_emery::{bakry_emery_oracle, bakry_emery_q, WeightFunction, WeightRegularity};
pub use kahler::kahler_q;
pub use killing::killing_defect;
pub use oracle::{ricci_tensor_fd, smooth_ricci_oracle};

/// Value of the form with its split diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct QResult {
    pub value: f64,
    pub error: f64,
    /// Connection-linear part (integration-by-parts form).
    pub q1: f64,
    pub q1_error: f64,
    /// Connection-quadratic part.
    pub q2: f64,
    pub q2_error: f64,
    pub evals: u64,
    pub converged: bool,
    /// Shell traces of the direct integrand (integrability evidence).
    pub shells: Vec<crate::quadrature::ShellTrace>,
}

impl QResult {
    fn exact_zero() -> Self {
        QResult {
            value: 0.0,
            error: 0.0,
            q1: 0.0,
            q1_error: 0.0,
            q2: 0.0,
            q2_error: 0.0,
            evals: 0,
            converged: true,
            shells: vec![],
        }
    }

    /// Discrepancy tolerance for comparing the direct value to `q1 + q2`.
    pub fn split_budget(&self) -> f64 {
        self.error + self.q1_error + self.q2_error
    }
}

/// The pointwise form integrand from pre-evaluated covariant derivatives.
#[inline]
pub fn form_integrand(dv: &Mat, dw: &Mat) -> f64 {
    let n = dv.dim();
    let mut s = dv.trace() * dw.trace();
    for i in 0..n {
        for j in 0..n {
            s -= dv.get(i, j) * dw.get(j, i);
        }
    }
    s
}

/// Common pairing region of two fields: intersection of their support boxes
/// with the chart domain.
fn pairing_box(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    w: &HalfDensityField,
) -> Result<Option<BoxDomain>> {
    if gamma.dim() != v.dim() || gamma.dim() != w.dim() {
        return Err(Error::ChartMismatch(
            "form arguments live in different dimensions".into(),
        ));
    }
    Ok(v.support
        .intersect(&w.support)
        .and_then(|b| b.intersect(&gamma.chart.domain)))
}

fn check_compact_supports(v: &HalfDensityField, w: &HalfDensityField) -> Result<()> {
    for f in [v, w] {
        if f.compact {
            f.validate_boundary_vanishing(3, 1e-9)?;
        }
    }
    Ok(())
}

/// Integrates the direct form integrand over the pairing region; shared by
/// the public form evaluation, the measure ladders and the flow checker.
pub(crate) fn q_value(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<IntegralResult> {
    if gamma.dim() == 1 {
        // In one dimension the form vanishes identically.
        return Ok(IntegralResult::exact_zero());
    }
    let domain = match pairing_box(gamma, v, w)? {
        Some(b) => b,
        None => return Ok(IntegralResult::exact_zero()),
    };
    q_value_over(gamma, v, w, &domain, scheme)
}

/// The form integrand over an explicit box (which must contain the support
/// intersection). Localized extraction passes the outer-cutoff box here so
/// the stratum shell window blankets the inner cutoff entirely.
pub(crate) fn q_value_over(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    w: &HalfDensityField,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
) -> Result<IntegralResult> {
    if gamma.dim() == 1 {
        return Ok(IntegralResult::exact_zero());
    }
    let f = |x: &[f64]| -> Result<f64> {
        let g = gamma.eval(x)?;
        let dv = covariant_matrix(&g, &v.coeffs_at(x), &v.d_coeffs_at(x));
        let dw = covariant_matrix(&g, &w.coeffs_at(x), &w.d_coeffs_at(x));
        Ok(form_integrand(&dv, &dw))
    };
    integrate(&f, domain, &gamma.singular, scheme)
}

/// Checks the shell traces of a form integral for divergence; a diverging
/// trace means the connection is not tame on this test data.
fn detect_divergence(result: &IntegralResult, scheme: &QuadratureScheme) -> bool {
    result.shells.iter().any(|trace| {
        let abs_sums: Vec<f64> = trace.sums.iter().map(|s| s.abs()).collect();
        fit_shell_decay(&abs_sums, &trace.radii, scheme.shell_ratio).verdict == Verdict::Diverges
    })
}

/// The quadratic form `Q(V, W)` with the `q1`/`q2` split diagnostics.
///
/// Fails with a tameness violation (carrying the full integrability
/// diagnostic) when the integrand's shell sums diverge.
pub fn q_form(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<QResult> {
    check_compact_supports(v, w)?;
    if gamma.dim() == 1 {
        return Ok(QResult::exact_zero());
    }
    let domain = match pairing_box(gamma, v, w)? {
        Some(b) => b,
        None => return Ok(QResult::exact_zero()),
    };

    let direct = q_value(gamma, v, w, scheme)?;
    if detect_divergence(&direct, scheme) {
        let verdict = integrability_diagnostic(gamma, scheme)?;
        return Err(Error::TamenessViolation { verdict: Box::new(verdict) });
    }

    // Connection-linear part, with all symbol derivatives moved onto the
    // test fields by parts.
    let q1f = |x: &[f64]| -> Result<f64> {
        let g = gamma.eval(x)?;
        let n = g.dim();
        let vx = v.coeffs_at(x);
        let wx = w.coeffs_at(x);
        let dvx = v.d_coeffs_at(x);
        let dwx = w.d_coeffs_at(x);
        let traces: Vec<f64> = (0..n).map(|l| g.contracted_trace(l)).collect();
        let div_v = dvx.trace();
        let div_w = dwx.trace();
        let mut s = 0.0;
        for k in 0..n {
            s += 0.5 * div_v * traces[k] * wx[k];
            s += 0.5 * traces[k] * vx[k] * div_w;
            for l in 0..n {
                // d.get(k, l) = d_k of component l.
                s += 0.5 * vx[k] * traces[l] * dwx.get(k, l);
                s += 0.5 * dvx.get(l, k) * traces[k] * wx[l];
            }
        }
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s -= dvx.get(i, k) * g.get(i, k, l) * wx[l];
                    s -= vx[k] * g.get(i, k, l) * dwx.get(i, l);
                }
            }
        }
        Ok(s)
    };
    let q1 = integrate(&q1f, &domain, &gamma.singular, scheme)?;

    // Connection-quadratic part.
    let q2f = |x: &[f64]| -> Result<f64> {
        let g = gamma.eval(x)?;
        let combo = ChristoffelField::quadratic_combination(&g);
        Ok(combo.pair(&v.coeffs_at(x), &w.coeffs_at(x)))
    };
    let q2 = integrate(&q2f, &domain, &gamma.singular, scheme)?;

    Ok(QResult {
        value: direct.value,
        error: direct.error,
        q1: q1.value,
        q1_error: q1.error,
        q2: q2.value,
        q2_error: q2.error,
        evals: direct.evals + q1.evals + q2.evals,
        converged: direct.converged,
        shells: direct.shells,
    })
}

/// Witness for a lower bound of the form: a pointwise nonnegative matrix
/// density `h` such that `Q(V, V) >= -int <V, h V>` is testable.
#[derive(Clone)]
pub struct LowerBoundWitness {
    pub h: std::sync::Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>,
}

impl LowerBoundWitness {
    pub fn zero() -> Self {
        LowerBoundWitness { h: std::sync::Arc::new(|x: &[f64]| Mat::zeros(x.len())) }
    }

    /// Checks positive semidefiniteness of `h` on sample points.
    pub fn validate(&self, samples: &[Vec<f64>]) -> Result<()> {
        for p in samples {
            let eig = (self.h)(p).sym_eigenvalues();
            if eig[0] < -1e-12 {
                return Err(Error::Precondition(format!(
                    "witness matrix indefinite at {p:?} (eigenvalue {})",
                    eig[0]
                )));
            }
        }
        Ok(())
    }

    /// Evaluates `Q(V, V) + int <V, h V>`, which the bound asserts to be
    /// nonnegative up to the absolute tolerance.
    pub fn slack(
        &self,
        gamma: &ChristoffelField,
        v: &HalfDensityField,
        scheme: &QuadratureScheme,
    ) -> Result<f64> {
        let q = q_value(gamma, v, v, scheme)?;
        let h = self.h.clone();
        let f = |x: &[f64]| -> Result<f64> {
            let vx = v.coeffs_at(x);
            Ok(h(x).pair(&vx, &vx))
        };
        let correction = integrate(&f, &v.support, &gamma.singular, scheme)?;
        Ok(q.value + correction.value)
    }
}

/// One rung of the bounded-perturbation convergence ladder.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbedQ {
    pub sup_norm: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationConvergence {
    pub baseline: f64,
    pub baseline_error: f64,
    pub perturbed: Vec<PerturbedQ>,
}

impl PerturbationConvergence {
    /// Least-squares fit of `|Q_r - Q|` against the perturbation sup norm
    /// through the origin; returns `(slope, r_squared)`.
    pub fn linear_fit(&self) -> (f64, f64) {
        let pts: Vec<(f64, f64)> = self
            .perturbed
            .iter()
            .map(|p| (p.sup_norm, (p.value - self.baseline).abs()))
            .collect();
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        let slope = sxy / sxx;
        let ybar = pts.iter().map(|(_, y)| y).sum::<f64>() / pts.len() as f64;
        let ss_tot: f64 = pts.iter().map(|(_, y)| (y - ybar) * (y - ybar)).sum();
        let ss_res: f64 = pts
            .iter()
            .map(|(x, y)| {
                let r = y - slope * x;
                r * r
            })
            .sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        (slope, r2)
    }
}

/// Evaluates the form along a sequence of bounded perturbations of the
/// connection; with sup norms decreasing to zero the values converge to the
/// baseline, linearly in the sup norm.
pub fn q_convergence_under_perturbation(
    gamma: &ChristoffelField,
    perturbations: &[ConnectionPerturbation],
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<PerturbationConvergence> {
    let base = q_value(gamma, v, w, scheme)?;
    let mut perturbed = Vec::with_capacity(perturbations.len());
    for t in perturbations {
        let sum = perturb(gamma, t)?;
        let r = q_value(&sum, v, w, scheme)?;
        perturbed.push(PerturbedQ { sup_norm: t.sup_norm, value: r.value, error: r.error });
    }
    Ok(PerturbationConvergence {
        baseline: base.value,
        baseline_error: base.error,
        perturbed,
    })
}

/// Transports a half-density field through the source chart's transition:
/// the vector part pushes forward by the Jacobian and the half-density part
/// contributes `|det dx/dy|^(1/2)`.
pub fn push_forward_field(
    v: &HalfDensityField,
    source: &crate::geometry::chart::Chart,
    target: &crate::geometry::chart::Chart,
) -> Result<HalfDensityField> {
    let transition = source
        .transition
        .clone()
        .ok_or_else(|| Error::MissingClosure("source chart has no transition".into()))?;
    let n = source.dim;
    let inner = v.clone();
    let t = transition.clone();
    let coeffs = std::sync::Arc::new(move |y: &[f64]| -> Vec<f64> {
        let (x, j, jinv) = match t.inverse_jacobian_at(y) {
            Ok(v) => v,
            Err(_) => return vec![0.0; n],
        };
        let vx = inner.coeffs_at(&x);
        let scale = jinv.det().abs().sqrt();
        (0..n)
            .map(|a| scale * (0..n).map(|i| j.get(a, i) * vx[i]).sum::<f64>())
            .collect()
    });
    // Image of the support box, padded: a full tensor grid including the
    // box boundary (extremes of nonlinear maps sit on faces and corners).
    let positions: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..9)
                .map(|i| {
                    v.support.lo[a]
                        + (v.support.hi[a] - v.support.lo[a]) * i as f64 / 8.0
                })
                .collect()
        })
        .collect();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut idx = vec![0usize; n];
    loop {
        let p: Vec<f64> = (0..n).map(|a| positions[a][idx[a]]).collect();
        let y = (transition.forward)(&p);
        for a in 0..n {
            lo[a] = lo[a].min(y[a]);
            hi[a] = hi[a].max(y[a]);
        }
        let mut carry = true;
        for slot in idx.iter_mut() {
            if carry {
                *slot += 1;
                if *slot == 9 {
                    *slot = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    for a in 0..n {
        let pad = 0.08 * (hi[a] - lo[a]).max(1e-12);
        lo[a] -= pad;
        hi[a] += pad;
    }
    let support = BoxDomain::new(lo, hi)?;
    Ok(HalfDensityField::new(target.clone(), coeffs, support)
        .with_lipschitz(v.lipschitz * 4.0)
        .with_compact(v.compact))
}
