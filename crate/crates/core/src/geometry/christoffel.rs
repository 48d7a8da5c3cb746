//! Christoffel symbol fields of torsion-free connections: construction from
//! metrics, coordinate transformation and bounded perturbation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::Chart;
use crate::geometry::metric::MetricField;
use crate::geometry::singular::SingularSet;
use crate::linalg::Tensor3;

/// Claimed local integrability class of a Christoffel field near a stratum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IntegrabilityClass {
    L1Loc,
    L2Loc,
    LInfLoc,
}

impl IntegrabilityClass {
    /// The weaker of two claims (`L1` is the weakest).
    pub fn weaker(self, other: IntegrabilityClass) -> IntegrabilityClass {
        use IntegrabilityClass::*;
        match (self, other) {
            (L1Loc, _) | (_, L1Loc) => L1Loc,
            (L2Loc, _) | (_, L2Loc) => L2Loc,
            _ => LInfLoc,
        }
    }
}

pub type Tensor3Fn = Arc<dyn Fn(&[f64]) -> Tensor3 + Send + Sync>;

/// `Gamma^i_jk(x)` with `eval(x).get(i, j, k)`, symmetric in `(j, k)`.
#[derive(Clone)]
pub struct ChristoffelField {
    pub chart: Chart,
    eval: Tensor3Fn,
    pub singular: SingularSet,
    /// Claimed integrability class per stratum, parallel to `singular.strata`.
    pub claims: Vec<IntegrabilityClass>,
    /// True when the closure stays valid inside exclusion radii (analytic
    /// formulas); finite-difference-backed fields must not be evaluated there.
    pub analytic: bool,
}

impl ChristoffelField {
    pub fn new(chart: Chart, eval: Tensor3Fn, singular: SingularSet) -> Self {
        let claims = vec![IntegrabilityClass::L1Loc; singular.strata.len()];
        ChristoffelField { chart, eval, singular, claims, analytic: true }
    }

    pub fn with_claims(mut self, claims: Vec<IntegrabilityClass>) -> Self {
        self.claims = claims;
        self
    }

    pub fn with_analytic(mut self, analytic: bool) -> Self {
        self.analytic = analytic;
        self
    }

    pub fn zero(chart: Chart) -> Self {
        let n = chart.dim;
        ChristoffelField::new(chart, Arc::new(move |_: &[f64]| Tensor3::zeros(n)), SingularSet::empty())
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    /// Evaluates the symbols, guarding exclusion radii for non-analytic
    /// (finite-difference-backed) fields.
    pub fn eval(&self, x: &[f64]) -> Result<Tensor3> {
        if !self.analytic && self.singular.excludes(x) {
            return Err(Error::SingularEvaluation { point: x.to_vec() });
        }
        Ok((self.eval)(x))
    }

    /// Evaluation without the exclusion guard.
    pub fn eval_unguarded(&self, x: &[f64]) -> Tensor3 {
        (self.eval)(x)
    }

    /// The quadratic combination
    /// `C_kl = sum_ij (G^i_kl G^j_ji - G^j_ki G^i_lj)` appearing both in the
    /// tameness criterion and in the symmetrized curvature contraction.
    pub fn quadratic_combination(g: &Tensor3) -> crate::linalg::Mat {
        let n = g.dim();
        crate::linalg::Mat::from_fn(n, |k, l| {
            let mut s = 0.0;
            for i in 0..n {
                let trace_i = g.contracted_trace(i);
                s += g.get(i, k, l) * trace_i;
                for j in 0..n {
                    s -= g.get(j, k, i) * g.get(i, l, j);
                }
            }
            s
        })
    }
}

/// How to obtain Christoffel symbols from a metric.
#[derive(Clone, Debug)]
pub enum DiffScheme {
    /// Use the metric's analytic Christoffel or derivative closure.
    Analytic,
    /// Central differences of the metric with the given step (default
    /// `1e-4 x` domain diagonal) and optional Richardson sweep.
    FiniteDifference { step: Option<f64>, richardson: bool },
}

impl Default for DiffScheme {
    fn default() -> Self {
        DiffScheme::FiniteDifference { step: None, richardson: true }
    }
}

/// Levi-Civita symbols `G^l_jk = 1/2 g^li (d_j g_ik + d_k g_ij - d_i g_jk)`.
///
/// The analytic scheme requires a Christoffel or derivative closure on the
/// metric. The finite-difference scheme refuses to evaluate inside stratum
/// exclusion radii.
pub fn christoffel_from_metric(g: &MetricField, scheme: &DiffScheme) -> Result<ChristoffelField> {
    let n = g.dim();
    let chart = g.chart.clone();
    let singular = g.singular.clone();

    match scheme {
        DiffScheme::Analytic => {
            if g.has_christoffel() {
                let gm = g.clone();
                let eval: Tensor3Fn = Arc::new(move |x: &[f64]| gm.christoffel_at(x).unwrap());
                Ok(ChristoffelField::new(chart, eval, singular))
            } else if g.has_d_eval() {
                let gm = g.clone();
                let eval: Tensor3Fn = Arc::new(move |x: &[f64]| {
                    let dg = gm.d_eval_at(x).unwrap();
                    let ginv = gm
                        .inverse_at(x)
                        .unwrap_or_else(|_| panic!("degenerate metric at {x:?}"));
                    levi_civita_from_derivative(n, &ginv, &dg)
                });
                Ok(ChristoffelField::new(chart, eval, singular))
            } else {
                Err(Error::MissingClosure(
                    "analytic scheme needs a Christoffel or derivative closure".into(),
                ))
            }
        }
        DiffScheme::FiniteDifference { step, richardson } => {
            let h = step.unwrap_or(1e-4 * chart.domain.diagonal());
            let richardson = *richardson;
            let gm = g.clone();
            let guard = singular.clone();
            let eval: Tensor3Fn = Arc::new(move |x: &[f64]| {
                let dg = gm.fd_metric_derivative(x, h, richardson);
                let ginv = gm
                    .inverse_at(x)
                    .unwrap_or_else(|e| panic!("metric inversion failed: {e}"));
                levi_civita_from_derivative(n, &ginv, &dg)
            });
            // Exclusion guard lives on the field: evaluating an FD-backed
            // Christoffel inside the exclusion radius is an error.
            let _ = guard;
            Ok(ChristoffelField::new(chart, eval, singular).with_analytic(false))
        }
    }
}

/// Checked variant of the finite-difference path used where the error
/// contract matters: degenerate metrics and guarded evaluation points are
/// reported as errors rather than panics.
pub fn christoffel_at_from_metric(
    g: &MetricField,
    x: &[f64],
    scheme: &DiffScheme,
) -> Result<Tensor3> {
    match scheme {
        DiffScheme::Analytic => {
            if let Some(t) = g.christoffel_at(x) {
                Ok(t)
            } else if let Some(dg) = g.d_eval_at(x) {
                let ginv = g.inverse_at(x)?;
                Ok(levi_civita_from_derivative(g.dim(), &ginv, &dg))
            } else {
                Err(Error::MissingClosure(
                    "analytic scheme needs a Christoffel or derivative closure".into(),
                ))
            }
        }
        DiffScheme::FiniteDifference { step, richardson } => {
            if g.singular.excludes(x) {
                return Err(Error::SingularEvaluation { point: x.to_vec() });
            }
            let h = step.unwrap_or(1e-4 * g.chart.domain.diagonal());
            let dg = g.fd_metric_derivative(x, h, *richardson);
            let ginv = g.inverse_at(x)?;
            Ok(levi_civita_from_derivative(g.dim(), &ginv, &dg))
        }
    }
}

fn levi_civita_from_derivative(n: usize, ginv: &crate::linalg::Mat, dg: &Tensor3) -> Tensor3 {
    // dg.get(k, i, j) = d_k g_ij; the (j, k) symmetry of the result is exact
    // because dg is built from a symmetrized metric.
    Tensor3::symmetric_lower_from_fn(n, |l, j, k| {
        let mut s = 0.0;
        for i in 0..n {
            s += ginv.get(l, i) * (dg.get(j, i, k) + dg.get(k, i, j) - dg.get(i, j, k));
        }
        0.5 * s
    })
}

/// Transforms Christoffel symbols through the source chart's transition into
/// `target` coordinates:
/// `G~^i_jk(y) = J^i_a Jinv^b_j Jinv^c_k G^a_bc(x) + J^i_a d2x^a/dy^j dy^k`.
pub fn christoffel_transform(gamma: &ChristoffelField, target: &Chart) -> Result<ChristoffelField> {
    let transition = gamma
        .chart
        .transition
        .clone()
        .ok_or_else(|| Error::MissingClosure("source chart has no transition".into()))?;
    let n = gamma.dim();
    if target.dim != n {
        return Err(Error::ChartMismatch("transition must preserve dimension".into()));
    }
    let src = gamma.clone();
    // Second-derivative central differences balance truncation against
    // roundoff near h ~ eps^(1/4).
    let step = 1.2e-4 * target.domain.diagonal();
    let eval: Tensor3Fn = Arc::new(move |y: &[f64]| {
        let (x, j, jinv) = transition
            .inverse_jacobian_at(y)
            .unwrap_or_else(|e| panic!("chart transition degenerate: {e}"));
        let g = src.eval_unguarded(&x);
        let hess = transition.inverse_hessian_at(y, step);
        Tensor3::symmetric_lower_from_fn(n, |i, jj, kk| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        s += j.get(i, a) * jinv.get(b, jj) * jinv.get(c, kk) * g.get(a, b, c);
                    }
                }
                s += j.get(i, a) * 0.5 * (hess.get(a, jj, kk) + hess.get(a, kk, jj));
            }
            s
        })
    });

    // Strata move with the forward map.
    let transition_ref = gamma.chart.transition.as_ref().unwrap();
    let mut strata = Vec::new();
    for s in &gamma.singular.strata {
        match s {
            crate::geometry::singular::Stratum::Point { at, exclusion } => {
                strata.push(crate::geometry::singular::Stratum::Point {
                    at: (transition_ref.forward)(at),
                    exclusion: *exclusion,
                });
            }
            crate::geometry::singular::Stratum::Curve { vertices, exclusion } => {
                strata.push(crate::geometry::singular::Stratum::Curve {
                    vertices: vertices.iter().map(|v| (transition_ref.forward)(v)).collect(),
                    exclusion: *exclusion,
                });
            }
            crate::geometry::singular::Stratum::HyperplanePiece { .. } => {
                return Err(Error::Precondition(
                    "hyperplane strata do not transform through nonlinear transitions; \
                     use a curve stratum"
                        .into(),
                ));
            }
        }
    }
    let singular = SingularSet { strata };
    let claims = gamma.claims.clone();
    Ok(ChristoffelField::new(target.clone(), eval, singular)
        .with_claims(claims)
        .with_analytic(gamma.analytic))
}

/// Measurable `(1,2)`-tensor perturbation, symmetric in the lower indices,
/// with a declared sup-norm bound on compact sets.
#[derive(Clone)]
pub struct ConnectionPerturbation {
    pub chart: Chart,
    pub eval: Tensor3Fn,
    pub sup_norm: f64,
}

impl ConnectionPerturbation {
    pub fn constant(chart: Chart, t: Tensor3) -> Result<Self> {
        if t.lower_asymmetry() > 0.0 {
            return Err(Error::Precondition(
                "perturbation must be symmetric in its lower indices".into(),
            ));
        }
        let sup = t.max_abs();
        Ok(ConnectionPerturbation { chart, eval: Arc::new(move |_: &[f64]| t.clone()), sup_norm: sup })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let inner = self.eval.clone();
        ConnectionPerturbation {
            chart: self.chart.clone(),
            eval: Arc::new(move |x: &[f64]| {
                let t = inner(x);
                let n = t.dim();
                Tensor3::from_fn(n, |i, j, k| factor * t.get(i, j, k))
            }),
            sup_norm: self.sup_norm * factor.abs(),
        }
    }
}

/// Pointwise sum `Gamma + T`. The integrability claims weaken to the
/// original class joined with `L_inf`.
pub fn perturb(gamma: &ChristoffelField, t: &ConnectionPerturbation) -> Result<ChristoffelField> {
    if !gamma.chart.compatible_with(&t.chart) {
        return Err(Error::ChartMismatch(
            "perturbation lives on a different chart than the connection".into(),
        ));
    }
    let base = gamma.clone();
    let pert = t.eval.clone();
    let eval: Tensor3Fn = Arc::new(move |x: &[f64]| base.eval_unguarded(x).add(&pert(x)));
    let claims = gamma
        .claims
        .iter()
        .map(|c| c.weaker(IntegrabilityClass::LInfLoc))
        .collect();
    Ok(ChristoffelField::new(gamma.chart.clone(), eval, gamma.singular.clone())
        .with_claims(claims)
        .with_analytic(gamma.analytic))
}
