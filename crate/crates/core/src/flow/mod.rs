//! Weak-flow identity checking for time-dependent metric families.
//!
//! A family `g(t)` of metrics paired with time-dependent test fields must
//! satisfy, for each `t`,
//!
//! ```text
//! int g_ij(t) V^i(t) W^j(t) = int g_ij(0) V^i(0) W^j(0)
//!   + int_0^t int [ g (d_s V) W + g V (d_s W)
//!                   - 2 (D_i V^i)(D_j W^j) + 2 (D_i V^j)(D_j W^i) ] ds
//! ```
//!
//! exactly when the family solves the flow equation weakly. The residual
//! reported here is `predicted - actual`: the right-hand side minus the
//! final pairing, so a static metric of nonzero form value `Q` produces the
//! discriminating residual `-2 t Q`.

pub mod builtins;

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::{BoxDomain, Chart};
use crate::geometry::christoffel::{christoffel_from_metric, ChristoffelField, DiffScheme};
use crate::geometry::half_density::{covariant_matrix, HalfDensityField};
use crate::geometry::metric::MetricField;
use crate::linalg::Mat;
use crate::qform::q_value;
use crate::quadrature::{fit_shell_decay, gauss_legendre, integrate, QuadratureScheme, Verdict};

/// Pass/fail tolerance of the identity: quadrature slack only.
pub const FLOW_ABS_TOL: f64 = 1e-6;
pub const FLOW_REL_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TimeRegularity {
    Smooth,
    Lipschitz,
}

pub type MetricAtFn = Arc<dyn Fn(f64) -> MetricField + Send + Sync>;
pub type MetricDtFn = Arc<dyn Fn(f64, &[f64]) -> Mat + Send + Sync>;
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-parameter family of metrics on a fixed chart over `[0, horizon)`.
#[derive(Clone)]
pub struct TimeDependentMetric {
    pub chart: Chart,
    pub horizon: f64,
    at: MetricAtFn,
    /// Closed-form time derivative of the metric coefficients, if any.
    pub dt_eval: Option<MetricDtFn>,
    /// Declared slice-wise lower-bound rate `c(t)` for the form.
    pub lower_bound: RateFn,
    pub time_regularity: TimeRegularity,
    /// The family does not actually depend on time (enables the exact
    /// constant-integrand shortcut in the time integral).
    pub static_in_time: bool,
}

impl TimeDependentMetric {
    pub fn new(chart: Chart, horizon: f64, at: MetricAtFn) -> Self {
        TimeDependentMetric {
            chart,
            horizon,
            at,
            dt_eval: None,
            lower_bound: Arc::new(|_| 0.0),
            time_regularity: TimeRegularity::Smooth,
            static_in_time: false,
        }
    }

    pub fn static_metric(metric: MetricField, horizon: f64) -> Self {
        let chart = metric.chart.clone();
        let mut family = TimeDependentMetric::new(chart, horizon, Arc::new(move |_t| metric.clone()));
        family.static_in_time = true;
        family
    }

    pub fn with_dt(mut self, dt: MetricDtFn) -> Self {
        self.dt_eval = Some(dt);
        self
    }

    pub fn with_lower_bound(mut self, c: RateFn) -> Self {
        self.lower_bound = c;
        self
    }

    pub fn slice(&self, t: f64) -> Result<MetricField> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::Precondition(format!(
                "time {t} outside the family horizon [0, {})",
                self.horizon
            )));
        }
        Ok((self.at)(t))
    }
}

pub type FieldAtFn = Arc<dyn Fn(f64) -> HalfDensityField + Send + Sync>;

/// One-parameter family of half-density test fields, jointly Lipschitz with
/// support in a fixed box.
#[derive(Clone)]
pub struct TimeDependentField {
    at: FieldAtFn,
    /// Coefficientwise time derivative, as a field; `None` means zero.
    dt: Option<FieldAtFn>,
    pub joint_lipschitz: f64,
    pub support: BoxDomain,
    pub static_in_time: bool,
}

impl TimeDependentField {
    pub fn static_field(f: HalfDensityField) -> Self {
        let support = f.support.clone();
        let lip = f.lipschitz;
        TimeDependentField {
            at: Arc::new(move |_t| f.clone()),
            dt: None,
            joint_lipschitz: lip,
            support,
            static_in_time: true,
        }
    }

    pub fn new(at: FieldAtFn, dt: Option<FieldAtFn>, joint_lipschitz: f64, support: BoxDomain) -> Self {
        TimeDependentField { at, dt, joint_lipschitz, support, static_in_time: false }
    }

    pub fn slice(&self, t: f64) -> HalfDensityField {
        (self.at)(t)
    }

    pub fn dt_slice(&self, t: f64) -> Option<HalfDensityField> {
        self.dt.as_ref().map(|d| d(t))
    }
}

/// Residual of the identity with its exact breakdown:
/// `residual = pairing_start + dfield_term + q_term - pairing_end`.
#[derive(Clone, Debug, Serialize)]
pub struct FlowResidual {
    pub t_start: f64,
    pub t_end: f64,
    pub pairing_end: f64,
    pub pairing_start: f64,
    pub dfield_term: f64,
    pub q_term: f64,
    pub residual: f64,
    pub spatial_error: f64,
    pub time_error: f64,
}

impl FlowResidual {
    /// Magnitude of the two sides, for relative tolerances.
    pub fn scale(&self) -> f64 {
        let rhs = self.pairing_start + self.dfield_term + self.q_term;
        self.pairing_end.abs().max(rhs.abs())
    }

    pub fn passes(&self) -> bool {
        self.residual.abs() <= FLOW_ABS_TOL.max(FLOW_REL_TOL * self.scale())
    }
}

fn slice_christoffel(metric: &MetricField) -> Result<ChristoffelField> {
    let scheme = if metric.has_christoffel() || metric.has_d_eval() {
        DiffScheme::Analytic
    } else {
        DiffScheme::default()
    };
    christoffel_from_metric(metric, &scheme)
}

/// The metric pairing `int g_ij(t) v^i w^j dx` at one time slice.
fn metric_pairing(
    metric: &MetricField,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let domain = match v
        .support
        .intersect(&w.support)
        .and_then(|b| b.intersect(&metric.chart.domain))
    {
        Some(b) => b,
        None => return Ok((0.0, 0.0)),
    };
    let f = |x: &[f64]| -> Result<f64> {
        let g = metric.eval(x);
        Ok(g.pair(&v.coeffs_at(x), &w.coeffs_at(x)))
    };
    let r = integrate(&f, &domain, &metric.singular, scheme)?;
    Ok((r.value, r.error))
}

struct TimeIntegrand<'a> {
    g: &'a TimeDependentMetric,
    v: &'a TimeDependentField,
    w: &'a TimeDependentField,
    scheme: &'a QuadratureScheme,
    /// `s -> (dfield contribution, form contribution, spatial error)`.
    cache: RefCell<HashMap<u64, (f64, f64, f64)>>,
}

impl<'a> TimeIntegrand<'a> {
    fn eval(&self, s: f64) -> Result<(f64, f64, f64)> {
        if let Some(hit) = self.cache.borrow().get(&s.to_bits()) {
            return Ok(*hit);
        }
        let metric = self.g.slice(s)?;
        let gamma = slice_christoffel(&metric)?;
        let vs = self.v.slice(s);
        let ws = self.w.slice(s);
        let q = q_value(&gamma, &vs, &ws, self.scheme)?;
        let mut dterm = 0.0;
        let mut derr = 0.0;
        if let Some(dv) = self.v.dt_slice(s) {
            let (val, err) = metric_pairing(&metric, &dv, &ws, self.scheme)?;
            dterm += val;
            derr += err;
        }
        if let Some(dw) = self.w.dt_slice(s) {
            let (val, err) = metric_pairing(&metric, &vs, &dw, self.scheme)?;
            dterm += val;
            derr += err;
        }
        let out = (dterm, -2.0 * q.value, derr + 2.0 * q.error);
        self.cache.borrow_mut().insert(s.to_bits(), out);
        Ok(out)
    }
}

/// Adaptive Gauss-Legendre in time over `[a, b]` of the cached integrand;
/// returns `(dfield integral, q integral, spatial error, time error)`.
fn time_integral(
    integrand: &TimeIntegrand,
    a: f64,
    b: f64,
    order: usize,
    tol: f64,
    depth: usize,
) -> Result<(f64, f64, f64, f64)> {
    fn panel(integrand: &TimeIntegrand, a: f64, b: f64, order: usize) -> Result<(f64, f64, f64)> {
        let rule = gauss_legendre(order);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut d = 0.0;
        let mut q = 0.0;
        let mut e = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let (ds, qs, es) = integrand.eval(mid + half * x)?;
            d += w * ds;
            q += w * qs;
            e += w * es;
        }
        Ok((d * half, q * half, e * half))
    }
    let coarse = panel(integrand, a, b, order)?;
    let mid = 0.5 * (a + b);
    let left = panel(integrand, a, mid, order)?;
    let right = panel(integrand, mid, b, order)?;
    let fine = (left.0 + right.0, left.1 + right.1, left.2 + right.2);
    let diff = (fine.0 + fine.1 - coarse.0 - coarse.1).abs();
    if diff <= tol || depth == 0 {
        return Ok((fine.0, fine.1, fine.2, diff));
    }
    let l = time_integral(integrand, a, mid, order, 0.5 * tol, depth - 1)?;
    let r = time_integral(integrand, mid, b, order, 0.5 * tol, depth - 1)?;
    Ok((l.0 + r.0, l.1 + r.1, l.2 + r.2, l.3 + r.3))
}

/// Evaluates the identity over `[t_start, t_end]`; the residual is the
/// predicted final pairing minus the actual one.
pub fn flow_identity_residual(
    g: &TimeDependentMetric,
    v: &TimeDependentField,
    w: &TimeDependentField,
    t_start: f64,
    t_end: f64,
    scheme: &QuadratureScheme,
    time_order: usize,
) -> Result<FlowResidual> {
    if !(t_start <= t_end && t_end < g.horizon) {
        return Err(Error::Precondition(format!(
            "time window [{t_start}, {t_end}] outside the family horizon"
        )));
    }
    let m_end = g.slice(t_end)?;
    let m_start = g.slice(t_start)?;
    let (pairing_end, err_end) = metric_pairing(&m_end, &v.slice(t_end), &w.slice(t_end), scheme)?;
    let (pairing_start, err_start) =
        metric_pairing(&m_start, &v.slice(t_start), &w.slice(t_start), scheme)?;
    let integrand = TimeIntegrand { g, v, w, scheme, cache: RefCell::new(HashMap::new()) };
    let fully_static = g.static_in_time && v.static_in_time && w.static_in_time;
    let (dterm, qterm, spatial_err, time_err) = if t_end <= t_start {
        (0.0, 0.0, 0.0, 0.0)
    } else if fully_static {
        // Constant integrand: one slice evaluation integrates exactly.
        let (d, q, e) = integrand.eval(0.5 * (t_start + t_end))?;
        let len = t_end - t_start;
        (d * len, q * len, e * len, 0.0)
    } else {
        let tol = FLOW_ABS_TOL * 0.1;
        time_integral(&integrand, t_start, t_end, time_order, tol, 12)?
    };
    let residual = pairing_start + dterm + qterm - pairing_end;
    Ok(FlowResidual {
        t_start,
        t_end,
        pairing_end,
        pairing_start,
        dfield_term: dterm,
        q_term: qterm,
        residual,
        spatial_error: err_end + err_start + spatial_err,
        time_error: time_err,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowCheckRecord {
    pub pair: usize,
    pub t: f64,
    pub residual: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowCheckReport {
    pub records: Vec<FlowCheckRecord>,
    pub pass: bool,
}

/// The identity checked for every field pair and time: a weak-flow solution
/// passes all of them.
pub fn tame_flow_check(
    g: &TimeDependentMetric,
    suite: &[(TimeDependentField, TimeDependentField)],
    times: &[f64],
    scheme: &QuadratureScheme,
    time_order: usize,
) -> Result<FlowCheckReport> {
    let mut records = Vec::new();
    let mut pass = true;
    for (idx, (v, w)) in suite.iter().enumerate() {
        for &t in times {
            let r = flow_identity_residual(g, v, w, 0.0, t, scheme, time_order)?;
            let record = FlowCheckRecord {
                pair: idx,
                t,
                residual: r.residual,
                scale: r.scale(),
                pass: r.passes(),
            };
            pass &= record.pass;
            records.push(record);
        }
    }
    Ok(FlowCheckReport { records, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct SobolevGate {
    pub finite: bool,
    pub value: f64,
    pub error: f64,
}

/// Square integrability of the covariant derivative:
/// `int sum_ij (D_i v^j)^2 dx`, with shell-resolved divergence detection.
pub fn sobolev_gate(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    scheme: &QuadratureScheme,
) -> Result<SobolevGate> {
    let domain = match v.support.intersect(&gamma.chart.domain) {
        Some(b) => b,
        None => return Ok(SobolevGate { finite: true, value: 0.0, error: 0.0 }),
    };
    let f = |x: &[f64]| -> Result<f64> {
        let g = gamma.eval(x)?;
        let d = covariant_matrix(&g, &v.coeffs_at(x), &v.d_coeffs_at(x));
        let n = d.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += d.get(i, j) * d.get(i, j);
            }
        }
        Ok(s)
    };
    let r = integrate(&f, &domain, &gamma.singular, scheme)?;
    let diverging = r.shells.iter().any(|trace| {
        fit_shell_decay(&trace.sums, &trace.radii, scheme.shell_ratio).verdict == Verdict::Diverges
    });
    Ok(SobolevGate { finite: !diverging && r.converged, value: r.value, error: r.error })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConePreservingReport {
    /// Indices of suite pairs excluded by the gate.
    pub gated_out: Vec<usize>,
    pub records: Vec<FlowCheckRecord>,
    pub pass: bool,
}

/// The weaker flow check in which test fields must additionally have square
/// integrable covariant derivative at every slice time; pairs failing the
/// gate are excluded and recorded.
pub fn cone_preserving_flow_check(
    g: &TimeDependentMetric,
    suite: &[(TimeDependentField, TimeDependentField)],
    times: &[f64],
    scheme: &QuadratureScheme,
    time_order: usize,
) -> Result<ConePreservingReport> {
    let mut gated_out = Vec::new();
    let mut gated_suite = Vec::new();
    for (idx, (v, w)) in suite.iter().enumerate() {
        let mut admissible = true;
        for &t in times {
            let gamma = slice_christoffel(&g.slice(t)?)?;
            for f in [&v.slice(t), &w.slice(t)] {
                if !sobolev_gate(&gamma, f, scheme)?.finite {
                    admissible = false;
                }
            }
            if !admissible {
                break;
            }
        }
        if admissible {
            gated_suite.push((v.clone(), w.clone()));
        } else {
            gated_out.push(idx);
        }
    }
    let inner = tame_flow_check(g, &gated_suite, times, scheme, time_order)?;
    Ok(ConePreservingReport { gated_out, records: inner.records, pass: inner.pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityMember {
    pub lipschitz_distance: f64,
    pub tame_pass: bool,
    pub worst_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub members: Vec<StabilityMember>,
    /// All sequence members passed the identity themselves.
    pub precondition_ok: bool,
    pub limit_worst_residual: f64,
    pub limit_pass: bool,
    /// Fitted constant in `|residual_i - residual_limit| <= C * distance_i`,
    /// when the precondition holds.
    pub fitted_constant: Option<f64>,
}

/// Uniform-in-time Lipschitz distance between two families on a sample grid:
/// the sup of coefficient differences plus first finite differences.
pub fn lipschitz_distance(
    a: &TimeDependentMetric,
    b: &TimeDependentMetric,
    times: &[f64],
    grid: &[Vec<f64>],
    fd_step: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    let n = a.chart.dim;
    for &t in times {
        let ma = a.slice(t)?;
        let mb = b.slice(t)?;
        for p in grid {
            let d = ma.eval(p).sub(&mb.eval(p));
            worst = worst.max(d.max_abs());
            for axis in 0..n {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[axis] += fd_step;
                pm[axis] -= fd_step;
                let da = ma.eval(&pp).sub(&ma.eval(&pm)).scaled(1.0 / (2.0 * fd_step));
                let db = mb.eval(&pp).sub(&mb.eval(&pm)).scaled(1.0 / (2.0 * fd_step));
                worst = worst.max(da.sub(&db).max_abs());
            }
        }
    }
    Ok(worst)
}

/// Stability of the identity under Lipschitz limits: every member of the
/// sequence must itself pass (else the report flags a precondition failure,
/// not a counterexample), and the limit's residuals are bounded in terms of
/// the measured distances.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_limit_stability(
    sequence: &[TimeDependentMetric],
    limit: &TimeDependentMetric,
    suite: &[(TimeDependentField, TimeDependentField)],
    times: &[f64],
    scheme: &QuadratureScheme,
    time_order: usize,
    grid: &[Vec<f64>],
    fd_step: f64,
) -> Result<StabilityReport> {
    let worst_of = |report: &FlowCheckReport| -> f64 {
        report
            .records
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max)
    };
    let mut members = Vec::new();
    let mut precondition_ok = true;
    let mut residuals = Vec::new();
    let mut dists = Vec::new();
    for g in sequence {
        let dist = lipschitz_distance(g, limit, times, grid, fd_step)?;
        let check = tame_flow_check(g, suite, times, scheme, time_order)?;
        let worst = worst_of(&check);
        precondition_ok &= check.pass;
        members.push(StabilityMember {
            lipschitz_distance: dist,
            tame_pass: check.pass,
            worst_residual: worst,
        });
        residuals.push(worst);
        dists.push(dist);
    }
    let limit_check = tame_flow_check(limit, suite, times, scheme, time_order)?;
    let limit_worst = worst_of(&limit_check);
    let fitted_constant = if precondition_ok {
        Some(
            residuals
                .iter()
                .zip(&dists)
                .filter(|(_, d)| **d > 1e-14)
                .map(|(r, d)| (r - limit_worst).abs() / d)
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(StabilityReport {
        members,
        precondition_ok,
        limit_worst_residual: limit_worst,
        limit_pass: limit_check.pass,
        fitted_constant,
    })
}
