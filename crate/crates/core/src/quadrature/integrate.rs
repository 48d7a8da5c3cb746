//! Adaptive box integration with geometric shell refinement toward singular
//! strata.
//!
//! The box is split by a smooth partition of unity: around each stratum a
//! quintic window `theta_k` equals 1 within half the window radius and 0
//! beyond it. The windowed-out far region is integrated by adaptive
//! tensor-product Gauss-Legendre cells; each near region is integrated over
//! geometrically shrinking shells (polar annuli around points, slabs around
//! hyperplane pieces, tubes around curve segments) whose partial sums are
//! recorded for the integrability diagnostics. Telescoping the windows
//! (`1 = prod(1-theta) + sum_k theta_k prod_{m<k}(1-theta_m)`) keeps the
//! decomposition exact even for overlapping strata.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::geometry::chart::BoxDomain;
use crate::geometry::half_density::smoothstep;
use crate::geometry::singular::{SingularSet, Stratum};
use crate::linalg::{norm, sub};
use crate::quadrature::gauss::gauss_legendre;
use crate::quadrature::scheme::{IntegralResult, QuadratureScheme, ShellTrace};

/// Box-cell recursion is capped independently of the shell count.
const MAX_BOX_DEPTH: usize = 16;
const SLAB_DEPTH: usize = 10;

pub(crate) struct Engine<'a> {
    f: &'a dyn Fn(&[f64]) -> Result<f64>,
    evals: Cell<u64>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(f: &'a dyn Fn(&[f64]) -> Result<f64>) -> Self {
        Engine { f, evals: Cell::new(0) }
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.evals.set(self.evals.get() + 1);
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::IntegrandFailure { point: x.to_vec() });
        }
        Ok(v)
    }
}

#[derive(Clone)]
struct Window {
    stratum_index: usize,
    stratum: Stratum,
    radius: f64,
}

impl Window {
    /// 1 within half the radius, 0 beyond it, quintic in between.
    fn theta(&self, x: &[f64]) -> f64 {
        let d = self.stratum.distance(x);
        if d >= self.radius {
            0.0
        } else if d <= 0.5 * self.radius {
            1.0
        } else {
            1.0 - smoothstep(2.0 * d / self.radius - 1.0)
        }
    }
}

/// Shell window radius for a stratum inside a box: the exclusion hint,
/// shrunk so the shells stay inside the box.
pub(crate) fn stratum_window_radius(s: &Stratum, domain: &BoxDomain) -> Result<f64> {
    let margin = match s {
        Stratum::Point { at, .. } => {
            if !domain.contains(at, 0.0) {
                return Err(Error::Precondition(
                    "point stratum lies outside the integration box".into(),
                ));
            }
            domain.boundary_distance(at)
        }
        Stratum::HyperplanePiece { axis, value, .. } => {
            (value - domain.lo[*axis]).min(domain.hi[*axis] - value)
        }
        Stratum::Curve { vertices, .. } => transverse_margin(vertices, domain)?,
    };
    Ok(s.exclusion().min(0.9 * margin))
}

fn build_windows(
    singular: &SingularSet,
    domain: &BoxDomain,
    r_min: f64,
) -> Result<Vec<Window>> {
    let mut windows = Vec::new();
    for (idx, s) in singular.strata.iter().enumerate() {
        let radius = stratum_window_radius(s, domain)?;
        if radius < 8.0 * r_min {
            return Err(Error::Precondition(format!(
                "stratum {idx} window radius {radius:.3e} leaves no room above the innermost shell radius {r_min:.3e}"
            )));
        }
        windows.push(Window { stratum_index: idx, stratum: s.clone(), radius });
    }
    Ok(windows)
}

fn transverse_margin(vertices: &[Vec<f64>], domain: &BoxDomain) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for seg in vertices.windows(2) {
        let d = sub(&seg[1], &seg[0]);
        let len = norm(&d);
        if len == 0.0 {
            return Err(Error::Precondition("degenerate curve segment".into()));
        }
        let axis = principal_axis(&d, len)?;
        for b in 0..domain.dim() {
            if b != axis {
                let v = seg[0][b];
                margin = margin.min((v - domain.lo[b]).min(domain.hi[b] - v));
            }
        }
    }
    Ok(margin)
}

/// Index of the axis a segment runs along; curve shells support axis-aligned
/// segments, which is what the built-in strata use.
fn principal_axis(d: &[f64], len: f64) -> Result<usize> {
    let mut axis = 0;
    let mut best = 0.0;
    let mut off_axis = 0.0;
    for (i, v) in d.iter().enumerate() {
        if v.abs() > best {
            if best > off_axis {
                off_axis = best;
            }
            best = v.abs();
            axis = i;
        } else if v.abs() > off_axis {
            off_axis = v.abs();
        }
    }
    if off_axis > 1e-12 * len {
        return Err(Error::Precondition(
            "curve shells require axis-aligned segments".into(),
        ));
    }
    Ok(axis)
}

/// Integrates `f` over the box, resolving the declared strata by geometric
/// shells. Strata outside the box are ignored; max-depth truncation yields
/// `converged = false` rather than an error.
pub fn integrate(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    domain: &BoxDomain,
    singular: &SingularSet,
    scheme: &QuadratureScheme,
) -> Result<IntegralResult> {
    scheme.validate()?;
    let engine = Engine::new(f);
    let active = singular.restricted_to(domain);
    let r_min = scheme.r_min_factor * domain.diagonal();
    let windows = build_windows(&active, domain, r_min)?;

    let far = {
        let windows = windows.clone();
        let weighted = move |x: &[f64], e: &Engine| -> Result<f64> {
            let mut w = 1.0;
            for win in &windows {
                w *= 1.0 - win.theta(x);
                if w == 0.0 {
                    return Ok(0.0);
                }
            }
            Ok(w * e.eval(x)?)
        };
        adaptive_box(&engine, &weighted, &domain.lo, &domain.hi, scheme)?
    };

    let mut value = far.0;
    let mut error = far.1;
    let mut shells_out = Vec::new();
    let mut tail_ok = true;
    for k in 0..windows.len() {
        let scan = shell_scan(&engine, &windows, k, domain, scheme, r_min)?;
        value += scan.sums.iter().sum::<f64>() + scan.tail_value;
        error += scan.tail_bound + scan.quad_error;
        tail_ok &= scan.tail_resolved;
        shells_out.push(ShellTrace {
            stratum: windows[k].stratum_index,
            radii: scan.radii,
            sums: scan.sums,
        });
    }

    let converged = tail_ok && error <= scheme.tolerance_for(value);
    Ok(IntegralResult {
        value,
        error,
        evals: engine.evals.get(),
        converged,
        shells: shells_out,
    })
}

// ---------------------------------------------------------------------------
// Far region: adaptive tensor-product cells.
// ---------------------------------------------------------------------------

fn cell_gl(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    lo: &[f64],
    hi: &[f64],
    order: usize,
) -> Result<f64> {
    let n = lo.len();
    let rule = gauss_legendre(order);
    let mids: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let halfs: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let scale: f64 = halfs.iter().product();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..n {
            x[i] = mids[i] + halfs[i] * rule.0[idx[i]];
            w *= rule.1[idx[i]];
        }
        total += w * f(&x, engine)?;
        let mut carry = true;
        for i in 0..n {
            if carry {
                idx[i] += 1;
                if idx[i] == order {
                    idx[i] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(total * scale)
}

fn adaptive_box(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    lo: &[f64],
    hi: &[f64],
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let coarse = cell_gl(engine, f, lo, hi, scheme.order)?;
    let children = split_cell(lo, hi);
    let mut child_vals = Vec::with_capacity(children.len());
    let mut fine = 0.0;
    for (clo, chi) in &children {
        let v = cell_gl(engine, f, clo, chi, scheme.order)?;
        fine += v;
        child_vals.push(v);
    }
    let scale = coarse.abs().max(fine.abs());
    let tol = 0.5 * scheme.tolerance_for(scale);
    let depth = scheme.max_depth.min(MAX_BOX_DEPTH);
    if (fine - coarse).abs() <= tol || depth <= 1 {
        return Ok((fine, (fine - coarse).abs()));
    }
    let mut value = 0.0;
    let mut err = 0.0;
    let child_tol = tol / children.len() as f64;
    for ((clo, chi), cv) in children.iter().zip(child_vals) {
        let (v, e) = adapt_cell(engine, f, clo, chi, cv, child_tol, depth - 1, scheme.order)?;
        value += v;
        err += e;
    }
    Ok((value, err))
}

#[allow(clippy::too_many_arguments)]
fn adapt_cell(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    lo: &[f64],
    hi: &[f64],
    coarse: f64,
    tol: f64,
    depth: usize,
    order: usize,
) -> Result<(f64, f64)> {
    let children = split_cell(lo, hi);
    let mut child_vals = Vec::with_capacity(children.len());
    let mut fine = 0.0;
    for (clo, chi) in &children {
        let v = cell_gl(engine, f, clo, chi, order)?;
        fine += v;
        child_vals.push(v);
    }
    let err = (fine - coarse).abs();
    if err <= tol || depth == 0 {
        return Ok((fine, err));
    }
    let mut value = 0.0;
    let mut errs = 0.0;
    let child_tol = tol / children.len() as f64;
    for ((clo, chi), cv) in children.iter().zip(child_vals) {
        let (v, e) = adapt_cell(engine, f, clo, chi, cv, child_tol, depth - 1, order)?;
        value += v;
        errs += e;
    }
    Ok((value, errs))
}

fn split_cell(lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = lo.len();
    let mids: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    (0..1usize << n)
        .map(|mask| {
            let mut clo = vec![0.0; n];
            let mut chi = vec![0.0; n];
            for i in 0..n {
                if mask >> i & 1 == 0 {
                    clo[i] = lo[i];
                    chi[i] = mids[i];
                } else {
                    clo[i] = mids[i];
                    chi[i] = hi[i];
                }
            }
            (clo, chi)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Near regions: geometric shells.
// ---------------------------------------------------------------------------

struct ShellScan {
    radii: Vec<f64>,
    sums: Vec<f64>,
    quad_error: f64,
    tail_value: f64,
    tail_bound: f64,
    tail_resolved: bool,
}

fn shell_scan(
    engine: &Engine,
    windows: &[Window],
    k: usize,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
    r_min: f64,
) -> Result<ShellScan> {
    let win = windows[k].clone();
    let prior: Vec<Window> = windows[..k].to_vec();
    let weighted = move |x: &[f64], e: &Engine| -> Result<f64> {
        let mut w = win.theta(x);
        if w == 0.0 {
            return Ok(0.0);
        }
        for m in &prior {
            w *= 1.0 - m.theta(x);
            if w == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(w * e.eval(x)?)
    };
    let (radii, sums, quad_error) = shell_sweep(
        engine,
        &weighted,
        &windows[k].stratum,
        windows[k].radius,
        domain,
        scheme,
        r_min,
    )?;
    let (tail_value, tail_bound, tail_resolved) = extrapolate_tail(&sums, scheme);
    Ok(ShellScan { radii, sums, quad_error, tail_value, tail_bound, tail_resolved })
}

/// Shell sums of a raw (unwindowed) integrand around one stratum; the
/// integrability diagnostics consume the decay of these sums.
pub(crate) fn raw_shell_sums(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    stratum: &Stratum,
    window_radius: f64,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
) -> Result<(Vec<f64>, Vec<f64>, u64)> {
    let engine = Engine::new(f);
    let plain = |x: &[f64], e: &Engine| -> Result<f64> { e.eval(x) };
    let r_min = scheme.r_min_factor * domain.diagonal();
    let (radii, sums, _err) =
        shell_sweep(&engine, &plain, stratum, window_radius, domain, scheme, r_min)?;
    Ok((radii, sums, engine.evals.get()))
}

#[allow(clippy::too_many_arguments)]
fn shell_sweep(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    stratum: &Stratum,
    radius: f64,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
    r_min: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut radii = Vec::new();
    let mut sums = Vec::new();
    let mut quad_error = 0.0;
    let mut acc = 0.0f64;
    let rho = scheme.shell_ratio;
    for j in 0..scheme.max_depth {
        let r_hi = radius * rho.powi(j as i32);
        let r_lo = radius * rho.powi(j as i32 + 1);
        if r_lo < r_min {
            // Only full geometric shells enter the decay record; the sliver
            // below is covered by the tail extrapolation.
            break;
        }
        let (s, e) = shell_integral(engine, f, stratum, r_lo, r_hi, domain, scheme)?;
        radii.push(r_hi);
        sums.push(s);
        quad_error += e;
        acc += s;
    }
    let _ = acc;
    Ok((radii, sums, quad_error))
}

/// Geometric continuation of the trailing shell sums. Returns the estimated
/// remaining mass, an error bound for it, and whether the tail is resolved
/// (decaying shells or negligible magnitude).
fn extrapolate_tail(sums: &[f64], scheme: &QuadratureScheme) -> (f64, f64, bool) {
    if sums.is_empty() {
        return (0.0, 0.0, true);
    }
    let total: f64 = sums.iter().sum();
    let floor = 1e-15 * (1.0 + total.abs());
    let tail: Vec<f64> = sums.iter().rev().take(4).cloned().collect();
    if tail.iter().all(|v| v.abs() < floor.max(0.01 * scheme.abs_tol)) {
        return (0.0, 0.0, true);
    }
    let last = sums[sums.len() - 1];
    if sums.len() < 2 {
        return (0.0, last.abs(), false);
    }
    let prev = sums[sums.len() - 2];
    if prev.abs() < floor {
        return (0.0, last.abs(), last.abs() < floor);
    }
    let ratio = last / prev;
    if ratio.abs() < 0.95 {
        let est = last * ratio / (1.0 - ratio);
        (est, 2.0 * est.abs() + floor, true)
    } else {
        // Non-decaying shells: the truncated remainder is unbounded as far
        // as the data shows.
        (0.0, last.abs() * scheme.max_depth as f64, false)
    }
}

#[allow(clippy::too_many_arguments)]
fn shell_integral(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    stratum: &Stratum,
    r_lo: f64,
    r_hi: f64,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    match stratum {
        Stratum::Point { at, .. } => match at.len() {
            2 => annulus_2d(engine, f, at, r_lo, r_hi, scheme),
            3 => spherical_shell_3d(engine, f, at, r_lo, r_hi, scheme),
            d => Err(Error::Precondition(format!(
                "point-stratum shells support dimensions 2 and 3, got {d}"
            ))),
        },
        Stratum::HyperplanePiece { axis, value, .. } => {
            slab_pair(engine, f, *axis, *value, r_lo, r_hi, domain, scheme)
        }
        Stratum::Curve { vertices, .. } => {
            let mut total = 0.0;
            let mut err = 0.0;
            for seg in vertices.windows(2) {
                let (v, e) = tube_shell(engine, f, &seg[0], &seg[1], r_lo, r_hi, domain, scheme)?;
                total += v;
                err += e;
            }
            Ok((total, err))
        }
    }
}

fn annulus_2d(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    center: &[f64],
    r_lo: f64,
    r_hi: f64,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let pr = scheme.order.max(4) + 2;
    let ntheta = (8 * scheme.order).max(32);
    let run = |pr: usize, ntheta: usize| -> Result<f64> {
        let rule = gauss_legendre(pr);
        let mid = 0.5 * (r_lo + r_hi);
        let half = 0.5 * (r_hi - r_lo);
        let mut total = 0.0;
        let dtheta = 2.0 * std::f64::consts::PI / ntheta as f64;
        let mut x = vec![0.0; 2];
        for (rn, rw) in rule.0.iter().zip(&rule.1) {
            let r = mid + half * rn;
            let mut ring = 0.0;
            for t in 0..ntheta {
                let theta = dtheta * (t as f64 + 0.5);
                x[0] = center[0] + r * theta.cos();
                x[1] = center[1] + r * theta.sin();
                ring += f(&x, engine)?;
            }
            total += rw * half * r * ring * dtheta;
        }
        Ok(total)
    };
    let a = run(pr, ntheta)?;
    let b = run(pr + 3, ntheta + ntheta / 2)?;
    Ok((b, (a - b).abs()))
}

fn spherical_shell_3d(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    center: &[f64],
    r_lo: f64,
    r_hi: f64,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let pr = scheme.order.max(4) + 1;
    let nphi = (6 * scheme.order).max(24);
    let run = |pr: usize, nphi: usize| -> Result<f64> {
        let rrule = gauss_legendre(pr);
        let urule = gauss_legendre(pr);
        let mid = 0.5 * (r_lo + r_hi);
        let half = 0.5 * (r_hi - r_lo);
        let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
        let mut total = 0.0;
        let mut x = vec![0.0; 3];
        for (rn, rw) in rrule.0.iter().zip(&rrule.1) {
            let r = mid + half * rn;
            for (un, uw) in urule.0.iter().zip(&urule.1) {
                let u = *un; // cos(polar)
                let s = (1.0 - u * u).max(0.0).sqrt();
                let mut ring = 0.0;
                for p in 0..nphi {
                    let phi = dphi * (p as f64 + 0.5);
                    x[0] = center[0] + r * s * phi.cos();
                    x[1] = center[1] + r * s * phi.sin();
                    x[2] = center[2] + r * u;
                    ring += f(&x, engine)?;
                }
                total += rw * uw * half * r * r * ring * dphi;
            }
        }
        Ok(total)
    };
    let a = run(pr, nphi)?;
    let b = run(pr + 2, nphi + nphi / 2)?;
    Ok((b, (a - b).abs()))
}

#[allow(clippy::too_many_arguments)]
fn slab_pair(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    axis: usize,
    value: f64,
    r_lo: f64,
    r_hi: f64,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut err = 0.0;
    for side in [-1.0, 1.0] {
        let (a, b) = if side > 0.0 {
            (value + r_lo, value + r_hi)
        } else {
            (value - r_hi, value - r_lo)
        };
        let mut lo = domain.lo.clone();
        let mut hi = domain.hi.clone();
        lo[axis] = a.max(domain.lo[axis]);
        hi[axis] = b.min(domain.hi[axis]);
        if !(lo[axis] < hi[axis]) {
            continue;
        }
        let coarse = cell_gl(engine, f, &lo, &hi, scheme.order)?;
        let tol = (1e-7 * coarse.abs()).max(0.01 * scheme.abs_tol);
        let (v, e) = adapt_cell(engine, f, &lo, &hi, coarse, tol, SLAB_DEPTH, scheme.order)?;
        total += v;
        err += e;
    }
    Ok((total, err))
}

#[allow(clippy::too_many_arguments)]
fn tube_shell(
    engine: &Engine,
    f: &dyn Fn(&[f64], &Engine) -> Result<f64>,
    p: &[f64],
    q: &[f64],
    r_lo: f64,
    r_hi: f64,
    domain: &BoxDomain,
    scheme: &QuadratureScheme,
) -> Result<(f64, f64)> {
    let n = p.len();
    let d = sub(q, p);
    let len = norm(&d);
    let axis = principal_axis(&d, len)?;
    let sign = d[axis].signum();
    // Clip the along-segment range to the integration box.
    let (s_min, s_max) = {
        let a = (domain.lo[axis] - p[axis]) * sign;
        let b = (domain.hi[axis] - p[axis]) * sign;
        (a.min(b).max(0.0), a.max(b).min(len))
    };
    if !(s_min < s_max) {
        return Ok((0.0, 0.0));
    }
    match n {
        2 => {
            // Two side strips at transverse distance in [r_lo, r_hi].
            let t_axis = 1 - axis;
            let pr = scheme.order.max(4) + 1;
            let run = |pr: usize| -> Result<f64> {
                let rule = gauss_legendre(pr);
                let mut total = 0.0;
                for side in [-1.0, 1.0] {
                    let mid_d = 0.5 * (r_lo + r_hi) * side;
                    let half_d = 0.5 * (r_hi - r_lo);
                    for (dn, dw) in rule.0.iter().zip(&rule.1) {
                        let offset = mid_d + side * half_d * dn;
                        let mut g = |s: f64| -> f64 {
                            let mut x = vec![0.0; 2];
                            x[axis] = p[axis] + sign * s;
                            x[t_axis] = p[t_axis] + offset;
                            f(&x, engine).unwrap_or(f64::NAN)
                        };
                        let coarse =
                            crate::quadrature::gauss::integrate_1d(&mut g, s_min, s_max, pr);
                        let tol = (1e-7 * coarse.abs()).max(0.01 * scheme.abs_tol);
                        let (line, _) =
                            crate::quadrature::gauss::adaptive_1d(&mut g, s_min, s_max, pr, tol, 6);
                        total += dw * half_d * line;
                    }
                }
                Ok(total)
            };
            let a = run(pr)?;
            let b = run(pr + 3)?;
            if !b.is_finite() {
                return Err(Error::IntegrandFailure { point: p.to_vec() });
            }
            Ok((b, (a - b).abs()))
        }
        3 => {
            let taxes: Vec<usize> = (0..3).filter(|a| *a != axis).collect();
            let pr = scheme.order.max(4) + 1;
            let nphi = (6 * scheme.order).max(24);
            let run = |pr: usize, nphi: usize| -> Result<f64> {
                let rule = gauss_legendre(pr);
                let mid = 0.5 * (r_lo + r_hi);
                let half = 0.5 * (r_hi - r_lo);
                let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
                let mut total = 0.0;
                for (rn, rw) in rule.0.iter().zip(&rule.1) {
                    let r = mid + half * rn;
                    for t in 0..nphi {
                        let phi = dphi * (t as f64 + 0.5);
                        let (c, s) = (phi.cos(), phi.sin());
                        let mut g = |sarc: f64| -> f64 {
                            let mut x = p.to_vec();
                            x[axis] = p[axis] + sign * sarc;
                            x[taxes[0]] = p[taxes[0]] + r * c;
                            x[taxes[1]] = p[taxes[1]] + r * s;
                            f(&x, engine).unwrap_or(f64::NAN)
                        };
                        let coarse =
                            crate::quadrature::gauss::integrate_1d(&mut g, s_min, s_max, pr);
                        let tol = (1e-7 * coarse.abs()).max(0.01 * scheme.abs_tol);
                        let (line, _) =
                            crate::quadrature::gauss::adaptive_1d(&mut g, s_min, s_max, pr, tol, 6);
                        total += rw * half * r * line * dphi;
                    }
                }
                Ok(total)
            };
            let a = run(pr, nphi)?;
            let b = run(pr + 2, nphi + nphi / 2)?;
            if !b.is_finite() {
                return Err(Error::IntegrandFailure { point: p.to_vec() });
            }
            Ok((b, (a - b).abs()))
        }
        d => Err(Error::Precondition(format!(
            "curve-stratum shells support dimensions 2 and 3, got {d}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::singular::SingularSet;
    use crate::quadrature::gauss::integrate_1d;

    fn unit_square() -> BoxDomain {
        BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_on_unit_square() {
        let f = |_: &[f64]| -> Result<f64> { Ok(1.0) };
        let r = integrate(&f, &unit_square(), &SingularSet::empty(), &QuadratureScheme::default())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn smooth_gaussian_matches_separable_reference() {
        // exp(-x^2 - y^2) over [-1, 1]^2 equals the square of the 1-d integral.
        let f = |x: &[f64]| -> Result<f64> { Ok((-x[0] * x[0] - x[1] * x[1]).exp()) };
        let b = BoxDomain::centered_cube(2, 1.0);
        let r = integrate(&f, &b, &SingularSet::empty(), &QuadratureScheme::default()).unwrap();
        let mut g = |t: f64| (-t * t).exp();
        let one_d = integrate_1d(&mut g, -1.0, 1.0, 40);
        assert!((r.value - one_d * one_d).abs() < 1e-9, "{} vs {}", r.value, one_d * one_d);
        assert!(r.converged);
    }

    #[test]
    fn inverse_radius_on_disk_in_2d() {
        // |x|^(-1) restricted to the disk of radius R by a radial cutoff chi:
        // the integral is 2 pi int_0^R chi(r) dr, evaluated in 1-d.
        let eps = 0.6;
        let chi = move |rho: f64| 1.0 - smoothstep(2.0 * rho / eps - 1.0);
        let f = move |x: &[f64]| -> Result<f64> {
            let r = norm(x);
            if r == 0.0 {
                return Ok(0.0);
            }
            Ok(chi(r) / r)
        };
        let b = BoxDomain::centered_cube(2, 1.0);
        let singular = SingularSet::point(vec![0.0, 0.0], 0.3);
        let r = integrate(&f, &b, &singular, &QuadratureScheme::default()).unwrap();
        let mut g = |rho: f64| chi(rho);
        let want = 2.0 * std::f64::consts::PI * integrate_1d(&mut g, 0.0, eps, 60);
        assert!(
            (r.value - want).abs() < 1e-6 * want,
            "{} vs {want}",
            r.value
        );
        assert!(r.converged);
        // Shell sums decay geometrically for an integrable singularity.
        let sums = &r.shells[0].sums;
        assert!(sums[sums.len() - 1].abs() < 1e-3 * sums[0].abs());
    }

    #[test]
    fn borderline_nonintegrable_flagged_unconverged() {
        // |x|^(-2) in 2d: every shell carries the same mass.
        let f = |x: &[f64]| -> Result<f64> {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Ok(1.0 / r2.max(1e-300))
        };
        let b = BoxDomain::centered_cube(2, 1.0);
        let singular = SingularSet::point(vec![0.0, 0.0], 0.3);
        let r = integrate(&f, &b, &singular, &QuadratureScheme::default()).unwrap();
        assert!(!r.converged);
        // Interior shells (the outermost is attenuated by the partition
        // window) each carry the same mass 2 pi ln 2.
        let sums = &r.shells[0].sums;
        let last = sums[sums.len() - 1];
        assert!((last / sums[2] - 1.0).abs() < 0.05, "shell ratio {}", last / sums[2]);
        let want = 2.0 * std::f64::consts::PI * 2.0f64.ln();
        assert!((last - want).abs() < 1e-6 * want, "shell mass {last} vs {want}");
    }

    #[test]
    fn nan_integrand_reports_failure_point() {
        let f = |x: &[f64]| -> Result<f64> {
            if x[0] > 0.5 {
                Ok(f64::NAN)
            } else {
                Ok(1.0)
            }
        };
        let err = integrate(&f, &unit_square(), &SingularSet::empty(), &QuadratureScheme::default());
        assert!(matches!(err, Err(Error::IntegrandFailure { .. })));
    }

    #[test]
    fn refinement_error_nonincreasing_in_depth() {
        let f = |x: &[f64]| -> Result<f64> {
            let r = norm(x);
            Ok(if r == 0.0 { 0.0 } else { 1.0 / r.sqrt() })
        };
        let b = BoxDomain::centered_cube(2, 1.0);
        let singular = SingularSet::point(vec![0.0, 0.0], 0.3);
        let mut prev = f64::INFINITY;
        for depth in [4usize, 8, 16, 30] {
            let scheme = QuadratureScheme { max_depth: depth, ..Default::default() };
            let r = integrate(&f, &b, &singular, &scheme).unwrap();
            assert!(
                r.error <= prev * (1.0 + 1e-9) + 1e-15,
                "error grew: {} after {}",
                r.error,
                prev
            );
            prev = r.error;
        }
    }

    #[test]
    fn hyperplane_slab_shells_converge() {
        // Bounded integrand with a kink across {x0 = 0}.
        let f = |x: &[f64]| -> Result<f64> { Ok((-x[0].abs()).exp()) };
        let b = BoxDomain::centered_cube(2, 1.0);
        let singular = SingularSet {
            strata: vec![Stratum::HyperplanePiece { axis: 0, value: 0.0, exclusion: 0.2 }],
        };
        let r = integrate(&f, &b, &singular, &QuadratureScheme::default()).unwrap();
        let want = 2.0 * 2.0 * (1.0 - (-1.0f64).exp());
        assert!((r.value - want).abs() < 1e-6 * want, "{} vs {want}", r.value);
        assert!(r.converged);
    }

    #[test]
    fn tube_shells_in_3d_around_axis_segment() {
        // 1/rho around the x0-axis is integrable in 3d: integral over the
        // cylinder rho < chi-support equals len * 2 pi int chi dr.
        let eps = 0.5;
        let chi = move |rho: f64| 1.0 - smoothstep(2.0 * rho / eps - 1.0);
        let f = move |x: &[f64]| -> Result<f64> {
            let rho = (x[1] * x[1] + x[2] * x[2]).sqrt();
            if rho == 0.0 {
                return Ok(0.0);
            }
            Ok(chi(rho) / rho)
        };
        let b = BoxDomain::new(vec![-1.0, -1.0, -1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let singular = SingularSet {
            strata: vec![Stratum::Curve {
                vertices: vec![vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
                exclusion: 0.25,
            }],
        };
        let r = integrate(&f, &b, &singular, &QuadratureScheme::default()).unwrap();
        let mut g = |rho: f64| chi(rho);
        let want = 2.0 * 2.0 * std::f64::consts::PI * integrate_1d(&mut g, 0.0, eps, 60);
        assert!((r.value - want).abs() < 1e-5 * want, "{} vs {want}", r.value);
    }
}
