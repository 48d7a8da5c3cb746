//! Lipschitz vector-valued half-density test fields in the fixed coordinate
//! trivialization, and their covariant derivatives.
//!
//! Coefficients `v^i(x)` are stored against `sqrt(dx^1...dx^n)`, so the
//! product of two fields is a plain integrand. The covariant derivative of
//! the coefficients is
//! `D_i v^j = d_i v^j + sum_k G^j_ki v^k - 1/2 (sum_k G^k_ki) v^j`,
//! whose trace correction is specific to the half-density weight.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::chart::{BoxDomain, Chart};
use crate::geometry::christoffel::ChristoffelField;
use crate::linalg::{dist, Mat, Tensor3};
use crate::rng::SplitMix64;

pub type CoeffFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type CoeffJacFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;

#[derive(Clone)]
pub struct HalfDensityField {
    pub chart: Chart,
    coeffs: CoeffFn,
    /// `d.get(i, j) = d_i v^j`, when analytic.
    d_coeffs: Option<CoeffJacFn>,
    pub support: BoxDomain,
    pub lipschitz: f64,
    pub compact: bool,
    pub fd_step: f64,
}

impl HalfDensityField {
    pub fn new(chart: Chart, coeffs: CoeffFn, support: BoxDomain) -> Self {
        let fd_step = 1e-6 * support.diagonal();
        HalfDensityField {
            chart,
            coeffs,
            d_coeffs: None,
            support,
            lipschitz: 0.0,
            compact: true,
            fd_step,
        }
    }

    pub fn with_d_coeffs(mut self, d: CoeffJacFn) -> Self {
        self.d_coeffs = Some(d);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn with_compact(mut self, compact: bool) -> Self {
        self.compact = compact;
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn coeffs_at(&self, x: &[f64]) -> Vec<f64> {
        (self.coeffs)(x)
    }

    pub fn has_d_coeffs(&self) -> bool {
        self.d_coeffs.is_some()
    }

    /// Coefficient Jacobian `d_i v^j`, analytic or by central differences.
    pub fn d_coeffs_at(&self, x: &[f64]) -> Mat {
        if let Some(d) = &self.d_coeffs {
            return d(x);
        }
        let n = self.dim();
        let h = self.fd_step;
        Mat::from_fn(n, |i, j| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            ((self.coeffs)(&xp)[j] - (self.coeffs)(&xm)[j]) / (2.0 * h)
        })
    }

    /// Checks that coefficients vanish on the support-box boundary.
    pub fn validate_boundary_vanishing(&self, per_face: usize, tol: f64) -> Result<()> {
        let n = self.dim();
        for axis in 0..n {
            for side in 0..2 {
                let fixed = if side == 0 { self.support.lo[axis] } else { self.support.hi[axis] };
                let reduced: Vec<usize> = (0..n).filter(|a| *a != axis).collect();
                let mut idx = vec![0usize; reduced.len()];
                loop {
                    let mut p = vec![0.0; n];
                    p[axis] = fixed;
                    for (slot, a) in reduced.iter().enumerate() {
                        let t = (idx[slot] as f64 + 0.5) / per_face as f64;
                        p[*a] = self.support.lo[*a] + t * (self.support.hi[*a] - self.support.lo[*a]);
                    }
                    let v = self.coeffs_at(&p);
                    if v.iter().any(|c| c.abs() > tol) {
                        return Err(Error::Precondition(format!(
                            "coefficients do not vanish on the support boundary at {p:?}"
                        )));
                    }
                    // Odometer increment over the face grid.
                    let mut carry = true;
                    for slot in 0..idx.len() {
                        if carry {
                            idx[slot] += 1;
                            if idx[slot] == per_face {
                                idx[slot] = 0;
                            } else {
                                carry = false;
                            }
                        }
                    }
                    if carry {
                        break;
                    }
                    if reduced.is_empty() {
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    /// Samples random point pairs and checks the declared Lipschitz bound.
    pub fn validate_lipschitz(&self, pairs: usize, seed: u64, slack: f64) -> Result<()> {
        let mut rng = SplitMix64::new(seed);
        for _ in 0..pairs {
            let x = rng.point_in(&self.support.lo, &self.support.hi);
            let y = rng.point_in(&self.support.lo, &self.support.hi);
            let vx = self.coeffs_at(&x);
            let vy = self.coeffs_at(&y);
            let dv = dist(&vx, &vy);
            let dx = dist(&x, &y);
            if dv > self.lipschitz * dx * (1.0 + slack) + 1e-12 {
                return Err(Error::Precondition(format!(
                    "Lipschitz bound {} violated: |dv| = {dv:.3e} over |dx| = {dx:.3e}",
                    self.lipschitz
                )));
            }
        }
        Ok(())
    }

    /// `a * self + b * other`, coefficientwise.
    pub fn linear_combination(a: f64, f1: &HalfDensityField, b: f64, f2: &HalfDensityField) -> Result<HalfDensityField> {
        if !f1.chart.compatible_with(&f2.chart) {
            return Err(Error::ChartMismatch("fields live on different charts".into()));
        }
        let support = BoxDomain::new(
            f1.support.lo.iter().zip(&f2.support.lo).map(|(p, q)| p.min(*q)).collect(),
            f1.support.hi.iter().zip(&f2.support.hi).map(|(p, q)| p.max(*q)).collect(),
        )?;
        let (c1, c2) = (f1.coeffs.clone(), f2.coeffs.clone());
        let coeffs: CoeffFn = Arc::new(move |x: &[f64]| {
            c1(x).iter().zip(c2(x).iter()).map(|(p, q)| a * p + b * q).collect()
        });
        let d_coeffs: Option<CoeffJacFn> = match (&f1.d_coeffs, &f2.d_coeffs) {
            (Some(d1), Some(d2)) => {
                let (d1, d2) = (d1.clone(), d2.clone());
                Some(Arc::new(move |x: &[f64]| d1(x).scaled(a).add(&d2(x).scaled(b))))
            }
            _ => None,
        };
        let mut out = HalfDensityField::new(f1.chart.clone(), coeffs, support)
            .with_lipschitz(a.abs() * f1.lipschitz + b.abs() * f2.lipschitz)
            .with_compact(f1.compact && f2.compact);
        out.d_coeffs = d_coeffs;
        Ok(out)
    }
}

/// `D_i v^j` at `x` as an `n x n` matrix with the differentiation index `i`
/// as the row.
pub fn covariant_matrix(gamma: &Tensor3, v: &[f64], dv: &Mat) -> Mat {
    let n = gamma.dim();
    let traces: Vec<f64> = (0..n).map(|i| gamma.contracted_trace(i)).collect();
    Mat::from_fn(n, |i, j| {
        let mut s = dv.get(i, j);
        for k in 0..n {
            s += gamma.get(j, k, i) * v[k];
        }
        s - 0.5 * traces[i] * v[j]
    })
}

/// Covariant derivative of a half-density field against a Christoffel field.
pub fn half_density_covariant_derivative(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    x: &[f64],
) -> Result<Mat> {
    if gamma.dim() != v.dim() {
        return Err(Error::ChartMismatch("field and connection dimensions differ".into()));
    }
    let g = gamma.eval(x)?;
    Ok(covariant_matrix(&g, &v.coeffs_at(x), &v.d_coeffs_at(x)))
}

// ---------------------------------------------------------------------------
// Built-in field families.
// ---------------------------------------------------------------------------

/// Quintic smoothstep `u^3 (10 - 15 u + 6 u^2)` clamped to `[0, 1]`.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Derivative of the quintic smoothstep (zero outside `[0, 1]`).
pub fn smoothstep_deriv(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

/// One-axis plateau profile: 0 outside `[lo, hi]`, 1 on `[lo+rise, hi-rise]`.
fn plateau1(x: f64, lo: f64, hi: f64, rise: f64) -> (f64, f64) {
    if x <= lo || x >= hi {
        (0.0, 0.0)
    } else if x < lo + rise {
        let u = (x - lo) / rise;
        (smoothstep(u), smoothstep_deriv(u) / rise)
    } else if x > hi - rise {
        let u = (hi - x) / rise;
        (smoothstep(u), -smoothstep_deriv(u) / rise)
    } else {
        (1.0, 0.0)
    }
}

/// Coefficient part of a plateau field: constant or coordinate-linear.
#[derive(Clone, Debug)]
pub enum CoeffSpec {
    Constant(Vec<f64>),
    /// `v^j(x) = c[j] + sum_r a[j][r] x^r` before the bump factor.
    Linear { c: Vec<f64>, a: Mat },
}

impl CoeffSpec {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CoeffSpec::Constant(c) => c.clone(),
            CoeffSpec::Linear { c, a } => {
                (0..c.len())
                    .map(|j| c[j] + (0..x.len()).map(|r| a.get(j, r) * x[r]).sum::<f64>())
                    .collect()
            }
        }
    }

    fn deriv(&self, j: usize, i: usize) -> f64 {
        match self {
            CoeffSpec::Constant(_) => 0.0,
            CoeffSpec::Linear { a, .. } => a.get(j, i),
        }
    }

    fn sup_on(&self, b: &BoxDomain) -> f64 {
        match self {
            CoeffSpec::Constant(c) => c.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            CoeffSpec::Linear { c, a } => {
                let corner_max = b
                    .lo
                    .iter()
                    .zip(&b.hi)
                    .map(|(l, h)| l.abs().max(h.abs()))
                    .collect::<Vec<_>>();
                (0..c.len())
                    .map(|j| {
                        c[j].abs()
                            + (0..b.dim()).map(|r| a.get(j, r).abs() * corner_max[r]).sum::<f64>()
                    })
                    .fold(0.0f64, |m, v| m.max(v))
            }
        }
    }
}

/// Tensor-product plateau bump times a constant or linear coefficient
/// vector. Value 1 on the inner box, 0 outside the support box, quintic
/// smoothstep rises of width `rise_frac x` side length.
pub fn plateau_field(chart: &Chart, support: BoxDomain, rise_frac: f64, coeff: CoeffSpec) -> HalfDensityField {
    let n = chart.dim;
    let rises: Vec<f64> = support
        .lo
        .iter()
        .zip(&support.hi)
        .map(|(l, h)| rise_frac * (h - l))
        .collect();
    let sup_coeff = coeff.sup_on(&support);
    let min_rise = rises.iter().cloned().fold(f64::INFINITY, f64::min);
    let lip = match &coeff {
        CoeffSpec::Constant(_) => 1.875 / min_rise * sup_coeff,
        CoeffSpec::Linear { a, .. } => 1.875 / min_rise * sup_coeff + a.max_abs() * n as f64,
    };
    let (slo, shi, r2) = (support.lo.clone(), support.hi.clone(), rises.clone());
    let cf = coeff.clone();
    let coeffs: CoeffFn = Arc::new(move |x: &[f64]| {
        let mut bump = 1.0;
        for i in 0..n {
            bump *= plateau1(x[i], slo[i], shi[i], r2[i]).0;
            if bump == 0.0 {
                return vec![0.0; n];
            }
        }
        cf.eval(x).iter().map(|v| bump * v).collect()
    });
    let (dlo, dhi, dr) = (support.lo.clone(), support.hi.clone(), rises);
    let dcf = coeff.clone();
    let d_coeffs: CoeffJacFn = Arc::new(move |x: &[f64]| {
        let profiles: Vec<(f64, f64)> =
            (0..n).map(|i| plateau1(x[i], dlo[i], dhi[i], dr[i])).collect();
        let bump: f64 = profiles.iter().map(|p| p.0).product();
        let vals = dcf.eval(x);
        Mat::from_fn(n, |i, j| {
            // d_i (bump * v_j) = (d_i bump) v_j + bump * d_i v_j.
            let mut dbump = profiles[i].1;
            for (k, p) in profiles.iter().enumerate() {
                if k != i {
                    dbump *= p.0;
                }
            }
            dbump * vals[j] + bump * dcf.deriv(j, i)
        })
    });
    HalfDensityField::new(chart.clone(), coeffs, support)
        .with_d_coeffs(d_coeffs)
        .with_lipschitz(lip)
}

/// Radial cutoff at scale `eps`: coefficients `chi(|x - center|) * dir`,
/// equal to `dir` for `|x - center| <= eps/2` and zero outside `eps`.
pub fn radial_cutoff_field(chart: &Chart, center: Vec<f64>, eps: f64, dir: Vec<f64>) -> HalfDensityField {
    let n = chart.dim;
    let support = BoxDomain::new(
        center.iter().map(|c| c - eps).collect(),
        center.iter().map(|c| c + eps).collect(),
    )
    .expect("positive cutoff scale");
    let dir_norm = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (c1, d1) = (center.clone(), dir.clone());
    let coeffs: CoeffFn = Arc::new(move |x: &[f64]| {
        let rho = dist(x, &c1);
        let chi = 1.0 - smoothstep(2.0 * rho / eps - 1.0);
        d1.iter().map(|v| chi * v).collect()
    });
    let (c2, d2) = (center, dir);
    let d_coeffs: CoeffJacFn = Arc::new(move |x: &[f64]| {
        let rho = dist(x, &c2);
        if rho <= 0.5 * eps || rho >= eps {
            return Mat::zeros(n);
        }
        let u = 2.0 * rho / eps - 1.0;
        let dchi = -smoothstep_deriv(u) * 2.0 / eps;
        Mat::from_fn(n, |i, j| dchi * (x[i] - c2[i]) / rho * d2[j])
    });
    HalfDensityField::new(chart.clone(), coeffs, support)
        .with_d_coeffs(d_coeffs)
        .with_lipschitz(1.875 * 2.0 / eps * dir_norm)
}

/// Tube cutoff around an axis-aligned line: a radial cutoff at scale `eps`
/// in the transverse coordinates times a plateau window along `along_axis`.
pub fn tube_cutoff_field(
    chart: &Chart,
    along_axis: usize,
    transverse_center: Vec<f64>,
    eps: f64,
    window: (f64, f64),
    window_rise: f64,
    dir: Vec<f64>,
) -> HalfDensityField {
    let n = chart.dim;
    assert_eq!(transverse_center.len(), n - 1);
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let mut slot = 0;
    for axis in 0..n {
        if axis == along_axis {
            lo[axis] = window.0;
            hi[axis] = window.1;
        } else {
            lo[axis] = transverse_center[slot] - eps;
            hi[axis] = transverse_center[slot] + eps;
            slot += 1;
        }
    }
    let support = BoxDomain::new(lo, hi).expect("tube window must have positive volume");
    let dir_norm = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tc = transverse_center.clone();
    let transverse_rho = move |x: &[f64]| -> f64 {
        let mut s = 0.0;
        let mut slot = 0;
        for axis in 0..x.len() {
            if axis != along_axis {
                let d = x[axis] - tc[slot];
                s += d * d;
                slot += 1;
            }
        }
        s.sqrt()
    };
    let rho1 = transverse_rho.clone();
    let d1 = dir.clone();
    let coeffs: CoeffFn = Arc::new(move |x: &[f64]| {
        let chi = 1.0 - smoothstep(2.0 * rho1(x) / eps - 1.0);
        let (w, _) = plateau1(x[along_axis], window.0, window.1, window_rise);
        d1.iter().map(|v| chi * w * v).collect()
    });
    let rho2 = transverse_rho;
    let tc2 = transverse_center;
    let d2 = dir;
    let d_coeffs: CoeffJacFn = Arc::new(move |x: &[f64]| {
        let rho = rho2(x);
        let u = 2.0 * rho / eps - 1.0;
        let chi = 1.0 - smoothstep(u);
        let dchi_drho = if rho <= 0.5 * eps || rho >= eps {
            0.0
        } else {
            -smoothstep_deriv(u) * 2.0 / eps
        };
        let (w, dw) = plateau1(x[along_axis], window.0, window.1, window_rise);
        Mat::from_fn(x.len(), |i, j| {
            if i == along_axis {
                dw * chi * d2[j]
            } else {
                let slot = if i < along_axis { i } else { i - 1 };
                let drho_di = if rho > 0.0 { (x[i] - tc2[slot]) / rho } else { 0.0 };
                dchi_drho * drho_di * w * d2[j]
            }
        })
    });
    HalfDensityField::new(chart.clone(), coeffs, support)
        .with_d_coeffs(d_coeffs)
        .with_lipschitz((1.875 * 2.0 / eps + 1.875 / window_rise) * dir_norm)
}

/// The three rotation generators of the round sphere in the stereographic
/// chart, as vector-valued half-densities in the coordinate trivialization:
/// coefficients `u^i = 2 r0 K^i / (1 + |x|^2)` where `K` pushes forward the
/// ambient rotation. They satisfy the Killing equation exactly and decay at
/// the chart boundary but are not compactly supported.
pub fn sphere_killing_field(chart: &Chart, r0: f64, which: usize) -> HalfDensityField {
    assert!(which < 3, "three rotation generators");
    let k_fn = move |x: &[f64]| -> [f64; 2] {
        let (p, q) = (x[0], x[1]);
        match which {
            0 => [p * q, 0.5 * (1.0 - p * p + q * q)],
            1 => [0.5 * (1.0 + p * p - q * q), p * q],
            _ => [-q, p],
        }
    };
    let dk_fn = move |x: &[f64]| -> [[f64; 2]; 2] {
        // dk[i][j] = d_i K^j.
        let (p, q) = (x[0], x[1]);
        match which {
            0 => [[q, -p], [p, q]],
            1 => [[p, q], [-q, p]],
            _ => [[0.0, 1.0], [-1.0, 0.0]],
        }
    };
    let support = chart.domain.clone();
    let coeffs: CoeffFn = Arc::new(move |x: &[f64]| {
        let d = 1.0 + x[0] * x[0] + x[1] * x[1];
        let k = k_fn(x);
        vec![2.0 * r0 * k[0] / d, 2.0 * r0 * k[1] / d]
    });
    let d_coeffs: CoeffJacFn = Arc::new(move |x: &[f64]| {
        let d = 1.0 + x[0] * x[0] + x[1] * x[1];
        let k = k_fn(x);
        let dk = dk_fn(x);
        Mat::from_fn(2, |i, j| 2.0 * r0 * (dk[i][j] * d - 2.0 * x[i] * k[j]) / (d * d))
    });
    let half_width = chart.domain.hi[0];
    HalfDensityField::new(chart.clone(), coeffs, support)
        .with_d_coeffs(d_coeffs)
        .with_lipschitz(2.0 * r0 * (2.0 + 3.0 * half_width))
        .with_compact(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtins;
    use crate::geometry::christoffel::{christoffel_from_metric, DiffScheme};

    fn chart2(h: f64) -> Chart {
        Chart::new(BoxDomain::centered_cube(2, h))
    }

    #[test]
    fn plateau_is_one_inside_and_zero_outside() {
        let chart = chart2(1.0);
        let f = plateau_field(
            &chart,
            BoxDomain::centered_cube(2, 0.8),
            0.25,
            CoeffSpec::Constant(vec![1.0, 0.0]),
        );
        assert_eq!(f.coeffs_at(&[0.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(f.coeffs_at(&[0.85, 0.0]), vec![0.0, 0.0]);
        f.validate_boundary_vanishing(4, 1e-12).unwrap();
        f.validate_lipschitz(300, 11, 0.05).unwrap();
    }

    #[test]
    fn plateau_analytic_jacobian_matches_fd() {
        let chart = chart2(1.0);
        let f = plateau_field(
            &chart,
            BoxDomain::centered_cube(2, 0.8),
            0.25,
            CoeffSpec::Linear {
                c: vec![0.5, -0.2],
                a: Mat::from_fn(2, |i, j| 0.3 * (i as f64 + 1.0) - 0.2 * j as f64),
            },
        );
        let mut bare = f.clone();
        bare.d_coeffs = None;
        for p in [[0.1, 0.2], [0.55, -0.62], [-0.7, 0.71]] {
            let a = f.d_coeffs_at(&p);
            let b = bare.d_coeffs_at(&p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (a.get(i, j) - b.get(i, j)).abs() < 1e-6,
                        "mismatch at {p:?}: {} vs {}",
                        a.get(i, j),
                        b.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn covariant_derivative_flat_cases() {
        let g = builtins::flat(2, 1.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        // Constant coefficients, flat connection: zero matrix.
        let f = plateau_field(
            &g.chart,
            BoxDomain::centered_cube(2, 0.9),
            0.25,
            CoeffSpec::Constant(vec![1.0, 2.0]),
        );
        let m = half_density_covariant_derivative(&gamma, &f, &[0.1, 0.0]).unwrap();
        assert!(m.max_abs() < 1e-12);
        // Coordinate-linear coefficients v^j = x^j: identity matrix.
        let lin = plateau_field(
            &g.chart,
            BoxDomain::centered_cube(2, 0.9),
            0.25,
            CoeffSpec::Linear { c: vec![0.0, 0.0], a: Mat::identity(2) },
        );
        let m = half_density_covariant_derivative(&gamma, &lin, &[0.05, -0.1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariant_derivative_cone_spot_check() {
        // Cone alpha = 0.5 at x = (1, 0): dphi = (-0.5, 0); for constant
        // coefficients (1, 0) the matrix is [[0, 0], [0, -0.5]].
        let g = builtins::cone(2, 0.5, 2.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let f = plateau_field(
            &g.chart,
            BoxDomain::new(vec![0.5, -0.5], vec![1.5, 0.5]).unwrap(),
            0.2,
            CoeffSpec::Constant(vec![1.0, 0.0]),
        );
        let m = half_density_covariant_derivative(&gamma, &f, &[1.0, 0.0]).unwrap();
        assert!(m.get(0, 0).abs() < 1e-12);
        assert!(m.get(0, 1).abs() < 1e-12);
        assert!(m.get(1, 0).abs() < 1e-12);
        assert!((m.get(1, 1) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn cone_covariant_derivative_matches_conformal_closed_form() {
        // D_1 v^1 = d_1 v^1 + (d_2 phi) v^2, etc., for conformal surfaces.
        let g = builtins::cone(2, 0.7, 2.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let f = plateau_field(
            &g.chart,
            BoxDomain::new(vec![0.2, -0.9], vec![1.8, 0.9]).unwrap(),
            0.2,
            CoeffSpec::Linear { c: vec![0.3, -0.8], a: Mat::from_fn(2, |i, j| 0.2 * (i + j) as f64) },
        );
        let x = [0.9, -0.2];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let dphi = [-0.7 * x[0] / r2, -0.7 * x[1] / r2];
        let v = f.coeffs_at(&x);
        let dv = f.d_coeffs_at(&x);
        let m = half_density_covariant_derivative(&gamma, &f, &x).unwrap();
        let want = [
            [dv.get(0, 0) + dphi[1] * v[1], dv.get(0, 1) - dphi[1] * v[0]],
            [dv.get(1, 0) - dphi[0] * v[1], dv.get(1, 1) + dphi[0] * v[0]],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.get(i, j) - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radial_cutoff_profile() {
        let chart = chart2(1.0);
        let f = radial_cutoff_field(&chart, vec![0.0, 0.0], 0.4, vec![1.0, 0.0]);
        assert_eq!(f.coeffs_at(&[0.1, 0.0])[0], 1.0);
        assert_eq!(f.coeffs_at(&[0.5, 0.0])[0], 0.0);
        let mid = f.coeffs_at(&[0.3, 0.0])[0];
        assert!(mid > 0.0 && mid < 1.0);
        f.validate_lipschitz(200, 3, 0.05).unwrap();
    }

    #[test]
    fn killing_fields_satisfy_killing_equation_pointwise() {
        let g = builtins::sphere_chart(1.5, 3.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        for which in 0..3 {
            let v = sphere_killing_field(&g.chart, 1.5, which);
            for p in g.chart.domain.interior_grid(4) {
                let d = half_density_covariant_derivative(&gamma, &v, &p).unwrap();
                let gm = g.eval(&p);
                let mut worst = 0.0f64;
                for i in 0..2 {
                    for j in 0..2 {
                        let mut s = 0.0;
                        for k in 0..2 {
                            s += gm.get(j, k) * d.get(i, k) + gm.get(i, k) * d.get(j, k);
                        }
                        worst = worst.max(s.abs());
                    }
                }
                assert!(worst < 1e-12, "generator {which} defect {worst} at {p:?}");
            }
        }
    }

    #[test]
    fn linear_combination_adds_coefficients() {
        let chart = chart2(1.0);
        let f1 = plateau_field(
            &chart,
            BoxDomain::centered_cube(2, 0.8),
            0.25,
            CoeffSpec::Constant(vec![1.0, 0.0]),
        );
        let f2 = plateau_field(
            &chart,
            BoxDomain::centered_cube(2, 0.6),
            0.25,
            CoeffSpec::Constant(vec![0.0, 1.0]),
        );
        let f = HalfDensityField::linear_combination(2.0, &f1, -1.0, &f2).unwrap();
        let v = f.coeffs_at(&[0.0, 0.0]);
        assert!((v[0] - 2.0).abs() < 1e-15);
        assert!((v[1] + 1.0).abs() < 1e-15);
    }
}
