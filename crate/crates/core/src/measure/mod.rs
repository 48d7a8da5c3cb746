//! Extraction of the curvature measure's decomposition: point atoms, curve
//! densities and the absolutely continuous part.
//!
//! Atoms are read off by pairing the form against radially shrinking
//! cutoffs with fixed coefficient directions: the absolutely continuous
//! part contributes mass that vanishes with the cutoff scale while an atom
//! contributes a constant, so the ladder of values is extrapolated
//! geometrically (`value_k = m + C * rho^k`). Curve densities use tube
//! cutoffs with a fixed along-curve window and shrinking transverse scale;
//! the absolutely continuous part is sampled by finite differences of the
//! symbols on a grid clear of the strata.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::BoxDomain;
use crate::geometry::christoffel::ChristoffelField;
use crate::geometry::half_density::{
    plateau_field, radial_cutoff_field, tube_cutoff_field, CoeffSpec, HalfDensityField,
};
use crate::geometry::metric::MetricField;
use crate::geometry::singular::Stratum;
use crate::linalg::Mat;
use crate::qform::oracle::ricci_tensor_fd;
use crate::qform::{q_value, q_value_over};
use crate::quadrature::{integrate, QuadratureScheme};
use crate::rng::SplitMix64;

/// Geometric scale ladder for localized extraction.
#[derive(Clone, Debug, Serialize)]
pub struct Ladder {
    /// Outermost cutoff scale.
    pub eps0: f64,
    /// Scale ratio between rungs, in `(0, 1)`.
    pub ratio: f64,
    pub rungs: usize,
}

impl Default for Ladder {
    fn default() -> Self {
        Ladder { eps0: 0.1, ratio: 0.5, rungs: 6 }
    }
}

impl Ladder {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.ratio > 0.0 && self.ratio < 1.0 && self.rungs >= 3) {
            return Err(Error::InvalidScheme(
                "ladder needs eps0 > 0, ratio in (0,1) and at least 3 rungs".into(),
            ));
        }
        Ok(())
    }

    pub fn scales(&self) -> Vec<f64> {
        (0..self.rungs).map(|k| self.eps0 * self.ratio.powi(k as i32)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderRung {
    pub eps: f64,
    pub value: f64,
    pub error: f64,
}

/// Extrapolated localized mass with its ladder evidence.
#[derive(Clone, Debug, Serialize)]
pub struct AtomEstimate {
    pub mass: f64,
    /// Successive extrapolants stabilized.
    pub cauchy: bool,
    pub confidence: f64,
    pub trace: Vec<LadderRung>,
}

fn extrapolate_ladder(trace: &[LadderRung]) -> AtomEstimate {
    let n = trace.len();
    let values: Vec<f64> = trace.iter().map(|r| r.value).collect();
    let quad_err: f64 = trace.iter().rev().take(2).map(|r| r.error).sum();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let last = values[n - 1];
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let flat_tol = (1e-6 * scale).max(4.0 * quad_err).max(1e-10);
    if diffs.iter().rev().take(2).all(|d| d.abs() <= flat_tol) {
        return AtomEstimate {
            mass: last,
            cauchy: true,
            confidence: diffs.last().map(|d| d.abs()).unwrap_or(0.0) + quad_err,
            trace: trace.to_vec(),
        };
    }
    // Aitken extrapolation on the trailing rungs.
    let aitken = |k: usize| -> Option<f64> {
        let (d1, d0) = (values[k] - values[k - 1], values[k - 1] - values[k - 2]);
        if d0.abs() < 1e-300 {
            return None;
        }
        let rho = d1 / d0;
        if rho.abs() >= 0.9 {
            return None;
        }
        Some(values[k] + d1 * rho / (1.0 - rho))
    };
    match (aitken(n - 1), aitken(n - 2)) {
        (Some(m), Some(m_prev)) => {
            let drift = (m - m_prev).abs();
            let cauchy = drift <= (1e-3 * m.abs()).max(1e-6).max(8.0 * quad_err);
            AtomEstimate { mass: m, cauchy, confidence: drift + quad_err, trace: trace.to_vec() }
        }
        (Some(m), None) => AtomEstimate {
            mass: m,
            cauchy: false,
            confidence: (m - last).abs() + quad_err,
            trace: trace.to_vec(),
        },
        _ => AtomEstimate {
            mass: last,
            cauchy: false,
            confidence: diffs.last().map(|d| d.abs()).unwrap_or(f64::INFINITY) + quad_err,
            trace: trace.to_vec(),
        },
    }
}

/// Atom mass entry `a . m . b` at a declared point stratum, by pairing the
/// form against radial cutoffs at the ladder scales. A non-Cauchy ladder
/// reports `cauchy = false` with its trace rather than failing.
pub fn singular_mass_at(
    gamma: &ChristoffelField,
    center: &[f64],
    dir_a: &[f64],
    dir_b: &[f64],
    ladder: &Ladder,
    scheme: &QuadratureScheme,
) -> Result<AtomEstimate> {
    ladder.validate()?;
    let chart = &gamma.chart;
    // The outer cutoff is constant over every rung support, and its box is
    // the integration domain: the stratum's shell window then covers all of
    // the shrinking cutoffs' radial structure.
    let w_eps = 2.5 * ladder.eps0;
    if !chart.domain.contains(center, 0.0) || chart.domain.boundary_distance(center) < w_eps {
        return Err(Error::Precondition(
            "ladder cutoffs would overflow the chart domain".into(),
        ));
    }
    let exclusion = gamma
        .singular
        .strata
        .iter()
        .map(|s| s.distance(center))
        .zip(gamma.singular.strata.iter().map(|s| s.exclusion()))
        .filter(|(d, _)| *d < 1e-9)
        .map(|(_, e)| e)
        .fold(f64::INFINITY, f64::min);
    if exclusion.is_finite() && ladder.eps0 > 0.5 * exclusion {
        return Err(Error::Precondition(format!(
            "outermost cutoff scale {} exceeds half the exclusion radius {exclusion}",
            ladder.eps0
        )));
    }
    let w = radial_cutoff_field(chart, center.to_vec(), w_eps, dir_b.to_vec());
    let domain = w
        .support
        .intersect(&chart.domain)
        .ok_or_else(|| Error::Precondition("cutoff support leaves the chart".into()))?;
    let mut trace = Vec::with_capacity(ladder.rungs);
    for eps in ladder.scales() {
        let v = radial_cutoff_field(chart, center.to_vec(), eps, dir_a.to_vec());
        let r = q_value_over(gamma, &v, &w, &domain, scheme)?;
        trace.push(LadderRung { eps, value: r.value, error: r.error });
    }
    Ok(extrapolate_ladder(&trace))
}

/// One sampled point of a curve-density extraction.
#[derive(Clone, Debug, Serialize)]
pub struct DensitySample {
    /// Along-curve coordinate of the sample.
    pub s: f64,
    pub point: Vec<f64>,
    /// Extrapolated density per unit coordinate length.
    pub density: f64,
    pub cauchy: bool,
    pub confidence: f64,
    pub trace: Vec<LadderRung>,
}

/// Per-length density along a curve or hyperplane stratum in the coefficient
/// pairing `a . b`, extracted with tube cutoffs at the given arclength
/// samples. The density is per unit coordinate length along the stratum.
#[allow(clippy::too_many_arguments)]
pub fn curve_density_along(
    gamma: &ChristoffelField,
    stratum: &Stratum,
    samples: &[f64],
    dir_a: &[f64],
    dir_b: &[f64],
    window: f64,
    ladder: &Ladder,
    scheme: &QuadratureScheme,
) -> Result<Vec<DensitySample>> {
    ladder.validate()?;
    let chart = &gamma.chart;
    let rise = 0.25 * window;
    // Integral of the along-curve plateau profile.
    let psi_integral = window - rise;
    let mut out = Vec::with_capacity(samples.len());
    for &s in samples {
        let (along_axis, transverse_center, anchor) = tube_frame(stratum, chart, s)?;
        let v_window = (anchor - 0.5 * window, anchor + 0.5 * window);
        let w_window = (anchor - 1.3 * window, anchor + 1.3 * window);
        let w = tube_cutoff_field(
            chart,
            along_axis,
            transverse_center.clone(),
            2.5 * ladder.eps0,
            w_window,
            0.15 * window,
            dir_b.to_vec(),
        );
        let domain = w
            .support
            .intersect(&chart.domain)
            .ok_or_else(|| Error::Precondition("tube support leaves the chart".into()))?;
        let mut trace = Vec::with_capacity(ladder.rungs);
        for eps in ladder.scales() {
            let v = tube_cutoff_field(
                chart,
                along_axis,
                transverse_center.clone(),
                eps,
                v_window,
                rise,
                dir_a.to_vec(),
            );
            let r = q_value_over(gamma, &v, &w, &domain, scheme)?;
            trace.push(LadderRung {
                eps,
                value: r.value / psi_integral,
                error: r.error / psi_integral,
            });
        }
        let est = extrapolate_ladder(&trace);
        let mut point = vec![0.0; chart.dim];
        point[along_axis] = anchor;
        let mut slot = 0;
        for axis in 0..chart.dim {
            if axis != along_axis {
                point[axis] = transverse_center[slot];
                slot += 1;
            }
        }
        out.push(DensitySample {
            s,
            point,
            density: est.mass,
            cauchy: est.cauchy,
            confidence: est.confidence,
            trace: est.trace,
        });
    }
    Ok(out)
}

/// Along-axis / transverse-center frame of an axis-aligned stratum at
/// arclength `s`.
fn tube_frame(
    stratum: &Stratum,
    chart: &crate::geometry::chart::Chart,
    s: f64,
) -> Result<(usize, Vec<f64>, f64)> {
    match stratum {
        Stratum::HyperplanePiece { axis, value, .. } => {
            if chart.dim != 2 {
                return Err(Error::Precondition(
                    "hyperplane density extraction is two-dimensional".into(),
                ));
            }
            Ok((1 - axis, vec![*value], s))
        }
        Stratum::Curve { .. } => {
            let (point, tangent) = stratum
                .curve_point_tangent(s)
                .ok_or_else(|| Error::Precondition("arclength outside the curve".into()))?;
            let along_axis = tangent
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let transverse: Vec<f64> = (0..chart.dim)
                .filter(|a| *a != along_axis)
                .map(|a| point[a])
                .collect();
            Ok((along_axis, transverse, point[along_axis]))
        }
        Stratum::Point { .. } => Err(Error::Precondition(
            "curve density extraction needs a curve or hyperplane stratum".into(),
        )),
    }
}

/// Finite-difference samples of the symmetrized curvature tensor on a grid.
/// Errors when a grid point lies inside a stratum exclusion radius.
pub fn ac_density_grid(
    gamma: &ChristoffelField,
    grid: &[Vec<f64>],
    fd_step: f64,
) -> Result<Vec<(Vec<f64>, Mat)>> {
    for p in grid {
        if gamma.singular.excludes(p) {
            return Err(Error::SingularEvaluation { point: p.clone() });
        }
    }
    grid.iter()
        .map(|p| Ok((p.clone(), ricci_tensor_fd(gamma, p, fd_step, true)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// Report assembly.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MeasureConfig {
    pub ladder: Ladder,
    pub scheme: QuadratureScheme,
    /// Grid resolution per axis for the absolutely continuous part.
    pub grid_per_axis: usize,
    pub fd_step: f64,
    pub curve_samples: usize,
    pub curve_window: f64,
    pub pairing_seed: u64,
    pub pairing_pairs: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            ladder: Ladder::default(),
            scheme: QuadratureScheme::default(),
            grid_per_axis: 6,
            fd_step: 1e-4,
            curve_samples: 5,
            curve_window: 0.4,
            pairing_seed: 7,
            pairing_pairs: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomReport {
    pub stratum: usize,
    pub point: Vec<f64>,
    /// Symmetric mass matrix entries `m[i][j]` in coordinate directions.
    pub mass: Vec<Vec<f64>>,
    pub confidence: Vec<Vec<f64>>,
    pub cauchy: bool,
    pub traces: Vec<(usize, usize, Vec<LadderRung>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveSampleReport {
    pub s: f64,
    pub point: Vec<f64>,
    /// Density matrix in coordinate directions, per unit coordinate length.
    pub density: Vec<Vec<f64>>,
    /// Intrinsic per-unit-length density in the unit tangential direction,
    /// when a background metric is available.
    pub tangential_intrinsic: Option<f64>,
    pub normal_intrinsic: Option<f64>,
    pub cauchy: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveReport {
    pub stratum: usize,
    pub samples: Vec<CurveSampleReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AcGridReport {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingCheck {
    pub q_value: f64,
    pub paired: f64,
    pub residual: f64,
    pub scale: f64,
    /// Residual tolerance: two percent of the scale with a quadrature-noise
    /// floor (all-zero scenarios have nothing to be relative to).
    pub tolerance: f64,
}

impl PairingCheck {
    pub fn passes(&self) -> bool {
        self.residual <= self.tolerance
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub atoms: Vec<AtomReport>,
    pub curves: Vec<CurveReport>,
    pub ac: AcGridReport,
    pub pairing: Vec<PairingCheck>,
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
}

/// Assembles the full decomposition: atom matrices at point strata (all
/// direction pairs), density matrices along curve strata, the absolutely
/// continuous part on a grid, and seeded random pairing cross-checks
/// `Q(V, W) ~ <report, (V, W)>`.
pub fn assemble_measure_report(
    gamma: &ChristoffelField,
    background: Option<&MetricField>,
    config: &MeasureConfig,
) -> Result<MeasureReport> {
    let n = gamma.dim();
    let chart = &gamma.chart;

    let mut atoms = Vec::new();
    let mut curves = Vec::new();
    for (idx, stratum) in gamma.singular.strata.iter().enumerate() {
        match stratum {
            Stratum::Point { at, .. } => {
                let mut mass = Mat::zeros(n);
                let mut conf = Mat::zeros(n);
                let mut cauchy = true;
                let mut traces = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        let e_i = unit(n, i);
                        let e_j = unit(n, j);
                        let est = singular_mass_at(
                            gamma,
                            at,
                            &e_i,
                            &e_j,
                            &config.ladder,
                            &config.scheme,
                        )?;
                        mass.set(i, j, est.mass);
                        mass.set(j, i, est.mass);
                        conf.set(i, j, est.confidence);
                        conf.set(j, i, est.confidence);
                        cauchy &= est.cauchy;
                        traces.push((i, j, est.trace));
                    }
                }
                atoms.push(AtomReport {
                    stratum: idx,
                    point: at.clone(),
                    mass: mat_to_rows(&mass),
                    confidence: mat_to_rows(&conf),
                    cauchy,
                    traces,
                });
            }
            Stratum::Curve { .. } | Stratum::HyperplanePiece { .. } => {
                let samples = curve_sample_positions(stratum, chart, config)?;
                let mut reports: Vec<CurveSampleReport> = Vec::new();
                for &s in &samples {
                    let mut density = Mat::zeros(n);
                    let mut cauchy = true;
                    for i in 0..n {
                        for j in i..n {
                            let e_i = unit(n, i);
                            let e_j = unit(n, j);
                            let d = curve_density_along(
                                gamma,
                                stratum,
                                &[s],
                                &e_i,
                                &e_j,
                                config.curve_window,
                                &config.ladder,
                                &config.scheme,
                            )?;
                            density.set(i, j, d[0].density);
                            density.set(j, i, d[0].density);
                            cauchy &= d[0].cauchy;
                        }
                    }
                    let (point, tangent) = stratum_point_tangent(stratum, chart, s)?;
                    let (tan_i, nor_i) = intrinsic_densities(&density, &point, &tangent, background);
                    reports.push(CurveSampleReport {
                        s,
                        point,
                        density: mat_to_rows(&density),
                        tangential_intrinsic: tan_i,
                        normal_intrinsic: nor_i,
                        cauchy,
                    });
                }
                curves.push(CurveReport { stratum: idx, samples: reports });
            }
        }
    }

    // Absolutely continuous part on an interior grid clear of the strata.
    let mut grid: Vec<Vec<f64>> = Vec::new();
    for p in chart.domain.shrunk(0.08).interior_grid(config.grid_per_axis) {
        let clear = gamma
            .singular
            .strata
            .iter()
            .all(|s| s.distance(&p) > s.exclusion().max(8.0 * config.fd_step));
        if clear {
            grid.push(p);
        }
    }
    let ac_values = ac_density_grid(gamma, &grid, config.fd_step)?;
    let ac = AcGridReport {
        points: grid.clone(),
        values: ac_values.iter().map(|(_, m)| mat_to_rows(m)).collect(),
    };

    // Pairing cross-checks with seeded random plateau fields.
    let mut pairing = Vec::new();
    let mut rng = SplitMix64::new(config.pairing_seed);
    let tv_proxy = total_variation_proxy(&atoms, &curves, &ac_values, &chart.domain);
    for _ in 0..config.pairing_pairs {
        let v = random_plateau(chart, &mut rng);
        let w = random_plateau(chart, &mut rng);
        let q = q_value(gamma, &v, &w, &config.scheme)?;
        let paired = pair_report_against(gamma, &atoms, &curves, &v, &w, config)?;
        let scale = q.value.abs() + tv_proxy;
        pairing.push(PairingCheck {
            q_value: q.value,
            paired,
            residual: (q.value - paired).abs(),
            scale,
            tolerance: (0.02 * scale).max(1e-4),
        });
    }

    Ok(MeasureReport { atoms, curves, ac, pairing })
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn curve_sample_positions(
    stratum: &Stratum,
    chart: &crate::geometry::chart::Chart,
    config: &MeasureConfig,
) -> Result<Vec<f64>> {
    let margin = 1.5 * config.curve_window;
    match stratum {
        Stratum::HyperplanePiece { axis, .. } => {
            let other = 1 - axis;
            let (lo, hi) = (chart.domain.lo[other] + margin, chart.domain.hi[other] - margin);
            Ok(linspace(lo, hi, config.curve_samples))
        }
        Stratum::Curve { .. } => {
            let len = stratum.curve_length().unwrap();
            Ok(linspace(margin, len - margin, config.curve_samples))
        }
        Stratum::Point { .. } => Err(Error::Precondition("not a curve stratum".into())),
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn stratum_point_tangent(
    stratum: &Stratum,
    chart: &crate::geometry::chart::Chart,
    s: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match stratum {
        Stratum::HyperplanePiece { axis, value, .. } => {
            let other = 1 - axis;
            let mut p = vec![0.0; chart.dim];
            p[*axis] = *value;
            p[other] = s;
            let mut t = vec![0.0; chart.dim];
            t[other] = 1.0;
            Ok((p, t))
        }
        Stratum::Curve { .. } => stratum
            .curve_point_tangent(s)
            .ok_or_else(|| Error::Precondition("arclength outside the curve".into())),
        Stratum::Point { .. } => Err(Error::Precondition("not a curve stratum".into())),
    }
}

/// Converts a coordinate density matrix to intrinsic per-unit-length values
/// in the unit tangential and normal directions of the background metric:
/// the coordinate pairing rescales by `g(a, a)` for a coordinate direction
/// `a`, and the per-coordinate-length rate picks up the arclength factor
/// `sqrt(g(t, t))`.
fn intrinsic_densities(
    density: &Mat,
    point: &[f64],
    tangent: &[f64],
    background: Option<&MetricField>,
) -> (Option<f64>, Option<f64>) {
    let tan_coord = density.pair(tangent, tangent);
    let normals: Vec<Vec<f64>> = orthonormal_complement(tangent);
    let nor_coord =
        normals.iter().map(|nv| density.pair(nv, nv)).sum::<f64>() / normals.len() as f64;
    match background {
        None => (Some(tan_coord), Some(nor_coord)),
        Some(g) => {
            let gm = g.eval(point);
            let g_tan = gm.pair(tangent, tangent);
            if g_tan <= 0.0 {
                return (None, None);
            }
            let arclength = g_tan.sqrt();
            let tan = tan_coord * arclength / g_tan;
            let nor = normals
                .iter()
                .map(|nv| density.pair(nv, nv) * arclength / gm.pair(nv, nv))
                .sum::<f64>()
                / normals.len() as f64;
            (Some(tan), Some(nor))
        }
    }
}

fn orthonormal_complement(tangent: &[f64]) -> Vec<Vec<f64>> {
    // Axis-aligned tangents in the built-ins: the complement is the other
    // coordinate axes.
    let axis = tangent
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    (0..tangent.len())
        .filter(|i| *i != axis)
        .map(|i| unit(tangent.len(), i))
        .collect()
}

fn random_plateau(chart: &crate::geometry::chart::Chart, rng: &mut SplitMix64) -> HalfDensityField {
    let n = chart.dim;
    let dom = &chart.domain;
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for a in 0..n {
        let width = dom.hi[a] - dom.lo[a];
        let l = dom.lo[a] + width * rng.uniform(0.02, 0.2);
        let h = dom.hi[a] - width * rng.uniform(0.02, 0.2);
        lo.push(l);
        hi.push(h);
    }
    let dirs: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    plateau_field(chart, BoxDomain::new(lo, hi).unwrap(), 0.25, CoeffSpec::Constant(dirs))
}

/// Pairs a report against a test pair: atoms at their points, curve
/// densities integrated along the strata (piecewise linear in the samples),
/// and the absolutely continuous part integrated by finite differences with
/// a small mask around the strata.
fn pair_report_against(
    gamma: &ChristoffelField,
    atoms: &[AtomReport],
    curves: &[CurveReport],
    v: &HalfDensityField,
    w: &HalfDensityField,
    config: &MeasureConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for atom in atoms {
        let vx = v.coeffs_at(&atom.point);
        let wx = w.coeffs_at(&atom.point);
        for (i, row) in atom.mass.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                total += vx[i] * m * wx[j];
            }
        }
    }
    for curve in curves {
        if curve.samples.len() < 2 {
            continue;
        }
        let stratum = &gamma.singular.strata[curve.stratum];
        let samples = &curve.samples;
        // Positions come from the stratum geometry; the sampled density is
        // interpolated linearly and clamp-extended beyond the sample range.
        let mut g = |s: f64| -> f64 {
            let p = match stratum_point_tangent(stratum, &gamma.chart, s) {
                Ok((p, _)) => p,
                Err(_) => return 0.0,
            };
            let d = interp_density(samples, s);
            let vx = v.coeffs_at(&p);
            let wx = w.coeffs_at(&p);
            let n = vx.len();
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += vx[i] * d[i][j] * wx[j];
                }
            }
            acc
        };
        // Full stratum span inside the chart box.
        let (s_lo, s_hi) = match stratum {
            Stratum::HyperplanePiece { axis, .. } => {
                let other = 1 - axis;
                (gamma.chart.domain.lo[other], gamma.chart.domain.hi[other])
            }
            Stratum::Curve { .. } => (0.0, stratum.curve_length().unwrap()),
            Stratum::Point { .. } => continue,
        };
        let (val, _err) = crate::quadrature::adaptive_1d(&mut g, s_lo, s_hi, 8, 1e-10, 10);
        total += val;
    }
    // Absolutely continuous remainder, masked just around the strata where
    // the finite-difference stencil would fail.
    let mask = 8.0 * config.fd_step;
    let domain = match v
        .support
        .intersect(&w.support)
        .and_then(|b| b.intersect(&gamma.chart.domain))
    {
        Some(b) => b,
        None => return Ok(total),
    };
    let f = |x: &[f64]| -> Result<f64> {
        if gamma.singular.distance(x) < mask {
            return Ok(0.0);
        }
        let r = ricci_tensor_fd(gamma, x, config.fd_step, false)?;
        Ok(r.pair(&v.coeffs_at(x), &w.coeffs_at(x)))
    };
    let ac = integrate(&f, &domain, &gamma.singular, &config.scheme)?;
    Ok(total + ac.value)
}

fn interp_density(samples: &[CurveSampleReport], s: f64) -> Vec<Vec<f64>> {
    let k = samples
        .iter()
        .position(|r| r.s >= s)
        .unwrap_or(samples.len() - 1)
        .max(1);
    let (a, b) = (&samples[k - 1], &samples[k]);
    let t = ((s - a.s) / (b.s - a.s)).clamp(0.0, 1.0);
    let n = a.density.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a.density[i][j] * (1.0 - t) + b.density[i][j] * t)
                .collect()
        })
        .collect()
}

fn total_variation_proxy(
    atoms: &[AtomReport],
    curves: &[CurveReport],
    ac: &[(Vec<f64>, Mat)],
    domain: &BoxDomain,
) -> f64 {
    let mut tv = 0.0;
    for a in atoms {
        tv += a.mass.iter().flatten().map(|m| m.abs()).sum::<f64>();
    }
    for c in curves {
        if c.samples.len() >= 2 {
            let span = c.samples[c.samples.len() - 1].s - c.samples[0].s;
            let mean: f64 = c
                .samples
                .iter()
                .map(|r| r.density.iter().flatten().map(|d| d.abs()).sum::<f64>())
                .sum::<f64>()
                / c.samples.len() as f64;
            tv += span * mean;
        }
    }
    if !ac.is_empty() {
        let mean: f64 = ac.iter().map(|(_, m)| m.max_abs()).sum::<f64>() / ac.len() as f64;
        tv += mean * domain.volume();
    }
    tv
}
