//! Acceptance suite: every closed-form value, identity and property the
//! artifact promises, each with its pinned tolerance, one criterion per
//! test, one printed pass/fail line each (run with `--nocapture` to see the
//! lines for passing criteria).

use std::time::Instant;

use ricci_core::flow::builtins::{sheared_sphere_flow, shrinking_sphere_flow, static_flow};
use ricci_core::flow::{
    cone_preserving_flow_check, flow_identity_residual, tame_flow_check, TimeDependentField,
};
use ricci_core::geometry::builtins::{self, PhiSpec};
use ricci_core::geometry::christoffel::{christoffel_from_metric, DiffScheme};
use ricci_core::geometry::half_density::{
    plateau_field, sphere_killing_field, CoeffSpec, HalfDensityField,
};
use ricci_core::geometry::{BoxDomain, Chart};
use ricci_core::linalg::Mat;
use ricci_core::measure::{
    assemble_measure_report, curve_density_along, singular_mass_at, Ladder, MeasureConfig,
};
use ricci_core::qform::{
    bakry_emery_q, q_convergence_under_perturbation, q_form, smooth_ricci_oracle, WeightFunction,
    WeightRegularity,
};
use ricci_core::quadrature::{integrability_diagnostic, integrate, QuadratureScheme, Verdict};
use ricci_core::rng::SplitMix64;
use ricci_runner::config::RunConfig;
use ricci_runner::scenario::run_scenario;

const PI: f64 = std::f64::consts::PI;

struct Criterion {
    label: &'static str,
    start: Instant,
    budget_s: f64,
}

impl Criterion {
    fn new(label: &'static str, budget_s: f64) -> Self {
        Criterion { label, start: Instant::now(), budget_s }
    }

    fn finish(self, pass: bool, detail: String) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let status = if pass { "PASS" } else { "FAIL" };
        println!("[{status}] {} ({elapsed:.1}s): {detail}", self.label);
        assert!(pass, "{}: {detail}", self.label);
        assert!(
            elapsed < self.budget_s,
            "{} exceeded its {}s budget ({elapsed:.1}s)",
            self.label,
            self.budget_s
        );
    }
}

fn scheme() -> QuadratureScheme {
    QuadratureScheme::default()
}

fn ladder_scheme() -> QuadratureScheme {
    QuadratureScheme { order: 4, rel_tol: 1e-5, abs_tol: 1e-9, max_depth: 22, ..Default::default() }
}

fn bump(chart: &Chart, frac: f64, dirs: Vec<f64>) -> HalfDensityField {
    plateau_field(chart, chart.domain.shrunk(frac), 0.25, CoeffSpec::Constant(dirs))
}

/// Criterion 1: planar cone vertex atoms equal `2 pi alpha` in the first
/// coordinate direction, within one percent, across positive and negative
/// angle parameters; each extraction stays under 30 seconds.
#[test]
fn criterion_01_cone_atom() {
    let ladder = Ladder { eps0: 0.07, ratio: 0.5, rungs: 5 };
    let mut detail = String::new();
    let mut pass = true;
    let c = Criterion::new("cone vertex atom across angles", 4.0 * 30.0);
    for alpha in [0.25, 0.5, 0.75, -0.5] {
        let per_alpha = Instant::now();
        let g = builtins::cone(2, alpha, 1.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let est = singular_mass_at(
            &gamma,
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[1.0, 0.0],
            &ladder,
            &ladder_scheme(),
        )
        .unwrap();
        let want = 2.0 * PI * alpha;
        let ok = (est.mass - want).abs() <= 0.01 * want.abs() && est.cauchy;
        let within_budget = per_alpha.elapsed().as_secs_f64() < 30.0;
        pass &= ok && within_budget;
        detail.push_str(&format!("alpha {alpha}: {:.6} vs {want:.6}; ", est.mass));
    }
    c.finish(pass, detail);
}

/// Criterion 2: the cone integrability dichotomy, with the quadratic
/// combination integrating to zero within the absolute tolerance;
/// under 10 seconds.
#[test]
fn criterion_02_cone_integrability_dichotomy() {
    let c = Criterion::new("cone integrability dichotomy", 10.0);
    let g = builtins::cone(2, 0.5, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let verdict = integrability_diagnostic(&gamma, &ladder_scheme()).unwrap();
    let combo_l1 = |x: &[f64]| -> ricci_core::Result<f64> {
        let t = gamma.eval(x)?;
        let combo = ricci_core::geometry::ChristoffelField::quadratic_combination(&t);
        let mut s = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                s += combo.get(k, l).abs();
            }
        }
        Ok(s)
    };
    let combo = integrate(&combo_l1, &g.chart.domain, &g.singular, &ladder_scheme()).unwrap();
    let pass = verdict.gamma_l1 == Verdict::Converges
        && verdict.gamma_l2 == Verdict::Diverges
        && combo.value.abs() <= 1e-10;
    c.finish(
        pass,
        format!(
            "L1 {:?}, L2 {:?}, |quadratic combination| integral {:.2e}",
            verdict.gamma_l1, verdict.gamma_l2, combo.value
        ),
    );
}

/// Criterion 3: the three-dimensional cone vertex carries less than a
/// thousandth of the planar atom; under 60 seconds.
#[test]
fn criterion_03_higher_dimensional_cone() {
    let c = Criterion::new("three-dimensional cone vertex", 60.0);
    let g = builtins::cone(3, 0.5, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let ladder = Ladder { eps0: 0.07, ratio: 0.5, rungs: 5 };
    let est = singular_mass_at(
        &gamma,
        &[0.0, 0.0, 0.0],
        &[1.0, 0.0, 0.0],
        &[1.0, 0.0, 0.0],
        &ladder,
        &ladder_scheme(),
    )
    .unwrap();
    let planar = PI;
    let pass = est.mass.abs() < 1e-3 * planar;
    c.finish(pass, format!("vertex mass {:.3e} vs planar {planar:.3}", est.mass));
}

/// Criterion 4: the edge self-pairing matches the one-dimensional
/// reduction `2 int psi(0, t)^2 dt` within two percent; under 30 seconds.
#[test]
fn criterion_04_edge_density() {
    let c = Criterion::new("edge line reduction", 30.0);
    let (g, _) = builtins::edge(1.0, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let psi = bump(&g.chart, 0.1, vec![1.0, 0.0]);
    let q = q_form(&gamma, &psi, &psi, &scheme()).unwrap();
    let mut f = |t: f64| {
        let v = psi.coeffs_at(&[0.0, t]);
        v[0] * v[0]
    };
    let (line, _) = ricci_core::quadrature::adaptive_1d(&mut f, -0.9, 0.9, 10, 1e-12, 14);
    let want = 2.0 * line;
    let pass = (q.value - want).abs() <= 0.02 * want;
    c.finish(pass, format!("form {:.6} vs reduction {want:.6}", q.value));
}

/// Criterion 5: glued truncated cones at truncation length 2 give intrinsic
/// curve density 1 within two percent, and a smooth profile gluing
/// reproduces its boundary-curvature jumps within two percent.
#[test]
fn criterion_05_gluing_consistency() {
    let c = Criterion::new("gluing consistency", 120.0);
    let (g, _) = builtins::glued_cones(0.8, 2.0, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let config = MeasureConfig {
        ladder: Ladder { eps0: 0.045, ratio: 0.5, rungs: 5 },
        scheme: ladder_scheme(),
        curve_samples: 3,
        curve_window: 0.35,
        grid_per_axis: 4,
        ..Default::default()
    };
    let report = assemble_measure_report(&gamma, Some(&g), &config).unwrap();
    let sample = &report.curves[0].samples[1];
    let tan = sample.tangential_intrinsic.unwrap();
    let nor = sample.normal_intrinsic.unwrap();
    let cones_ok = (tan - 1.0).abs() <= 0.02 && (nor - 1.0).abs() <= 0.02;

    // Smooth profiles glued along the circle: the singular density is the
    // jump of the boundary curvature computed from each profile.
    let (b_plus, b_minus) = (-0.6, 0.4);
    let (caps, _) = builtins::conformal2d(
        &PhiSpec::ProfileKink { b_plus, q_plus: 0.3, b_minus, q_minus: -0.2 },
        1.0,
    );
    let caps_gamma = christoffel_from_metric(&caps, &DiffScheme::Analytic).unwrap();
    let stratum = caps.singular.strata[0].clone();
    let jump = b_minus - b_plus;
    let ladder = Ladder { eps0: 0.045, ratio: 0.5, rungs: 6 };
    let a_jump = curve_density_along(
        &caps_gamma,
        &stratum,
        &[0.1],
        &[0.0, 1.0],
        &[0.0, 1.0],
        0.3,
        &ladder,
        &ladder_scheme(),
    )
    .unwrap()[0]
        .density;
    let h_jump = curve_density_along(
        &caps_gamma,
        &stratum,
        &[0.1],
        &[1.0, 0.0],
        &[1.0, 0.0],
        0.3,
        &ladder,
        &ladder_scheme(),
    )
    .unwrap()[0]
        .density;
    let caps_ok = (a_jump - jump).abs() <= 0.02 * jump.abs()
        && (h_jump - jump).abs() <= 0.02 * jump.abs();
    c.finish(
        cones_ok && caps_ok,
        format!(
            "glued cones intrinsic (tan {tan:.4}, nor {nor:.4}) vs 1; \
             profile jumps (A {a_jump:.4}, H {h_jump:.4}) vs {jump:.4}"
        ),
    );
}

/// Criterion 6: the direct form equals the finite-difference curvature
/// pairing on the sphere chart and a smooth conformal surface, over ten
/// random bump pairs.
#[test]
fn criterion_06_smooth_oracle_equivalence() {
    let c = Criterion::new("smooth oracle equivalence", 120.0);
    let mut rng = SplitMix64::new(0x5eed);
    let sch = scheme();
    let mut worst: f64 = 0.0;
    for metric in [
        builtins::sphere_chart(1.0, 2.5),
        builtins::conformal2d(&PhiSpec::Gaussian { amplitude: 1.0 }, 1.5).0,
    ] {
        let gamma = christoffel_from_metric(&metric, &DiffScheme::Analytic).unwrap();
        for _ in 0..5 {
            let v = random_bump(&metric.chart, &mut rng);
            let w = random_bump(&metric.chart, &mut rng);
            let direct = q_form(&gamma, &v, &w, &sch).unwrap();
            let oracle = smooth_ricci_oracle(&gamma, &v, &w, &sch, 1e-4).unwrap();
            let tol = (1e-4 * direct.value.abs()).max(1e-6);
            worst = worst.max((direct.value - oracle.value).abs() / tol);
        }
    }
    c.finish(worst <= 1.0, format!("worst deviation {worst:.3} of tolerance"));
}

fn random_bump(chart: &Chart, rng: &mut SplitMix64) -> HalfDensityField {
    let n = chart.dim;
    let dom = &chart.domain;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for a in 0..n {
        let width = dom.hi[a] - dom.lo[a];
        lo.push(dom.lo[a] + width * rng.uniform(0.02, 0.25));
        hi.push(dom.hi[a] - width * rng.uniform(0.02, 0.25));
    }
    let dirs: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    plateau_field(chart, BoxDomain::new(lo, hi).unwrap(), 0.25, CoeffSpec::Constant(dirs))
}

/// Criterion 7: the form is invariant under a fixed nonlinear smooth chart
/// transition on the sphere scenario, within half a percent.
#[test]
fn criterion_07_chart_invariance() {
    use ricci_core::geometry::Transition;
    use std::sync::Arc;
    let c = Criterion::new("chart invariance", 120.0);
    let metric = builtins::sphere_chart(1.0, 2.0);
    let fwd = Arc::new(|x: &[f64]| vec![x[0] + 0.2 * x[1] * x[1], x[1] + 0.05 * x[1] * x[1] * x[1]]);
    let inv = Arc::new(|y: &[f64]| {
        let mut u = y[1];
        for _ in 0..60 {
            let du = (u + 0.05 * u * u * u - y[1]) / (1.0 + 0.15 * u * u);
            u -= du;
            if du.abs() < 1e-15 {
                break;
            }
        }
        vec![y[0] - 0.2 * u * u, u]
    });
    let jac = Arc::new(|x: &[f64]| {
        let mut j = Mat::identity(2);
        j.set(0, 1, 0.4 * x[1]);
        j.set(1, 1, 1.0 + 0.15 * x[1] * x[1]);
        j
    });
    let mut chart_a = metric.chart.clone();
    chart_a.transition = Some(Transition::new(fwd, inv, jac));
    let chart_b = Chart::new(BoxDomain::new(vec![-2.5, -3.0], vec![3.5, 3.0]).unwrap());
    let mut gamma_a = christoffel_from_metric(&metric, &DiffScheme::Analytic).unwrap();
    gamma_a.chart = chart_a.clone();
    let gamma_b = ricci_core::geometry::christoffel_transform(&gamma_a, &chart_b).unwrap();
    let sch = scheme();
    let v = bump(&chart_a, 0.15, vec![1.0, 0.3]);
    let w = bump(&chart_a, 0.2, vec![-0.4, 1.0]);
    let q_a = q_form(&gamma_a, &v, &w, &sch).unwrap();
    let v_b = ricci_core::qform::push_forward_field(&v, &chart_a, &chart_b).unwrap();
    let w_b = ricci_core::qform::push_forward_field(&w, &chart_a, &chart_b).unwrap();
    let q_b = q_form(&gamma_b, &v_b, &w_b, &sch).unwrap();
    let pass = (q_a.value - q_b.value).abs() <= 0.005 * q_a.value.abs().max(1e-5);
    c.finish(pass, format!("chart values {:.6} vs {:.6}", q_a.value, q_b.value));
}

/// Criterion 8: on flat space with the quadratic weight the weighted form
/// equals the plain coefficient pairing within half a percent.
#[test]
fn criterion_08_weighted_form() {
    let c = Criterion::new("weighted form with quadratic weight", 30.0);
    let g = builtins::flat(2, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let weight = WeightFunction::new(
        std::sync::Arc::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
        WeightRegularity::Semiconvex,
    )
    .with_grad(std::sync::Arc::new(|x: &[f64]| x.to_vec()));
    let sch = scheme();
    let v = bump(&g.chart, 0.1, vec![1.0, 0.4]);
    let w = bump(&g.chart, 0.15, vec![-0.3, 1.0]);
    let weighted = bakry_emery_q(&gamma, &weight, &v, &w, &sch).unwrap();
    let pairing = |x: &[f64]| -> ricci_core::Result<f64> {
        let a = v.coeffs_at(x);
        let b = w.coeffs_at(x);
        Ok(a[0] * b[0] + a[1] * b[1])
    };
    let want = integrate(
        &pairing,
        &v.support.intersect(&w.support).unwrap(),
        &ricci_core::geometry::SingularSet::empty(),
        &sch,
    )
    .unwrap();
    let pass = (weighted.value - want.value).abs() <= 0.005 * want.value.abs();
    c.finish(pass, format!("weighted {:.6} vs pairing {:.6}", weighted.value, want.value));
}

/// Criterion 9: the form's deviation under bounded perturbations of the
/// cone connection is linear in the perturbation sup norm (fit above 0.99).
#[test]
fn criterion_09_perturbation_convergence() {
    let c = Criterion::new("perturbation linear response", 60.0);
    let g = builtins::cone(2, 0.5, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let mut t0 = ricci_core::linalg::Tensor3::zeros(2);
    t0.set(0, 0, 0, 0.02);
    t0.set(1, 0, 1, 0.02);
    t0.set(1, 1, 0, 0.02);
    let base = ricci_core::geometry::ConnectionPerturbation::constant(g.chart.clone(), t0).unwrap();
    let perts: Vec<_> = [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|r| base.scaled(1.0 / r)).collect();
    let v = plateau_field(
        &g.chart,
        BoxDomain::new(vec![-0.5, -0.85], vec![0.9, 0.55]).unwrap(),
        0.25,
        CoeffSpec::Constant(vec![1.0, 0.0]),
    );
    let w = plateau_field(
        &g.chart,
        BoxDomain::new(vec![-0.9, -0.5], vec![0.55, 0.85]).unwrap(),
        0.25,
        CoeffSpec::Constant(vec![0.4, 1.0]),
    );
    let conv = q_convergence_under_perturbation(&gamma, &perts, &v, &w, &scheme()).unwrap();
    let (slope, r2) = conv.linear_fit();
    c.finish(r2 > 0.99, format!("fit r2 {r2:.5}, slope {slope:.4}"));
}

/// Criterion 10: the flow identity holds on the shrinking sphere to a
/// relative thousandth, and exactly (to 1e-6) on static flat space.
#[test]
fn criterion_10_weak_flow_identity() {
    let c = Criterion::new("weak flow identity", 120.0);
    let sch = scheme();
    let sphere = shrinking_sphere_flow(1.0, 2.0, 0.45);
    let v = TimeDependentField::static_field(bump(&sphere.chart, 0.15, vec![1.0, 0.3]));
    let w = TimeDependentField::static_field(bump(&sphere.chart, 0.15, vec![-0.2, 1.0]));
    let mut pass = true;
    let mut detail = String::new();
    for t in [0.1, 0.2, 0.4] {
        let r = flow_identity_residual(&sphere, &v, &w, 0.0, t, &sch, 8).unwrap();
        let ok = r.residual.abs() < 1e-3 * r.scale();
        pass &= ok;
        detail.push_str(&format!("sphere t {t}: {:.2e}; ", r.residual));
    }
    let flat = static_flow(builtins::flat(2, 1.0), 1.0);
    let fv = TimeDependentField::static_field(bump(&flat.chart, 0.1, vec![1.0, 0.0]));
    let fw = TimeDependentField::static_field(bump(&flat.chart, 0.1, vec![0.0, 1.0]));
    let r = flow_identity_residual(&flat, &fv, &fw, 0.0, 0.4, &sch, 8).unwrap();
    pass &= r.residual.abs() < 1e-6;
    detail.push_str(&format!("flat: {:.2e}", r.residual));
    c.finish(pass, detail);
}

/// Criterion 11: static cones fail the identity with residual `-2 t Q`
/// (linear fit above 0.999) and pass the gated variant with relative
/// residuals below 1e-5.
#[test]
fn criterion_11_tame_flow_discrimination() {
    let c = Criterion::new("flow discrimination on static cones", 180.0);
    let sch = scheme();
    let metric = builtins::cone(2, 0.5, 1.0);
    let gamma = christoffel_from_metric(&metric, &DiffScheme::Analytic).unwrap();
    let flow = static_flow(metric, 1.0);
    let field = bump(&flow.chart, 0.1, vec![1.0, 0.0]);
    let q = q_form(&gamma, &field, &field, &sch).unwrap().value;
    let v = TimeDependentField::static_field(field);
    let times = [0.05, 0.1, 0.2, 0.4];
    let mut residuals = Vec::new();
    for &t in &times {
        let r = flow_identity_residual(&flow, &v, &v, 0.0, t, &sch, 8).unwrap();
        residuals.push(r.residual);
    }
    let report = tame_flow_check(&flow, &[(v.clone(), v)], &times, &sch, 8).unwrap();
    let sxx: f64 = times.iter().map(|t| t * t).sum();
    let sxy: f64 = times.iter().zip(&residuals).map(|(t, r)| t * r).sum();
    let slope = sxy / sxx;
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let ss_tot: f64 = residuals.iter().map(|r| (r - mean) * (r - mean)).sum();
    let ss_res: f64 = times
        .iter()
        .zip(&residuals)
        .map(|(t, r)| {
            let d = r - slope * t;
            d * d
        })
        .sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let slope_ok = (slope + 2.0 * q).abs() <= 0.01 * (2.0 * q).abs();

    let gated = TimeDependentField::static_field(plateau_field(
        &flow.chart,
        flow.chart.domain.shrunk(0.1),
        0.25,
        CoeffSpec::Linear { c: vec![0.0, 0.0], a: Mat::identity(2) },
    ));
    let gated_report =
        cone_preserving_flow_check(&flow, &[(gated.clone(), gated)], &times, &sch, 8).unwrap();
    let gated_worst = gated_report
        .records
        .iter()
        .map(|r| r.residual.abs() / r.scale.max(1e-4))
        .fold(0.0f64, f64::max);
    let pass = !report.pass && r2 > 0.999 && slope_ok && gated_report.pass && gated_worst < 1e-5;
    c.finish(
        pass,
        format!(
            "ungated fails with slope {slope:.4} (want {:.4}, r2 {r2:.5}); gated worst {gated_worst:.2e}",
            -2.0 * q
        ),
    );
}

/// Criterion 12: the trivial cone family's zero section carries density
/// `2 pi alpha` in the normal directions and nothing tangentially.
#[test]
fn criterion_12_cone_family() {
    let c = Criterion::new("cone family zero-section density", 180.0);
    let alpha = 0.5;
    let g = builtins::cone_family_trivial(alpha, 2.0, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let stratum = g.singular.strata[0].clone();
    let ladder = Ladder { eps0: 0.06, ratio: 0.5, rungs: 5 };
    let want = 2.0 * PI * alpha;
    let mut normal_vals = Vec::new();
    for dir in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let d = curve_density_along(
            &gamma,
            &stratum,
            &[1.0],
            &dir,
            &dir,
            0.4,
            &ladder,
            &ladder_scheme(),
        )
        .unwrap();
        normal_vals.push(d[0].density);
    }
    let tangential = curve_density_along(
        &gamma,
        &stratum,
        &[1.0],
        &[1.0, 0.0, 0.0],
        &[1.0, 0.0, 0.0],
        0.4,
        &ladder,
        &ladder_scheme(),
    )
    .unwrap()[0]
        .density;
    let pass = normal_vals.iter().all(|v| (v - want).abs() <= 0.02 * want)
        && tangential.abs() < 1e-3 * want;
    c.finish(
        pass,
        format!("normal {normal_vals:?} vs {want:.4}; tangential {tangential:.2e}"),
    );
}

/// Criterion 13: the property suites — bilinearity, symmetry, the Killing
/// sign, pairing consistency and report determinism.
#[test]
fn criterion_13_property_suites() {
    let c = Criterion::new("property suites", 300.0);
    let sch = scheme();
    let mut detail = String::new();

    // Bilinearity and symmetry on the cone.
    let cone = builtins::cone(2, 0.5, 1.0);
    let gamma = christoffel_from_metric(&cone, &DiffScheme::Analytic).unwrap();
    let v1 = bump(&cone.chart, 0.1, vec![1.0, 0.0]);
    let v2 = bump(&cone.chart, 0.15, vec![0.0, 1.0]);
    let w = bump(&cone.chart, 0.12, vec![1.0, 1.0]);
    let mut rng = SplitMix64::new(99);
    let mut bilinear_ok = true;
    for _ in 0..3 {
        let a = rng.uniform(-2.0, 2.0);
        let b = rng.uniform(-2.0, 2.0);
        let combo = HalfDensityField::linear_combination(a, &v1, b, &v2).unwrap();
        let lhs = q_form(&gamma, &combo, &w, &sch).unwrap();
        let q1 = q_form(&gamma, &v1, &w, &sch).unwrap();
        let q2 = q_form(&gamma, &v2, &w, &sch).unwrap();
        let budget = (lhs.error + a.abs() * q1.error + b.abs() * q2.error).max(1e-5);
        bilinear_ok &= (lhs.value - a * q1.value - b * q2.value).abs() <= budget;
    }
    let qa = q_form(&gamma, &v1, &w, &sch).unwrap();
    let qb = q_form(&gamma, &w, &v1, &sch).unwrap();
    let symmetric_ok = (qa.value - qb.value).abs() <= (qa.error + qb.error).max(1e-7);
    detail.push_str(&format!("bilinear {bilinear_ok}, symmetric {symmetric_ok}; "));

    // Killing sign on the sphere chart.
    let sphere = builtins::sphere_chart(1.0, 3.0);
    let sphere_gamma = christoffel_from_metric(&sphere, &DiffScheme::Analytic).unwrap();
    let grid = sphere.chart.domain.shrunk(0.05).interior_grid(4);
    let mut killing_ok = true;
    for which in 0..3 {
        let k = sphere_killing_field(&sphere.chart, 1.0, which);
        let defect =
            ricci_core::qform::killing_defect(&sphere, &sphere_gamma, &k, &grid).unwrap();
        let q = q_form(&sphere_gamma, &k, &k, &sch).unwrap();
        killing_ok &= defect < 1e-8 && q.value >= -sch.abs_tol;
    }
    detail.push_str(&format!("killing-sign {killing_ok}; "));

    // Pairing consistency on cone and edge reports.
    let mut pairing_ok = true;
    for metric in [builtins::cone(2, 0.5, 1.0), builtins::edge(1.0, 1.0).0] {
        let g = christoffel_from_metric(&metric, &DiffScheme::Analytic).unwrap();
        let mc = MeasureConfig {
            ladder: Ladder { eps0: 0.045, ratio: 0.5, rungs: 5 },
            scheme: ladder_scheme(),
            grid_per_axis: 4,
            curve_samples: 3,
            curve_window: 0.35,
            ..Default::default()
        };
        let report = assemble_measure_report(&g, Some(&metric), &mc).unwrap();
        pairing_ok &= report.pairing.iter().all(|p| p.passes());
    }
    detail.push_str(&format!("pairing {pairing_ok}; "));

    // Determinism: identical configs give byte-identical deterministic
    // reports.
    let config = RunConfig::default();
    let r1 = run_scenario("cone-3d", &config).unwrap();
    let r2 = run_scenario("cone-3d", &config).unwrap();
    let deterministic = serde_json::to_string(&r1.deterministic_json()).unwrap()
        == serde_json::to_string(&r2.deterministic_json()).unwrap();
    detail.push_str(&format!("deterministic {deterministic}"));

    c.finish(
        bilinear_ok && symmetric_ok && killing_ok && pairing_ok && deterministic,
        detail,
    );
}

/// The pullback of a smooth flow by a fixed diffeomorphism still satisfies
/// the identity (supporting evidence for the flow criteria).
#[test]
fn pulled_back_flow_is_tame() {
    let c = Criterion::new("pulled-back flow", 60.0);
    let flow = sheared_sphere_flow(1.0, 0.3, 2.0, 0.45);
    let v = TimeDependentField::static_field(bump(&flow.chart, 0.15, vec![1.0, 0.0]));
    let w = TimeDependentField::static_field(bump(&flow.chart, 0.15, vec![0.4, 1.0]));
    let report = tame_flow_check(&flow, &[(v, w)], &[0.1, 0.3], &scheme(), 8).unwrap();
    c.finish(report.pass, format!("records: {}", report.records.len()));
}
