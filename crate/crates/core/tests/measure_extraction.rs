//! End-to-end extraction of the curvature measure on the closed-form
//! scenarios: vertex atoms across cone angles, the vanishing vertex
//! contribution in three dimensions, curve densities of edges, glued cones,
//! glued smooth profiles and trivial cone families, and the pairing
//! consistency of assembled reports.

use ricci_core::geometry::builtins::{self, PhiSpec};
use ricci_core::geometry::christoffel::{christoffel_from_metric, DiffScheme};
use ricci_core::measure::{
    assemble_measure_report, curve_density_along, singular_mass_at, Ladder, MeasureConfig,
};
use ricci_core::quadrature::QuadratureScheme;

const PI: f64 = std::f64::consts::PI;

fn ladder_scheme() -> QuadratureScheme {
    QuadratureScheme {
        order: 4,
        rel_tol: 1e-5,
        abs_tol: 1e-9,
        max_depth: 22,
        ..Default::default()
    }
}

/// The extracted cone atom is linear in the angle parameter, including a
/// negative-mass case (total angle above the full turn).
#[test]
fn cone_atom_linear_in_angle() {
    let ladder = Ladder { eps0: 0.07, ratio: 0.5, rungs: 5 };
    let scheme = ladder_scheme();
    for alpha in [-0.5, 0.25, 0.5, 0.75] {
        let g = builtins::cone(2, alpha, 1.0);
        let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
        let est = singular_mass_at(&gamma, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &ladder, &scheme)
            .unwrap();
        let want = 2.0 * PI * alpha;
        assert!(
            (est.mass - want).abs() < 0.01 * want.abs(),
            "alpha = {alpha}: atom {} vs {want}",
            est.mass
        );
        assert!(est.cauchy, "alpha = {alpha}: ladder not Cauchy");
    }
}

/// In three dimensions the vertex carries no atom: the extracted magnitude
/// is far below the planar value at the same angle parameter.
#[test]
fn three_dimensional_cone_vertex_is_massless() {
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
    let planar = PI; // the two-dimensional value at the same parameter
    assert!(
        est.mass.abs() < 1e-3 * planar,
        "three-dimensional vertex mass {}",
        est.mass
    );
}

/// Glued truncated cones: the coordinate curve density is 2c, and the
/// intrinsic per-unit-length density is 2 / truncation-length in both the
/// tangential and normal directions.
#[test]
fn glued_cones_curve_density() {
    let (c, len) = (0.8, 2.0);
    let (g, _) = builtins::glued_cones(c, len, 1.0);
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
    assert_eq!(report.curves.len(), 1);
    let want_intrinsic = 2.0 / len;
    for sample in &report.curves[0].samples {
        // Coordinate density: 2c in every diagonal direction.
        assert!(
            (sample.density[0][0] - 2.0 * c).abs() < 0.02 * 2.0 * c,
            "normal coordinate density {}",
            sample.density[0][0]
        );
        assert!(
            (sample.density[1][1] - 2.0 * c).abs() < 0.02 * 2.0 * c,
            "tangential coordinate density {}",
            sample.density[1][1]
        );
        let tan = sample.tangential_intrinsic.unwrap();
        let nor = sample.normal_intrinsic.unwrap();
        assert!(
            (tan - want_intrinsic).abs() < 0.02 * want_intrinsic,
            "tangential intrinsic {tan} vs {want_intrinsic}"
        );
        assert!(
            (nor - want_intrinsic).abs() < 0.02 * want_intrinsic,
            "normal intrinsic {nor} vs {want_intrinsic}"
        );
    }
}

/// Smooth profiles glued along a circle: the boundary-curvature jumps from
/// the two profiles give the singular line density, and the interior
/// curvature matches the profile's second derivative.
#[test]
fn glued_profiles_reproduce_boundary_jumps() {
    let (b_plus, q_plus, b_minus, q_minus) = (-0.6, 0.3, 0.4, -0.2);
    let (g, _) = builtins::conformal2d(
        &PhiSpec::ProfileKink { b_plus, q_plus, b_minus, q_minus },
        1.0,
    );
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let stratum = g.singular.strata[0].clone();
    let ladder = Ladder { eps0: 0.045, ratio: 0.5, rungs: 6 };
    let scheme = ladder_scheme();

    // Boundary-curvature jump from the two profiles: each side contributes
    // its boundary curvature -phi'(0+-) exp(-phi(0)) toward the chosen
    // normal, so the jump is (b_minus - b_plus) exp(-phi(0)).
    let jump = (b_minus - b_plus) * (0.0f64).exp();

    // Tangential-tangential extraction reads the second-fundamental-form
    // jump; normal-normal reads the mean-curvature jump. Both equal `jump`
    // for a one-dimensional gluing locus.
    for dir in [[0.0, 1.0], [1.0, 0.0]] {
        let d = curve_density_along(&gamma, &stratum, &[0.1], &dir, &dir, 0.3, &ladder, &scheme)
            .unwrap();
        assert!(
            (d[0].density - jump).abs() < 0.02 * jump.abs(),
            "direction {dir:?}: density {} vs jump {jump}",
            d[0].density
        );
    }

    // Interior curvature density: -phi'' on each side.
    let grid = [vec![0.5, 0.1], vec![-0.5, -0.2]];
    let ac = ricci_core::measure::ac_density_grid(&gamma, &grid, 1e-4).unwrap();
    let expected = [-2.0 * q_plus, -2.0 * q_minus];
    for ((_, m), want) in ac.iter().zip(expected) {
        assert!(
            (m.get(0, 0) - want).abs() < 1e-3 * (1.0 + want.abs()),
            "interior curvature {} vs {want}",
            m.get(0, 0)
        );
        assert!((m.get(1, 1) - want).abs() < 1e-3 * (1.0 + want.abs()));
        assert!(m.get(0, 1).abs() < 1e-6);
    }
}

/// Trivial-bundle cone family: the zero section carries density
/// `2 pi alpha` in the normal (fiber) directions and nothing tangentially.
#[test]
fn cone_family_zero_section_density() {
    let alpha = 0.5;
    let g = builtins::cone_family_trivial(alpha, 2.0, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let stratum = g.singular.strata[0].clone();
    let ladder = Ladder { eps0: 0.06, ratio: 0.5, rungs: 5 };
    let scheme = ladder_scheme();
    let want = 2.0 * PI * alpha;
    // Normal-normal: fiber directions.
    for dir in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let d = curve_density_along(&gamma, &stratum, &[1.0], &dir, &dir, 0.4, &ladder, &scheme)
            .unwrap();
        assert!(
            (d[0].density - want).abs() < 0.02 * want,
            "normal density {} vs {want}",
            d[0].density
        );
        assert!(d[0].cauchy);
    }
    // Tangential-tangential: base direction pairs to nothing.
    let dt = curve_density_along(
        &gamma,
        &stratum,
        &[1.0],
        &[1.0, 0.0, 0.0],
        &[1.0, 0.0, 0.0],
        0.4,
        &ladder,
        &scheme,
    )
    .unwrap();
    assert!(
        dt[0].density.abs() < 1e-3 * want,
        "tangential density {}",
        dt[0].density
    );
}

/// Assembled reports pair consistently against the form on scenarios with
/// atoms, curve densities and absolutely continuous parts.
#[test]
fn report_pairing_consistency() {
    let cases: Vec<(&str, ricci_core::geometry::MetricField)> = vec![
        ("flat", builtins::flat(2, 1.0)),
        ("cone", builtins::cone(2, 0.5, 1.0)),
        ("edge", builtins::edge(1.0, 1.0).0),
        (
            "glued-profile",
            builtins::conformal2d(
                &PhiSpec::ProfileKink { b_plus: -0.6, q_plus: 0.3, b_minus: 0.4, q_minus: -0.2 },
                1.0,
            )
            .0,
        ),
    ];
    for (name, metric) in cases {
        let gamma = christoffel_from_metric(&metric, &DiffScheme::Analytic).unwrap();
        let config = MeasureConfig {
            ladder: Ladder { eps0: 0.045, ratio: 0.5, rungs: 5 },
            scheme: ladder_scheme(),
            grid_per_axis: 4,
            curve_samples: 3,
            curve_window: 0.35,
            pairing_pairs: 5,
            ..Default::default()
        };
        let report = assemble_measure_report(&gamma, Some(&metric), &config).unwrap();
        for check in &report.pairing {
            assert!(
                check.passes(),
                "{name}: pairing residual {} over scale {} (form {}, paired {})",
                check.residual,
                check.scale,
                check.q_value,
                check.paired
            );
        }
    }
}

/// A declared curve stratum on flat space extracts zero density, and the
/// planar cone's curvature grid vanishes on an annulus away from the
/// vertex.
#[test]
fn trivial_extractions_vanish() {
    use ricci_core::geometry::{MetricField, Regularity, SingularSet, Stratum};
    use std::sync::Arc;
    // Flat metric with an artificial locus declared along {x0 = 0}.
    let chart = ricci_core::geometry::Chart::new(
        ricci_core::geometry::BoxDomain::centered_cube(2, 1.0),
    );
    let flat = MetricField::new(
        chart.clone(),
        Arc::new(|_: &[f64]| ricci_core::linalg::Mat::identity(2)),
        SingularSet {
            strata: vec![Stratum::HyperplanePiece { axis: 0, value: 0.0, exclusion: 0.1 }],
        },
        Regularity::Smooth,
    )
    .with_christoffel(Arc::new(|_: &[f64]| ricci_core::linalg::Tensor3::zeros(2)));
    let gamma = christoffel_from_metric(&flat, &DiffScheme::Analytic).unwrap();
    let ladder = Ladder { eps0: 0.045, ratio: 0.5, rungs: 5 };
    let d = curve_density_along(
        &gamma,
        &flat.singular.strata[0],
        &[0.0],
        &[1.0, 0.0],
        &[1.0, 0.0],
        0.35,
        &ladder,
        &ladder_scheme(),
    )
    .unwrap();
    assert!(d[0].density.abs() < 1e-9, "flat curve density {}", d[0].density);

    // Cones are flat away from the vertex.
    let cone = builtins::cone(2, 0.5, 1.0);
    let cone_gamma = christoffel_from_metric(&cone, &DiffScheme::Analytic).unwrap();
    let annulus = [vec![0.6, 0.0], vec![0.0, 0.75], vec![-0.5, 0.5]];
    for (p, m) in ricci_core::measure::ac_density_grid(&cone_gamma, &annulus, 1e-4).unwrap() {
        assert!(m.max_abs() < 1e-7, "cone annulus curvature {} at {p:?}", m.max_abs());
    }
}

/// Flat space assembles to an empty decomposition.
#[test]
fn flat_report_is_empty() {
    let g = builtins::flat(2, 1.0);
    let gamma = christoffel_from_metric(&g, &DiffScheme::Analytic).unwrap();
    let config = MeasureConfig {
        grid_per_axis: 3,
        scheme: ladder_scheme(),
        pairing_pairs: 2,
        ..Default::default()
    };
    let report = assemble_measure_report(&gamma, Some(&g), &config).unwrap();
    assert!(report.atoms.is_empty());
    assert!(report.curves.is_empty());
    for row in report.ac.values.iter().flatten() {
        for v in row {
            assert!(v.abs() < 1e-10);
        }
    }
}
