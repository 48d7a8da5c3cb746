//! Built-in metric constructors addressable by name and parameters from the
//! runner configuration: flat space, conformal surfaces, cones, edges, glued
//! cones and profiles, trivial cone families, a Kaehler surface and the
//! stereographic sphere chart.

use std::sync::Arc;

use crate::geometry::chart::{BoxDomain, Chart};
use crate::geometry::metric::{MetricField, Regularity};
use crate::geometry::singular::{SingularSet, Stratum};
use crate::linalg::{Mat, Tensor3};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Conformal factor `phi` with analytic gradient and, where available, the
/// pointwise Laplacian of its smooth part.
#[derive(Clone)]
pub struct PhiField {
    pub phi: ScalarFn,
    pub grad: GradFn,
    pub laplacian: Option<ScalarFn>,
}

/// Distributional curvature of a conformal surface, split into point atoms,
/// constant line densities along axis-aligned loci, and an absolutely
/// continuous remainder.
#[derive(Clone, Debug, Default)]
pub struct CurvatureMeasure {
    pub atoms: Vec<(Vec<f64>, f64)>,
    /// `(axis, value, density)`: line `{x[axis] = value}` carrying a constant
    /// density per unit coordinate length.
    pub lines: Vec<(usize, f64, f64)>,
    pub has_ac: bool,
}

/// A conformal factor together with its curvature measure; the data needed
/// by the surface-curvature pairing evaluator.
#[derive(Clone)]
pub struct ConformalFactor {
    pub field: PhiField,
    pub curvature: CurvatureMeasure,
}

/// Parametrized conformal factors accepted by the scenario layer.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiSpec {
    /// `phi = a exp(-|x|^2)`: smooth, rapidly decaying.
    Gaussian { amplitude: f64 },
    /// `phi = a (x1^2 - x2^2)`: harmonic, so the surface is flat.
    Harmonic { amplitude: f64 },
    /// `phi = -alpha ln|x|`: cone of total angle `2 pi (1 - alpha)`.
    ConeLog { alpha: f64 },
    /// `phi = -c |x1|`: edge along `{x1 = 0}`.
    AbsKink { c: f64 },
    /// Smooth on each side of `{x1 = 0}` with a derivative jump:
    /// `phi = b x1 + q x1^2` with side-dependent `(b, q)`.
    ProfileKink { b_plus: f64, q_plus: f64, b_minus: f64, q_minus: f64 },
}

impl PhiSpec {
    /// Instantiates the factor on a 2-d chart, including its curvature
    /// measure oracle.
    pub fn build(&self) -> ConformalFactor {
        match *self {
            PhiSpec::Gaussian { amplitude } => {
                let a = amplitude;
                ConformalFactor {
                    field: PhiField {
                        phi: Arc::new(move |x: &[f64]| a * (-sq(x)).exp()),
                        grad: Arc::new(move |x: &[f64]| {
                            let e = (-sq(x)).exp();
                            x.iter().map(|v| -2.0 * a * v * e).collect()
                        }),
                        laplacian: Some(Arc::new(move |x: &[f64]| {
                            let r2 = sq(x);
                            let n = x.len() as f64;
                            a * (4.0 * r2 - 2.0 * n) * (-r2).exp()
                        })),
                    },
                    curvature: CurvatureMeasure { has_ac: true, ..Default::default() },
                }
            }
            PhiSpec::Harmonic { amplitude } => {
                let a = amplitude;
                ConformalFactor {
                    field: PhiField {
                        phi: Arc::new(move |x: &[f64]| a * (x[0] * x[0] - x[1] * x[1])),
                        grad: Arc::new(move |x: &[f64]| vec![2.0 * a * x[0], -2.0 * a * x[1]]),
                        laplacian: Some(Arc::new(|_: &[f64]| 0.0)),
                    },
                    curvature: CurvatureMeasure::default(),
                }
            }
            PhiSpec::ConeLog { alpha } => ConformalFactor {
                field: cone_phi_field(alpha),
                curvature: CurvatureMeasure {
                    atoms: vec![(vec![0.0, 0.0], 2.0 * std::f64::consts::PI * alpha)],
                    ..Default::default()
                },
            },
            PhiSpec::AbsKink { c } => ConformalFactor {
                field: PhiField {
                    phi: Arc::new(move |x: &[f64]| -c * x[0].abs()),
                    grad: Arc::new(move |x: &[f64]| {
                        let mut g = vec![0.0; x.len()];
                        g[0] = -c * x[0].signum();
                        g
                    }),
                    laplacian: Some(Arc::new(|_: &[f64]| 0.0)),
                },
                curvature: CurvatureMeasure {
                    atoms: vec![],
                    lines: vec![(0, 0.0, 2.0 * c)],
                    has_ac: false,
                },
            },
            PhiSpec::ProfileKink { b_plus, q_plus, b_minus, q_minus } => {
                let side = move |u: f64| -> (f64, f64, f64) {
                    // (phi, phi', phi'') restricted to one side.
                    if u >= 0.0 {
                        (b_plus * u + q_plus * u * u, b_plus + 2.0 * q_plus * u, 2.0 * q_plus)
                    } else {
                        (b_minus * u + q_minus * u * u, b_minus + 2.0 * q_minus * u, 2.0 * q_minus)
                    }
                };
                ConformalFactor {
                    field: PhiField {
                        phi: Arc::new(move |x: &[f64]| side(x[0]).0),
                        grad: Arc::new(move |x: &[f64]| {
                            let mut g = vec![0.0; x.len()];
                            g[0] = side(x[0]).1;
                            g
                        }),
                        laplacian: Some(Arc::new(move |x: &[f64]| side(x[0]).2)),
                    },
                    curvature: CurvatureMeasure {
                        atoms: vec![],
                        // dK = -(phi'' dx) - [phi'(0+) - phi'(0-)] delta, so
                        // the line density is phi'(0-) - phi'(0+).
                        lines: vec![(0, 0.0, b_minus - b_plus)],
                        has_ac: true,
                    },
                }
            }
        }
    }
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn cone_phi_field(alpha: f64) -> PhiField {
    PhiField {
        phi: Arc::new(move |x: &[f64]| -0.5 * alpha * sq(x).ln()),
        grad: Arc::new(move |x: &[f64]| {
            let r2 = sq(x);
            x.iter().map(|v| -alpha * v / r2).collect()
        }),
        // ln|x| is harmonic away from the vertex in two dimensions.
        laplacian: Some(Arc::new(|_: &[f64]| 0.0)),
    }
}

/// Conformal metric `exp(2 phi) delta` on the given chart, with analytic
/// derivative and Christoffel closures
/// `G^i_jk = d_ij dphi_k + d_ik dphi_j - d_jk dphi_i`.
pub fn conformal_metric(
    chart: Chart,
    phi: PhiField,
    singular: SingularSet,
    regularity: Regularity,
) -> MetricField {
    let n = chart.dim;
    let phi_eval = phi.phi.clone();
    let grad_for_d = phi.grad.clone();
    let phi_for_d = phi.phi.clone();
    let grad_for_gamma = phi.grad.clone();
    MetricField::new(
        chart,
        Arc::new(move |x: &[f64]| {
            let f = (2.0 * phi_eval(x)).exp();
            Mat::from_fn(n, |i, j| if i == j { f } else { 0.0 })
        }),
        singular,
        regularity,
    )
    .with_d_eval(Arc::new(move |x: &[f64]| {
        let f = (2.0 * phi_for_d(x)).exp();
        let g = grad_for_d(x);
        Tensor3::from_fn(n, |k, i, j| if i == j { 2.0 * g[k] * f } else { 0.0 })
    }))
    .with_christoffel(Arc::new(move |x: &[f64]| {
        let g = grad_for_gamma(x);
        conformal_christoffel(n, &g)
    }))
}

/// The conformal Christoffel symbols for gradient vector `dphi`.
pub fn conformal_christoffel(n: usize, dphi: &[f64]) -> Tensor3 {
    Tensor3::symmetric_lower_from_fn(n, |i, j, k| {
        let mut s = 0.0;
        if i == j {
            s += dphi[k];
        }
        if i == k {
            s += dphi[j];
        }
        if j == k {
            s -= dphi[i];
        }
        s
    })
}

/// Euclidean metric on `[-h, h]^n`.
pub fn flat(n: usize, half_width: f64) -> MetricField {
    let chart = Chart::new(BoxDomain::centered_cube(n, half_width));
    MetricField::new(
        chart,
        Arc::new(move |_: &[f64]| Mat::identity(n)),
        SingularSet::empty(),
        Regularity::Smooth,
    )
    .with_d_eval(Arc::new(move |_: &[f64]| Tensor3::zeros(n)))
    .with_christoffel(Arc::new(move |_: &[f64]| Tensor3::zeros(n)))
}

/// Conformal surface `exp(2 phi) delta` on `[-h, h]^2` from a factor spec.
pub fn conformal2d(spec: &PhiSpec, half_width: f64) -> (MetricField, ConformalFactor) {
    let factor = spec.build();
    let chart = Chart::new(BoxDomain::centered_cube(2, half_width));
    let (singular, regularity) = match spec {
        PhiSpec::Gaussian { .. } | PhiSpec::Harmonic { .. } => {
            (SingularSet::empty(), Regularity::Smooth)
        }
        PhiSpec::ConeLog { .. } => (
            SingularSet::point(vec![0.0, 0.0], 0.15 * half_width),
            Regularity::W11Loc,
        ),
        PhiSpec::AbsKink { .. } | PhiSpec::ProfileKink { .. } => (
            SingularSet {
                strata: vec![Stratum::HyperplanePiece {
                    axis: 0,
                    value: 0.0,
                    exclusion: 0.1 * half_width,
                }],
            },
            Regularity::Lipschitz,
        ),
    };
    let metric = conformal_metric(chart, factor.field.clone(), singular, regularity);
    (metric, factor)
}

/// Cone metric `|x|^(-2 alpha) delta` on `[-h, h]^n` with total angle
/// `2 pi (1 - alpha)` in dimension two. Requires `alpha < 1`.
pub fn cone(n: usize, alpha: f64, half_width: f64) -> MetricField {
    assert!(alpha < 1.0, "cone requires alpha < 1");
    let chart = Chart::new(BoxDomain::centered_cube(n, half_width));
    let singular = SingularSet::point(vec![0.0; n], 0.15 * half_width);
    let phi = PhiField {
        phi: Arc::new(move |x: &[f64]| -0.5 * alpha * sq(x).ln()),
        grad: Arc::new(move |x: &[f64]| {
            let r2 = sq(x);
            x.iter().map(|v| -alpha * v / r2).collect()
        }),
        laplacian: None,
    };
    conformal_metric(chart, phi, singular, Regularity::W11Loc)
}

/// Smoothing of the cone at scale `eps`: `(|x|^2 + eps^2)^(-alpha) delta`.
pub fn mollified_cone(n: usize, alpha: f64, eps: f64, half_width: f64) -> MetricField {
    let chart = Chart::new(BoxDomain::centered_cube(n, half_width));
    let e2 = eps * eps;
    let phi = PhiField {
        phi: Arc::new(move |x: &[f64]| -0.5 * alpha * (sq(x) + e2).ln()),
        grad: Arc::new(move |x: &[f64]| {
            let d = sq(x) + e2;
            x.iter().map(|v| -alpha * v / d).collect()
        }),
        laplacian: None,
    };
    conformal_metric(chart, phi, SingularSet::empty(), Regularity::Smooth)
}

/// Edge metric `exp(-2 c |x1|) delta` on `[-h, h]^2`; the curvature measure
/// is a line density `2c` along `{x1 = 0}`.
pub fn edge(c: f64, half_width: f64) -> (MetricField, ConformalFactor) {
    conformal2d(&PhiSpec::AbsKink { c }, half_width)
}

/// Two truncated cones of total angle `2 pi c`, each cut at intrinsic
/// distance `len` from its vertex and glued along the resulting circle,
/// presented on the universal cover: `(c len)^2 exp(-2 c |x1|) delta`.
/// The gluing locus is `{x1 = 0}`, at intrinsic distance `len` from either
/// (removed) vertex.
pub fn glued_cones(c: f64, len: f64, half_width: f64) -> (MetricField, ConformalFactor) {
    assert!(c > 0.0 && len > 0.0);
    let offset = (c * len).ln();
    let base = PhiSpec::AbsKink { c }.build();
    let inner_phi = base.field.phi.clone();
    let field = PhiField {
        phi: Arc::new(move |x: &[f64]| inner_phi(x) + offset),
        grad: base.field.grad.clone(),
        laplacian: base.field.laplacian.clone(),
    };
    let chart = Chart::new(BoxDomain::centered_cube(2, half_width));
    let singular = SingularSet {
        strata: vec![Stratum::HyperplanePiece { axis: 0, value: 0.0, exclusion: 0.1 * half_width }],
    };
    let metric = conformal_metric(chart, field.clone(), singular, Regularity::Lipschitz);
    (metric, ConformalFactor { field, curvature: base.curvature })
}

/// Trivial-bundle cone family over a flat base segment of length
/// `base_length`: coordinates `(x0; x1, x2)` with
/// `g = dx0^2 + rho^(-2 alpha) (dx1^2 + dx2^2)`, `rho = |(x1, x2)|`.
/// The zero section `{x1 = x2 = 0}` is a curve stratum.
pub fn cone_family_trivial(alpha: f64, base_length: f64, fiber_half_width: f64) -> MetricField {
    assert!(alpha < 1.0);
    let b = 0.5 * base_length;
    let h = fiber_half_width;
    let domain = BoxDomain::new(vec![-b, -h, -h], vec![b, h, h]).unwrap();
    let chart = Chart::new(domain);
    let singular = SingularSet {
        strata: vec![Stratum::Curve {
            vertices: vec![vec![-b, 0.0, 0.0], vec![b, 0.0, 0.0]],
            exclusion: 0.15 * h,
        }],
    };
    let fiber_phi = move |x: &[f64]| -> f64 {
        let r2 = x[1] * x[1] + x[2] * x[2];
        -0.5 * alpha * r2.ln()
    };
    let fiber_grad = move |x: &[f64]| -> [f64; 2] {
        let r2 = x[1] * x[1] + x[2] * x[2];
        [-alpha * x[1] / r2, -alpha * x[2] / r2]
    };
    MetricField::new(
        chart,
        Arc::new(move |x: &[f64]| {
            let f = (2.0 * fiber_phi(x)).exp();
            Mat::from_fn(3, |i, j| {
                if i != j {
                    0.0
                } else if i == 0 {
                    1.0
                } else {
                    f
                }
            })
        }),
        singular,
        Regularity::W11Loc,
    )
    .with_d_eval(Arc::new(move |x: &[f64]| {
        let f = (2.0 * fiber_phi(x)).exp();
        let g = fiber_grad(x);
        Tensor3::from_fn(3, |k, i, j| {
            if i == j && i >= 1 && k >= 1 {
                2.0 * g[k - 1] * f
            } else {
                0.0
            }
        })
    }))
    .with_christoffel(Arc::new(move |x: &[f64]| {
        // Fiber indices carry the two-dimensional conformal symbols; every
        // component touching the base direction vanishes.
        let g = fiber_grad(x);
        let fiber = conformal_christoffel(2, &g);
        Tensor3::from_fn(3, |i, j, k| {
            if i >= 1 && j >= 1 && k >= 1 {
                fiber.get(i - 1, j - 1, k - 1)
            } else {
                0.0
            }
        })
    }))
}

/// Kaehler surface of complex dimension one: the Hermitian metric
/// `h = exp(2 phi)` on a chart of `C`, with `log det h = 2 phi`.
#[derive(Clone)]
pub struct KahlerMetric {
    pub metric: MetricField,
    pub factor: ConformalFactor,
}

pub fn kahler1d(spec: &PhiSpec, half_width: f64) -> KahlerMetric {
    let (metric, factor) = conformal2d(spec, half_width);
    KahlerMetric { metric, factor }
}

/// Stereographic chart of the round sphere of radius `r0`:
/// `g = 4 r0^2 / (1 + |x|^2)^2 delta` on `[-h, h]^2`.
pub fn sphere_chart(r0: f64, half_width: f64) -> MetricField {
    let chart = Chart::new(BoxDomain::centered_cube(2, half_width));
    let phi = sphere_phi(r0);
    conformal_metric(chart, phi, SingularSet::empty(), Regularity::Smooth)
}

/// Conformal factor of the stereographic round metric.
pub fn sphere_phi(r0: f64) -> PhiField {
    PhiField {
        phi: Arc::new(move |x: &[f64]| (2.0 * r0).ln() - (1.0 + sq(x)).ln()),
        grad: Arc::new(move |x: &[f64]| {
            let d = 1.0 + sq(x);
            x.iter().map(|v| -2.0 * v / d).collect()
        }),
        laplacian: Some(Arc::new(move |x: &[f64]| {
            let d = 1.0 + sq(x);
            -4.0 / (d * d)
        })),
    }
}

impl MetricField {
    /// Copy of the metric with analytic closures stripped, leaving only the
    /// pointwise evaluation (used to exercise finite-difference paths).
    pub fn without_closures(&self) -> MetricField {
        let mut m = self.clone();
        m.strip_closures();
        m
    }
}
