//! Scenario catalog: named metric constructions with their closed-form
//! expected values, test-field suites and per-scenario check lists.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Result};

use ricci_core::flow::builtins::{
    mollified_cone_flow, sheared_sphere_flow, shrinking_sphere_flow, static_flow,
};
use ricci_core::flow::{
    cone_preserving_flow_check, flow_identity_residual, lipschitz_limit_stability, sobolev_gate,
    tame_flow_check, TimeDependentField, TimeDependentMetric,
};
use ricci_core::geometry::builtins::{self, ConformalFactor, KahlerMetric, PhiSpec};
use ricci_core::geometry::christoffel::{christoffel_from_metric, DiffScheme};
use ricci_core::geometry::half_density::{
    plateau_field, sphere_killing_field, CoeffSpec, HalfDensityField,
};
use ricci_core::geometry::{BoxDomain, Chart, MetricField, Transition};
use ricci_core::linalg::Mat;
use ricci_core::measure::{assemble_measure_report, singular_mass_at, Ladder, MeasureConfig};
use ricci_core::qform::{
    alexandrov_q, bakry_emery_q, kahler_q, killing_defect, push_forward_field, q_form,
    q_convergence_under_perturbation, smooth_ricci_oracle, WeightFunction, WeightRegularity,
};
use ricci_core::quadrature::{
    integrability_diagnostic, integrate, QuadratureScheme, Verdict,
};
use ricci_core::rng::SplitMix64;

use crate::config::RunConfig;
use crate::report::{CheckRecord, RunReport};

const PI: f64 = std::f64::consts::PI;

/// Catalog entry: the scenario name, a one-line summary, and the sources of
/// its expected values.
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub anchors: &'static [&'static str],
}

pub const CATALOG: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "flat-2d",
        summary: "Euclidean plane: every curvature quantity vanishes",
        anchors: &["identity: flat connection", "closed-form: stretch defect 2"],
    },
    ScenarioInfo {
        name: "cone",
        summary: "planar cone |x|^(-2a) delta: vertex atom 2*pi*alpha, L1-not-L2 symbols",
        anchors: &[
            "closed-form: vertex atom 2*pi*alpha",
            "closed-form: symbols locally integrable, not square-integrable",
            "identity: quadratic combination vanishes on conformal surfaces",
        ],
    },
    ScenarioInfo {
        name: "cone-3d",
        summary: "three-dimensional cone: no vertex atom, square-integrable symbols",
        anchors: &["closed-form: vertex mass vanishes above dimension two"],
    },
    ScenarioInfo {
        name: "edge",
        summary: "edge metric exp(-2c|x1|) delta: line density 2c along the locus",
        anchors: &["closed-form: line density 2c", "independent route: 1-d reduction"],
    },
    ScenarioInfo {
        name: "glued-cones",
        summary: "two truncated cones glued along a circle: intrinsic density 2/L",
        anchors: &["closed-form: glued truncated cones density 2/L"],
    },
    ScenarioInfo {
        name: "glued-caps",
        summary: "smooth profiles glued along a circle: boundary-curvature jumps",
        anchors: &[
            "profile curves: second-fundamental-form and mean-curvature jumps",
            "closed-form: interior curvature -phi''",
        ],
    },
    ScenarioInfo {
        name: "cone-family",
        summary: "trivial cone bundle over a segment: zero-section density 2*pi*alpha",
        anchors: &["closed-form: fiberwise vertex density, normal directions only"],
    },
    ScenarioInfo {
        name: "sphere",
        summary: "round-sphere stereographic chart: smooth oracle, chart transport, rotations",
        anchors: &[
            "independent route: finite-difference curvature pairing",
            "identity: chart transport of the form",
            "closed-form: rotation generators are Killing",
        ],
    },
    ScenarioInfo {
        name: "conformal-smooth",
        summary: "smooth conformal surface: three independent evaluation routes agree",
        anchors: &[
            "independent route: surface curvature pairing",
            "independent route: complex-type pairing",
            "independent route: finite-difference curvature pairing",
        ],
    },
    ScenarioInfo {
        name: "kahler-harmonic",
        summary: "harmonic conformal factor: the complex-type pairing vanishes",
        anchors: &["identity: harmonic log-determinant"],
    },
    ScenarioInfo {
        name: "be-flat",
        summary: "flat metric with quadratic weight: drift term pairs like the identity",
        anchors: &["closed-form: weight Hessian is the identity"],
    },
    ScenarioInfo {
        name: "sphere-flow",
        summary: "shrinking round sphere: the flow identity holds to quadrature accuracy",
        anchors: &["identity: flow equation integral form"],
    },
    ScenarioInfo {
        name: "static-cone-flow",
        summary: "static cone family: fails the identity linearly in time, passes gated",
        anchors: &[
            "identity: static-family residual -2 t Q",
            "closed-form: gated fields kill the vertex pairing",
        ],
    },
    ScenarioInfo {
        name: "pulled-back-flow",
        summary: "shrinking sphere pulled back by a fixed shear: still a flow solution",
        anchors: &["identity: flow equation is diffeomorphism covariant"],
    },
    ScenarioInfo {
        name: "flow-limit",
        summary: "Lipschitz limits of flows: stability holds; smoothed cones fail the precondition",
        anchors: &["identity: residual stability under Lipschitz limits"],
    },
    ScenarioInfo {
        name: "perturbation",
        summary: "bounded perturbations of the cone connection: linear response",
        anchors: &["linear response in the perturbation sup norm"],
    },
];

pub fn find(name: &str) -> Result<&'static ScenarioInfo> {
    CATALOG
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| anyhow!("unknown scenario {name:?} (see `ricci list`)"))
}

// ---------------------------------------------------------------------------
// Built objects shared by the verbs.
// ---------------------------------------------------------------------------

/// The concrete objects a scenario provides to the checks and CLI verbs.
pub struct ScenarioData {
    pub name: String,
    pub metric: Option<MetricField>,
    pub factor: Option<ConformalFactor>,
    pub kahler: Option<KahlerMetric>,
    pub flow: Option<TimeDependentMetric>,
    pub background: Option<MetricField>,
}

impl ScenarioData {
    fn from_metric(name: &str, metric: MetricField) -> Self {
        ScenarioData {
            name: name.to_string(),
            background: Some(metric.clone()),
            metric: Some(metric),
            factor: None,
            kahler: None,
            flow: None,
        }
    }

    pub fn gamma(&self) -> Result<ricci_core::geometry::ChristoffelField> {
        let metric = self.metric.as_ref().ok_or_else(|| anyhow!("scenario has no chart metric"))?;
        Ok(christoffel_from_metric(metric, &DiffScheme::Analytic)?)
    }

    pub fn chart(&self) -> Result<&Chart> {
        self.metric
            .as_ref()
            .map(|m| &m.chart)
            .or(self.flow.as_ref().map(|f| &f.chart))
            .ok_or_else(|| anyhow!("scenario has no chart"))
    }

    /// The default field pair: unit-direction plateau bumps over most of
    /// the chart.
    pub fn default_pair(&self) -> Result<(HalfDensityField, HalfDensityField)> {
        let chart = self.chart()?;
        let n = chart.dim;
        let support = chart.domain.shrunk(0.1);
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let v = plateau_field(chart, support.clone(), 0.25, CoeffSpec::Constant(e1.clone()));
        let w = plateau_field(chart, support, 0.25, CoeffSpec::Constant(e1));
        Ok((v, w))
    }
}

pub fn build(name: &str, config: &RunConfig) -> Result<ScenarioData> {
    let data = match name {
        "flat-2d" => ScenarioData::from_metric(name, builtins::flat(2, 1.0)),
        "cone" | "perturbation" | "static-cone-flow" => {
            let alpha = config.param("alpha", 0.5);
            if alpha >= 1.0 {
                bail!("alpha must be below 1");
            }
            let metric = builtins::cone(2, alpha, 1.0);
            let mut data = ScenarioData::from_metric(name, metric.clone());
            data.flow = Some(static_flow(metric, 1.0));
            data
        }
        "cone-3d" => {
            let alpha = config.param("alpha", 0.5);
            ScenarioData::from_metric(name, builtins::cone(3, alpha, 1.0))
        }
        "edge" => {
            let c = config.param("c", 1.0);
            let (metric, factor) = builtins::edge(c, 1.0);
            let mut data = ScenarioData::from_metric(name, metric);
            data.factor = Some(factor);
            data
        }
        "glued-cones" => {
            let c = config.param("c", 0.8);
            let len = config.param("l", 2.0);
            let (metric, factor) = builtins::glued_cones(c, len, 1.0);
            let mut data = ScenarioData::from_metric(name, metric);
            data.factor = Some(factor);
            data
        }
        "glued-caps" => {
            let spec = caps_spec(config);
            let (metric, factor) = builtins::conformal2d(&spec, 1.0);
            let mut data = ScenarioData::from_metric(name, metric);
            data.factor = Some(factor);
            data
        }
        "cone-family" => {
            let alpha = config.param("alpha", 0.5);
            let len = config.param("base_length", 2.0);
            let metric = builtins::cone_family_trivial(alpha, len, 1.0);
            let mut data = ScenarioData::from_metric(name, metric);
            // Tangential/normal splitting uses the flat background product
            // metric rather than the singular family metric.
            data.background = Some(builtins::flat(3, 1.0));
            data
        }
        "sphere" => {
            let r0 = config.param("r0", 1.0);
            ScenarioData::from_metric(name, builtins::sphere_chart(r0, 2.5))
        }
        "conformal-smooth" => {
            let amp = config.param("amplitude", 1.0);
            let kahler = builtins::kahler1d(&PhiSpec::Gaussian { amplitude: amp }, 1.5);
            let mut data = ScenarioData::from_metric(name, kahler.metric.clone());
            data.factor = Some(kahler.factor.clone());
            data.kahler = Some(kahler);
            data
        }
        "kahler-harmonic" => {
            let amp = config.param("amplitude", 0.4);
            let kahler = builtins::kahler1d(&PhiSpec::Harmonic { amplitude: amp }, 1.0);
            let mut data = ScenarioData::from_metric(name, kahler.metric.clone());
            data.factor = Some(kahler.factor.clone());
            data.kahler = Some(kahler);
            data
        }
        "be-flat" => ScenarioData::from_metric(name, builtins::flat(2, 1.0)),
        "sphere-flow" => {
            let r0 = config.param("r0", 1.0);
            let flow = shrinking_sphere_flow(r0, 2.0, 0.45);
            ScenarioData {
                name: name.to_string(),
                metric: Some(flow.slice(0.0)?),
                factor: None,
                kahler: None,
                background: None,
                flow: Some(flow),
            }
        }
        "pulled-back-flow" => {
            let r0 = config.param("r0", 1.0);
            let shear = config.param("shear", 0.3);
            let flow = sheared_sphere_flow(r0, shear, 2.0, 0.45);
            ScenarioData {
                name: name.to_string(),
                metric: Some(flow.slice(0.0)?),
                factor: None,
                kahler: None,
                background: None,
                flow: Some(flow),
            }
        }
        "flow-limit" => {
            let flow = sheared_sphere_flow(1.0, 0.3, 2.0, 0.45);
            ScenarioData {
                name: name.to_string(),
                metric: Some(flow.slice(0.0)?),
                factor: None,
                kahler: None,
                background: None,
                flow: Some(flow),
            }
        }
        other => bail!("unknown scenario {other:?}"),
    };
    Ok(data)
}

fn caps_spec(config: &RunConfig) -> PhiSpec {
    PhiSpec::ProfileKink {
        b_plus: config.param("b_plus", -0.6),
        q_plus: config.param("q_plus", 0.3),
        b_minus: config.param("b_minus", 0.4),
        q_minus: config.param("q_minus", -0.2),
    }
}

fn ladder_scheme(config: &RunConfig) -> QuadratureScheme {
    // Localized extraction tolerates a lighter rule.
    let mut s = config.quadrature.scheme();
    s.order = s.order.min(4);
    s.rel_tol = s.rel_tol.max(1e-5);
    s.abs_tol = s.abs_tol.max(1e-9);
    s.max_depth = s.max_depth.min(22);
    s
}

fn measure_config(config: &RunConfig, eps0: f64, window: f64) -> MeasureConfig {
    MeasureConfig {
        ladder: Ladder { eps0, ratio: config.ladder.ratio, rungs: config.ladder.rungs },
        scheme: ladder_scheme(config),
        grid_per_axis: 4,
        fd_step: 1e-4,
        curve_samples: 3,
        curve_window: window,
        pairing_seed: config.seed,
        pairing_pairs: 5,
    }
}

// ---------------------------------------------------------------------------
// Check construction.
// ---------------------------------------------------------------------------

type CheckFn = Box<dyn FnOnce() -> Result<CheckRecord> + Send>;

/// Runs the checks on the worker pool; records are assembled in name order
/// afterward, so the report is deterministic regardless of scheduling.
fn run_checks(checks: Vec<CheckFn>) -> Result<(Vec<CheckRecord>, BTreeMap<String, f64>)> {
    use rayon::prelude::*;
    let outcomes: Result<Vec<(CheckRecord, f64)>> = checks
        .into_par_iter()
        .map(|check| {
            let start = Instant::now();
            let record = check()?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok((record, ms))
        })
        .collect();
    let mut records = Vec::new();
    let mut timing = BTreeMap::new();
    for (record, ms) in outcomes? {
        timing.insert(record.name.clone(), ms);
        records.push(record);
    }
    records.sort_by(|a, b| a.name.cmp(&b.name));
    Ok((records, timing))
}

pub fn run_scenario(name: &str, config: &RunConfig) -> Result<RunReport> {
    find(name)?;
    let checks = scenario_checks(name, config)?;
    let (records, timing) = run_checks(checks)?;
    Ok(RunReport::new(name, config.clone(), records, timing))
}

fn bump(chart: &Chart, frac: f64, dirs: Vec<f64>) -> HalfDensityField {
    plateau_field(chart, chart.domain.shrunk(frac), 0.25, CoeffSpec::Constant(dirs))
}

fn linear_bump(chart: &Chart, frac: f64) -> HalfDensityField {
    plateau_field(
        chart,
        chart.domain.shrunk(frac),
        0.25,
        CoeffSpec::Linear { c: vec![0.0; chart.dim], a: Mat::identity(chart.dim) },
    )
}

fn scenario_checks(name: &str, config: &RunConfig) -> Result<Vec<CheckFn>> {
    let cfg = config.clone();
    match name {
        "flat-2d" => flat_checks(cfg),
        "cone" => cone_checks(cfg),
        "cone-3d" => cone3d_checks(cfg),
        "edge" => edge_checks(cfg),
        "glued-cones" => glued_cones_checks(cfg),
        "glued-caps" => glued_caps_checks(cfg),
        "cone-family" => cone_family_checks(cfg),
        "sphere" => sphere_checks(cfg),
        "conformal-smooth" => conformal_smooth_checks(cfg),
        "kahler-harmonic" => kahler_harmonic_checks(cfg),
        "be-flat" => be_flat_checks(cfg),
        "sphere-flow" => sphere_flow_checks(cfg),
        "static-cone-flow" => static_cone_flow_checks(cfg),
        "pulled-back-flow" => pulled_back_flow_checks(cfg),
        "flow-limit" => flow_limit_checks(cfg),
        "perturbation" => perturbation_checks(cfg),
        other => bail!("unknown scenario {other:?}"),
    }
}

fn flat_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("flat-2d", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let v = bump(&chart, 0.1, vec![1.0, 0.0]);
            let w = bump(&chart, 0.15, vec![0.0, 1.0]);
            let q = q_form(&gamma, &v, &w, &cfg.quadrature.scheme())?;
            Ok(CheckRecord::against("form-zero", q.value, 0.0, 1e-8, "identity: flat connection"))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("flat-2d", &cfg)?;
            let gamma = data.gamma()?;
            let metric = data.metric.clone().unwrap();
            let chart = metric.chart.clone();
            let rotation = plateau_field(
                &chart,
                chart.domain.shrunk(0.05),
                0.25,
                CoeffSpec::Linear {
                    c: vec![0.0, 0.0],
                    a: Mat::from_fn(2, |i, j| {
                        if i == 0 && j == 1 {
                            -1.0
                        } else if i == 1 && j == 0 {
                            1.0
                        } else {
                            0.0
                        }
                    }),
                },
            );
            let grid = BoxDomain::centered_cube(2, 0.3).interior_grid(4);
            let d = killing_defect(&metric, &gamma, &rotation, &grid)?;
            Ok(CheckRecord::against(
                "killing-defect-rotation",
                d,
                0.0,
                1e-10,
                "closed-form: Euclidean rotations are Killing",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("flat-2d", &cfg)?;
            let gamma = data.gamma()?;
            let metric = data.metric.clone().unwrap();
            let chart = metric.chart.clone();
            let stretch = plateau_field(
                &chart,
                chart.domain.shrunk(0.05),
                0.25,
                CoeffSpec::Linear {
                    c: vec![0.0, 0.0],
                    a: Mat::from_fn(2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }),
                },
            );
            let grid = BoxDomain::centered_cube(2, 0.3).interior_grid(4);
            let d = killing_defect(&metric, &gamma, &stretch, &grid)?;
            Ok(CheckRecord::against(
                "killing-defect-stretch",
                d,
                2.0,
                1e-9,
                "closed-form: stretch defect 2",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("flat-2d", &cfg)?;
            let flow = static_flow(data.metric.clone().unwrap(), 1.0);
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.1, vec![1.0, 0.0]));
            let w = TimeDependentField::static_field(bump(&chart, 0.1, vec![0.0, 1.0]));
            let r = flow_identity_residual(&flow, &v, &w, 0.0, 0.4, &cfg.quadrature.scheme(), 8)?;
            Ok(CheckRecord::against(
                "flow-static-residual",
                r.residual.abs(),
                0.0,
                1e-6,
                "identity: flow equation integral form",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("flat-2d", &cfg)?;
            let gamma = data.gamma()?;
            let mc = measure_config(&cfg, 0.06, 0.35);
            let report = assemble_measure_report(&gamma, data.background.as_ref(), &mc)?;
            let all = report.pairing.iter().all(|p| p.passes());
            Ok(CheckRecord::condition(
                "measure-pairing",
                all,
                true,
                "identity: measure pairs back to the form",
            ))
        }));
    }
    Ok(checks)
}

fn cone_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let alpha = cfg.param("alpha", 0.5);
    let atom = 2.0 * PI * alpha;
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let ladder = Ladder { eps0: 0.07, ratio: cfg.ladder.ratio, rungs: cfg.ladder.rungs };
            let est = singular_mass_at(
                &gamma,
                &[0.0, 0.0],
                &[1.0, 0.0],
                &[1.0, 0.0],
                &ladder,
                &ladder_scheme(&cfg),
            )?;
            let trace = est
                .trace
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.value, r.error))
                .collect();
            Ok(CheckRecord::against(
                "vertex-atom",
                est.mass,
                atom,
                0.01 * atom.abs().max(1e-9),
                "closed-form: vertex atom 2*pi*alpha",
            )
            .with_trace(trace))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let verdict = integrability_diagnostic(&gamma, &ladder_scheme(&cfg))?;
            let trace = verdict.per_stratum[0]
                .gamma_l1
                .sums
                .iter()
                .enumerate()
                .map(|(i, s)| (i, *s, 0.0))
                .collect();
            Ok(CheckRecord::condition(
                "integrability-l1",
                verdict.gamma_l1 == Verdict::Converges,
                true,
                "closed-form: symbols locally integrable",
            )
            .with_trace(trace))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let verdict = integrability_diagnostic(&gamma, &ladder_scheme(&cfg))?;
            let trace = verdict.per_stratum[0]
                .gamma_l2
                .sums
                .iter()
                .enumerate()
                .map(|(i, s)| (i, *s, 0.0))
                .collect();
            Ok(CheckRecord::condition(
                "integrability-l2-diverges",
                verdict.gamma_l2 == Verdict::Diverges,
                alpha != 0.0,
                "closed-form: symbols not square-integrable",
            )
            .with_trace(trace))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let metric = data.metric.clone().unwrap();
            let combo_l1 = |x: &[f64]| -> ricci_core::Result<f64> {
                let g = gamma.eval(x)?;
                let combo = ricci_core::geometry::ChristoffelField::quadratic_combination(&g);
                let n = combo.dim();
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += combo.get(k, l).abs();
                    }
                }
                Ok(s)
            };
            let r = integrate(
                &combo_l1,
                &metric.chart.domain,
                &metric.singular,
                &ladder_scheme(&cfg),
            )?;
            Ok(CheckRecord::against(
                "quadratic-combination-mass",
                r.value,
                0.0,
                1e-10,
                "identity: quadratic combination vanishes on conformal surfaces",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let v = bump(&chart, 0.1, vec![1.0, 0.0]);
            let q = q_form(&gamma, &v, &v, &cfg.quadrature.scheme())?;
            Ok(CheckRecord::against(
                "form-vertex-pairing",
                q.value,
                atom,
                0.01 * atom.abs().max(1e-9),
                "closed-form: vertex atom 2*pi*alpha",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let v = bump(&chart, 0.1, vec![1.0, 0.0]);
            let q = q_form(&gamma, &v, &v, &cfg.quadrature.scheme())?;
            Ok(CheckRecord::against(
                "form-split-consistency",
                q.value - q.q1 - q.q2,
                0.0,
                q.split_budget().max(1e-4 * q.value.abs()),
                "identity: derivative terms integrate to zero by parts",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let v1 = bump(&chart, 0.1, vec![1.0, 0.0]);
            let v2 = bump(&chart, 0.15, vec![0.0, 1.0]);
            let w = bump(&chart, 0.12, vec![1.0, 1.0]);
            let mut rng = SplitMix64::new(cfg.seed);
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let a = rng.uniform(-2.0, 2.0);
                let b = rng.uniform(-2.0, 2.0);
                let combo = HalfDensityField::linear_combination(a, &v1, b, &v2)?;
                let lhs = q_form(&gamma, &combo, &w, &scheme)?;
                let q1 = q_form(&gamma, &v1, &w, &scheme)?;
                let q2 = q_form(&gamma, &v2, &w, &scheme)?;
                let budget =
                    (lhs.error + a.abs() * q1.error + b.abs() * q2.error).max(1e-5);
                worst = worst
                    .max((lhs.value - a * q1.value - b * q2.value).abs() / budget);
            }
            Ok(CheckRecord::against(
                "bilinearity",
                worst,
                0.0,
                1.0,
                "identity: the form is bilinear (deviation per error budget)",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let v = bump(&chart, 0.1, vec![1.0, 0.5]);
            let w = bump(&chart, 0.15, vec![-0.3, 1.0]);
            let a = q_form(&gamma, &v, &w, &scheme)?;
            let b = q_form(&gamma, &w, &v, &scheme)?;
            Ok(CheckRecord::against(
                "symmetry",
                a.value - b.value,
                0.0,
                (a.error + b.error).max(1e-7),
                "identity: the form pairs against a symmetric tensor",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let ungated = bump(&chart, 0.1, vec![1.0, 0.0]);
            let gate = sobolev_gate(&gamma, &ungated, &scheme)?;
            Ok(CheckRecord::condition(
                "sobolev-gate-ungated-infinite",
                gate.finite,
                false,
                "closed-form: nonvanishing coefficients force infinite energy",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let gated = linear_bump(&chart, 0.1);
            let gate = sobolev_gate(&gamma, &gated, &scheme)?;
            Ok(CheckRecord::condition(
                "sobolev-gate-gated-finite",
                gate.finite,
                true,
                "closed-form: linearly vanishing coefficients have finite energy",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.1, vec![1.0, 0.0]));
            let report =
                tame_flow_check(&flow, &[(v.clone(), v)], &cfg.times, &cfg.quadrature.scheme(), 8)?;
            Ok(CheckRecord::condition(
                "flow-tame-fails",
                report.pass,
                false,
                "identity: static-family residual -2 t Q",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let gated = TimeDependentField::static_field(linear_bump(&chart, 0.1));
            let ungated = TimeDependentField::static_field(bump(&chart, 0.1, vec![1.0, 0.0]));
            let report = cone_preserving_flow_check(
                &flow,
                &[(gated.clone(), gated), (ungated.clone(), ungated)],
                &cfg.times,
                &cfg.quadrature.scheme(),
                8,
            )?;
            let worst = report
                .records
                .iter()
                .map(|r| r.residual.abs() / r.scale.max(1e-4))
                .fold(0.0f64, f64::max);
            let gate_ok = report.gated_out == vec![1];
            Ok(CheckRecord::against(
                "flow-cone-preserving-residual",
                if gate_ok { worst } else { f64::INFINITY },
                0.0,
                1e-5,
                "closed-form: gated fields kill the vertex pairing",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone", &cfg)?;
            let gamma = data.gamma()?;
            let mc = measure_config(&cfg, 0.07, 0.35);
            let report = assemble_measure_report(&gamma, data.background.as_ref(), &mc)?;
            let all = report.pairing.iter().all(|p| p.passes());
            Ok(CheckRecord::condition(
                "measure-pairing",
                all,
                true,
                "identity: measure pairs back to the form",
            ))
        }));
    }
    Ok(checks)
}

fn cone3d_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let alpha = cfg.param("alpha", 0.5);
    let planar = 2.0 * PI * alpha;
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone-3d", &cfg)?;
            let gamma = data.gamma()?;
            let ladder = Ladder { eps0: 0.07, ratio: cfg.ladder.ratio, rungs: cfg.ladder.rungs };
            let est = singular_mass_at(
                &gamma,
                &[0.0, 0.0, 0.0],
                &[1.0, 0.0, 0.0],
                &[1.0, 0.0, 0.0],
                &ladder,
                &ladder_scheme(&cfg),
            )?;
            let trace = est
                .trace
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.value, r.error))
                .collect();
            Ok(CheckRecord::against(
                "vertex-atom-suppressed",
                est.mass.abs(),
                0.0,
                1e-3 * planar.abs(),
                "closed-form: vertex mass vanishes above dimension two",
            )
            .with_trace(trace))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone-3d", &cfg)?;
            let gamma = data.gamma()?;
            let verdict = integrability_diagnostic(&gamma, &ladder_scheme(&cfg))?;
            Ok(CheckRecord::condition(
                "integrability-l2-converges",
                verdict.gamma_l2 == Verdict::Converges,
                true,
                "closed-form: symbols square-integrable above dimension two",
            ))
        }));
    }
    Ok(checks)
}

fn edge_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let c = cfg.param("c", 1.0);
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("edge", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let psi = bump(&chart, 0.1, vec![1.0, 0.0]);
            let q = q_form(&gamma, &psi, &psi, &cfg.quadrature.scheme())?;
            let lo = psi.support.lo[1];
            let hi = psi.support.hi[1];
            let mut g = |t: f64| {
                let v = psi.coeffs_at(&[0.0, t]);
                v[0] * v[0]
            };
            let want =
                2.0 * c * ricci_core::quadrature::adaptive_1d(&mut g, lo, hi, 10, 1e-12, 14).0;
            Ok(CheckRecord::against(
                "form-line-reduction",
                q.value,
                want,
                0.02 * want.abs(),
                "independent route: 1-d reduction",
            ))
        }));
    }
    for (check_name, dirs) in [
        ("curve-density-normal", vec![1.0, 0.0]),
        ("curve-density-tangential", vec![0.0, 1.0]),
    ] {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("edge", &cfg)?;
            let gamma = data.gamma()?;
            let stratum = data.metric.as_ref().unwrap().singular.strata[0].clone();
            let ladder = Ladder { eps0: 0.045, ratio: cfg.ladder.ratio, rungs: cfg.ladder.rungs };
            let d = ricci_core::measure::curve_density_along(
                &gamma,
                &stratum,
                &[0.0],
                &dirs,
                &dirs,
                0.35,
                &ladder,
                &ladder_scheme(&cfg),
            )?;
            let trace = d[0]
                .trace
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.value, r.error))
                .collect();
            Ok(CheckRecord::against(
                check_name,
                d[0].density,
                2.0 * c,
                0.02 * (2.0 * c).abs(),
                "closed-form: line density 2c",
            )
            .with_trace(trace))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("edge", &cfg)?;
            let gamma = data.gamma()?;
            let verdict = integrability_diagnostic(&gamma, &ladder_scheme(&cfg))?;
            Ok(CheckRecord::condition(
                "integrability-l2-converges",
                verdict.gamma_l2 == Verdict::Converges,
                true,
                "closed-form: bounded symbols",
            ))
        }));
    }
    Ok(checks)
}

fn glued_cones_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let len = cfg.param("l", 2.0);
    let want = 2.0 / len;
    let mut checks: Vec<CheckFn> = Vec::new();
    for (check_name, tangential) in
        [("intrinsic-density-tangential", true), ("intrinsic-density-normal", false)]
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("glued-cones", &cfg)?;
            let gamma = data.gamma()?;
            let mc = measure_config(&cfg, 0.045, 0.35);
            let report = assemble_measure_report(&gamma, data.background.as_ref(), &mc)?;
            let sample = &report.curves[0].samples[1];
            let value = if tangential {
                sample.tangential_intrinsic.unwrap()
            } else {
                sample.normal_intrinsic.unwrap()
            };
            Ok(CheckRecord::against(
                check_name,
                value,
                want,
                0.02 * want.abs(),
                "closed-form: glued truncated cones density 2/L",
            ))
        }));
    }
    Ok(checks)
}

fn glued_caps_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let b_plus = cfg.param("b_plus", -0.6);
    let q_plus = cfg.param("q_plus", 0.3);
    let b_minus = cfg.param("b_minus", 0.4);
    let q_minus = cfg.param("q_minus", -0.2);
    // Boundary curvature of each profile toward the shared normal is
    // -phi'(0+-) exp(-phi(0)); the singular density is the jump.
    let jump = (b_minus - b_plus) * (-0.0f64).exp();
    let mut checks: Vec<CheckFn> = Vec::new();
    for (check_name, dirs) in [
        ("second-fundamental-jump-tangential", vec![0.0, 1.0]),
        ("mean-curvature-jump-normal", vec![1.0, 0.0]),
    ] {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("glued-caps", &cfg)?;
            let gamma = data.gamma()?;
            let stratum = data.metric.as_ref().unwrap().singular.strata[0].clone();
            let ladder = Ladder { eps0: 0.045, ratio: cfg.ladder.ratio, rungs: 6 };
            let d = ricci_core::measure::curve_density_along(
                &gamma,
                &stratum,
                &[0.1],
                &dirs,
                &dirs,
                0.3,
                &ladder,
                &ladder_scheme(&cfg),
            )?;
            Ok(CheckRecord::against(
                check_name,
                d[0].density,
                jump,
                0.02 * jump.abs(),
                "profile curves: boundary-curvature jumps",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("glued-caps", &cfg)?;
            let gamma = data.gamma()?;
            let grid = [vec![0.5, 0.1], vec![-0.5, -0.2]];
            let ac = ricci_core::measure::ac_density_grid(&gamma, &grid, 1e-4)?;
            let expected = [-2.0 * q_plus, -2.0 * q_minus];
            let mut worst: f64 = 0.0;
            for ((_, m), want) in ac.iter().zip(expected) {
                worst = worst.max((m.get(0, 0) - want).abs() / (1.0 + want.abs()));
            }
            Ok(CheckRecord::against(
                "interior-curvature",
                worst,
                0.0,
                1e-3,
                "closed-form: interior curvature -phi''",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("glued-caps", &cfg)?;
            let gamma = data.gamma()?;
            let mc = measure_config(&cfg, 0.045, 0.35);
            let report = assemble_measure_report(&gamma, data.background.as_ref(), &mc)?;
            let all = report.pairing.iter().all(|p| p.passes());
            Ok(CheckRecord::condition(
                "measure-pairing",
                all,
                true,
                "identity: measure pairs back to the form",
            ))
        }));
    }
    Ok(checks)
}

fn cone_family_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let alpha = cfg.param("alpha", 0.5);
    let want = 2.0 * PI * alpha;
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone-family", &cfg)?;
            let gamma = data.gamma()?;
            let stratum = data.metric.as_ref().unwrap().singular.strata[0].clone();
            let ladder = Ladder { eps0: 0.06, ratio: cfg.ladder.ratio, rungs: cfg.ladder.rungs };
            let d = ricci_core::measure::curve_density_along(
                &gamma,
                &stratum,
                &[1.0],
                &[0.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0],
                0.4,
                &ladder,
                &ladder_scheme(&cfg),
            )?;
            let trace = d[0]
                .trace
                .iter()
                .enumerate()
                .map(|(i, r)| (i, r.value, r.error))
                .collect();
            Ok(CheckRecord::against(
                "zero-section-normal-density",
                d[0].density,
                want,
                0.02 * want.abs(),
                "closed-form: fiberwise vertex density, normal directions",
            )
            .with_trace(trace))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("cone-family", &cfg)?;
            let gamma = data.gamma()?;
            let stratum = data.metric.as_ref().unwrap().singular.strata[0].clone();
            let ladder = Ladder { eps0: 0.06, ratio: cfg.ladder.ratio, rungs: cfg.ladder.rungs };
            let d = ricci_core::measure::curve_density_along(
                &gamma,
                &stratum,
                &[1.0],
                &[1.0, 0.0, 0.0],
                &[1.0, 0.0, 0.0],
                0.4,
                &ladder,
                &ladder_scheme(&cfg),
            )?;
            Ok(CheckRecord::against(
                "zero-section-tangential-density",
                d[0].density.abs(),
                0.0,
                1e-3 * want.abs(),
                "closed-form: no tangential density along the zero section",
            ))
        }));
    }
    Ok(checks)
}

fn cubic_shear_transition() -> Transition {
    let fwd = Arc::new(|x: &[f64]| vec![x[0] + 0.2 * x[1] * x[1], x[1] + 0.05 * x[1] * x[1] * x[1]]);
    let inv = Arc::new(|y: &[f64]| {
        let mut u = y[1];
        for _ in 0..60 {
            let f = u + 0.05 * u * u * u - y[1];
            let df = 1.0 + 0.15 * u * u;
            let du = f / df;
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
    Transition::new(fwd, inv, jac).with_roundtrip_tol(1e-10)
}

fn sphere_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let r0 = cfg.param("r0", 1.0);
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let mut rng = SplitMix64::new(cfg.seed);
            let mut worst: f64 = 0.0;
            for _ in 0..10 {
                let v = random_bump(&chart, &mut rng);
                let w = random_bump(&chart, &mut rng);
                let q = q_form(&gamma, &v, &w, &scheme)?;
                let oracle = smooth_ricci_oracle(&gamma, &v, &w, &scheme, 1e-4)?;
                let tol = (1e-4 * q.value.abs()).max(1e-6);
                worst = worst.max((q.value - oracle.value).abs() / tol);
            }
            Ok(CheckRecord::against(
                "oracle-equivalence",
                worst,
                0.0,
                1.0,
                "independent route: finite-difference curvature pairing (per tolerance)",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere", &cfg)?;
            let metric = data.metric.clone().unwrap();
            let mut chart_a = metric.chart.clone();
            chart_a.transition = Some(cubic_shear_transition());
            let chart_b = Chart::new(BoxDomain::new(vec![-2.5, -3.2], vec![3.8, 3.2]).unwrap());
            let mut gamma_a = christoffel_from_metric(&metric, &DiffScheme::Analytic)?;
            gamma_a.chart = chart_a.clone();
            let gamma_b = ricci_core::geometry::christoffel_transform(&gamma_a, &chart_b)?;
            let scheme = cfg.quadrature.scheme();
            let mut rng = SplitMix64::new(cfg.seed ^ 0x17);
            let v = random_bump(&chart_a, &mut rng);
            let w = random_bump(&chart_a, &mut rng);
            let q_a = q_form(&gamma_a, &v, &w, &scheme)?;
            let v_b = push_forward_field(&v, &chart_a, &chart_b)?;
            let w_b = push_forward_field(&w, &chart_a, &chart_b)?;
            let q_b = q_form(&gamma_b, &v_b, &w_b, &scheme)?;
            Ok(CheckRecord::against(
                "chart-invariance",
                q_b.value,
                q_a.value,
                0.005 * q_a.value.abs().max(1e-5),
                "identity: chart transport of the form",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere", &cfg)?;
            let gamma = data.gamma()?;
            let metric = data.metric.clone().unwrap();
            let grid = metric.chart.domain.shrunk(0.05).interior_grid(5);
            let mut worst: f64 = 0.0;
            for which in 0..3 {
                let v = sphere_killing_field(&metric.chart, r0, which);
                worst = worst.max(killing_defect(&metric, &gamma, &v, &grid)?);
            }
            Ok(CheckRecord::against(
                "killing-defect",
                worst,
                0.0,
                1e-8,
                "closed-form: rotation generators are Killing",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere", &cfg)?;
            let gamma = data.gamma()?;
            let metric = data.metric.clone().unwrap();
            let scheme = cfg.quadrature.scheme();
            let mut min_pairing = f64::INFINITY;
            for which in 0..3 {
                let v = sphere_killing_field(&metric.chart, r0, which);
                let q = q_form(&gamma, &v, &v, &scheme)?;
                min_pairing = min_pairing.min(q.value);
            }
            Ok(CheckRecord::condition(
                "killing-self-pairing-nonnegative",
                min_pairing >= -scheme.abs_tol,
                true,
                "identity: Killing fields have nonnegative self-pairing",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere", &cfg)?;
            let gamma = data.gamma()?;
            let metric = data.metric.clone().unwrap();
            let grid = metric.chart.domain.shrunk(0.1).interior_grid(4);
            let samples = ricci_core::measure::ac_density_grid(&gamma, &grid, 1e-4)?;
            let kappa = 1.0 / (r0 * r0);
            let mut worst: f64 = 0.0;
            for (p, m) in &samples {
                let g = metric.eval(p);
                for i in 0..2 {
                    for j in 0..2 {
                        let want = kappa * g.get(i, j);
                        worst =
                            worst.max((m.get(i, j) - want).abs() / (1.0 + want.abs()));
                    }
                }
            }
            Ok(CheckRecord::against(
                "curvature-grid-matches-metric",
                worst,
                0.0,
                1e-3,
                "closed-form: constant-curvature pairing",
            ))
        }));
    }
    Ok(checks)
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

fn conformal_smooth_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("conformal-smooth", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let factor = data.factor.clone().unwrap();
            let scheme = cfg.quadrature.scheme();
            let v = bump(&chart, 0.12, vec![1.0, 0.2]);
            let w = bump(&chart, 0.18, vec![-0.4, 1.0]);
            let direct = q_form(&gamma, &v, &w, &scheme)?;
            let surface = alexandrov_q(
                &factor,
                &v,
                &w,
                &data.metric.as_ref().unwrap().singular,
                &scheme,
            )?;
            Ok(CheckRecord::against(
                "surface-pairing-vs-form",
                surface.value,
                direct.value,
                1e-4 * direct.value.abs().max(1e-6),
                "independent route: surface curvature pairing",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("conformal-smooth", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let kahler = data.kahler.clone().unwrap();
            let scheme = cfg.quadrature.scheme();
            let v = bump(&chart, 0.12, vec![1.0, -0.3]);
            let w = bump(&chart, 0.18, vec![0.4, 1.0]);
            let direct = q_form(&gamma, &v, &w, &scheme)?;
            let complex = kahler_q(&kahler, &v, &w, &scheme)?;
            Ok(CheckRecord::against(
                "complex-pairing-vs-form",
                complex.value,
                direct.value,
                1e-4 * direct.value.abs().max(1e-6),
                "independent route: complex-type pairing",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("conformal-smooth", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let v = bump(&chart, 0.12, vec![1.0, 0.0]);
            let w = bump(&chart, 0.18, vec![0.0, 1.0]);
            let direct = q_form(&gamma, &v, &w, &scheme)?;
            let oracle = smooth_ricci_oracle(&gamma, &v, &w, &scheme, 1e-4)?;
            Ok(CheckRecord::against(
                "oracle-vs-form",
                oracle.value,
                direct.value,
                1e-4 * direct.value.abs().max(1e-6),
                "independent route: finite-difference curvature pairing",
            ))
        }));
    }
    Ok(checks)
}

fn kahler_harmonic_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("kahler-harmonic", &cfg)?;
            let kahler = data.kahler.clone().unwrap();
            let chart = data.chart()?.clone();
            let v = bump(&chart, 0.12, vec![1.0, 0.5]);
            let r = kahler_q(&kahler, &v, &v, &cfg.quadrature.scheme())?;
            Ok(CheckRecord::against(
                "complex-pairing-zero",
                r.value,
                0.0,
                1e-10,
                "identity: harmonic log-determinant",
            ))
        }));
    }
    Ok(checks)
}

fn be_flat_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    let quadratic_weight = || {
        WeightFunction::new(
            Arc::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            WeightRegularity::Semiconvex,
        )
        .with_grad(Arc::new(|x: &[f64]| x.to_vec()))
        .with_hessian(Arc::new(|x: &[f64]| Mat::identity(x.len())))
    };
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("be-flat", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let v = bump(&chart, 0.1, vec![1.0, 0.0]);
            let weighted = bakry_emery_q(&gamma, &quadratic_weight(), &v, &v, &scheme)?;
            let pairing = |x: &[f64]| -> ricci_core::Result<f64> {
                let a = v.coeffs_at(x);
                Ok(a.iter().map(|c| c * c).sum())
            };
            let want = integrate(
                &pairing,
                &v.support,
                &ricci_core::geometry::SingularSet::empty(),
                &scheme,
            )?;
            Ok(CheckRecord::against(
                "weighted-form-identity-pairing",
                weighted.value,
                want.value,
                0.005 * want.value.abs(),
                "closed-form: weight Hessian is the identity",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("be-flat", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let scheme = cfg.quadrature.scheme();
            let v = bump(&chart, 0.1, vec![0.3, 1.0]);
            let weighted = bakry_emery_q(&gamma, &quadratic_weight(), &v, &v, &scheme)?;
            let oracle = ricci_core::qform::bakry_emery_oracle(
                &gamma,
                &quadratic_weight(),
                &v,
                &v,
                &scheme,
                1e-4,
            )?;
            Ok(CheckRecord::against(
                "weighted-form-vs-oracle",
                weighted.value,
                oracle,
                0.005 * oracle.abs().max(1e-8),
                "independent route: curvature plus weight Hessian",
            ))
        }));
    }
    Ok(checks)
}

fn sphere_flow_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    for &t in &[0.1, 0.2, 0.4] {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.15, vec![1.0, 0.3]));
            let w = TimeDependentField::static_field(bump(&chart, 0.15, vec![-0.2, 1.0]));
            let r = flow_identity_residual(&flow, &v, &w, 0.0, t, &cfg.quadrature.scheme(), 8)?;
            Ok(CheckRecord::against(
                &format!("flow-residual-t{t}"),
                r.residual.abs(),
                0.0,
                1e-3 * r.scale().max(1e-9),
                "identity: flow equation integral form",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.15, vec![1.0, 0.0]));
            let w = TimeDependentField::static_field(bump(&chart, 0.15, vec![0.0, 1.0]));
            let sch = cfg.quadrature.scheme();
            let full = flow_identity_residual(&flow, &v, &w, 0.0, 0.4, &sch, 8)?;
            let first = flow_identity_residual(&flow, &v, &w, 0.0, 0.15, &sch, 8)?;
            let second = flow_identity_residual(&flow, &v, &w, 0.15, 0.4, &sch, 8)?;
            let budget =
                full.spatial_error + first.spatial_error + second.spatial_error + 1e-9;
            Ok(CheckRecord::against(
                "restart-composition",
                first.residual + second.residual,
                full.residual,
                budget,
                "identity: the window composes",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("sphere-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.15, vec![1.0, 0.0]));
            let w = TimeDependentField::static_field(bump(&chart, 0.15, vec![0.0, 1.0]));
            let sch = cfg.quadrature.scheme();
            let r8 = flow_identity_residual(&flow, &v, &w, 0.0, 0.3, &sch, 8)?;
            let r16 = flow_identity_residual(&flow, &v, &w, 0.0, 0.3, &sch, 16)?;
            let bar = (r8.time_error + r8.spatial_error).max(1e-9);
            Ok(CheckRecord::against(
                "time-order-stability",
                (r8.residual - r16.residual).abs(),
                0.0,
                0.1 * bar,
                "identity: residual independent of time-rule order",
            ))
        }));
    }
    Ok(checks)
}

fn static_cone_flow_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("static-cone-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let gamma = data.gamma()?;
            let chart = flow.chart.clone();
            let field = bump(&chart, 0.1, vec![1.0, 0.0]);
            let q = q_form(&gamma, &field, &field, &cfg.quadrature.scheme())?.value;
            let v = TimeDependentField::static_field(field);
            let times = &cfg.times;
            let mut residuals = Vec::new();
            for &t in times {
                let r =
                    flow_identity_residual(&flow, &v, &v, 0.0, t, &cfg.quadrature.scheme(), 8)?;
                residuals.push(r.residual);
            }
            let sxx: f64 = times.iter().map(|t| t * t).sum();
            let sxy: f64 = times.iter().zip(&residuals).map(|(t, r)| t * r).sum();
            let slope = sxy / sxx;
            Ok(CheckRecord::against(
                "residual-slope",
                slope,
                -2.0 * q,
                0.01 * (2.0 * q).abs(),
                "identity: static-family residual -2 t Q",
            )
            .with_trace(
                times
                    .iter()
                    .zip(&residuals)
                    .enumerate()
                    .map(|(i, (_t, r))| (i, *r, 0.0))
                    .collect(),
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("static-cone-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let field = bump(&chart, 0.1, vec![1.0, 0.0]);
            let v = TimeDependentField::static_field(field);
            let times = &cfg.times;
            let mut residuals = Vec::new();
            for &t in times {
                let r =
                    flow_identity_residual(&flow, &v, &v, 0.0, t, &cfg.quadrature.scheme(), 8)?;
                residuals.push(r.residual);
            }
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
            let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
            Ok(CheckRecord::against(
                "residual-linearity",
                r2,
                1.0,
                1e-3,
                "identity: static-family residual is linear in time",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("static-cone-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.1, vec![1.0, 0.0]));
            let report =
                tame_flow_check(&flow, &[(v.clone(), v)], &cfg.times, &cfg.quadrature.scheme(), 8)?;
            Ok(CheckRecord::condition(
                "flow-tame-fails",
                report.pass,
                false,
                "identity: static curved families are not flow solutions",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("static-cone-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let gated = TimeDependentField::static_field(linear_bump(&chart, 0.1));
            let report = cone_preserving_flow_check(
                &flow,
                &[(gated.clone(), gated)],
                &cfg.times,
                &cfg.quadrature.scheme(),
                8,
            )?;
            let worst = report
                .records
                .iter()
                .map(|r| r.residual.abs() / r.scale.max(1e-4))
                .fold(0.0f64, f64::max);
            Ok(CheckRecord::against(
                "flow-cone-preserving-residual",
                worst,
                0.0,
                1e-5,
                "closed-form: gated fields kill the vertex pairing",
            ))
        }));
    }
    Ok(checks)
}

fn pulled_back_flow_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("pulled-back-flow", &cfg)?;
            let flow = data.flow.clone().unwrap();
            let chart = flow.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.15, vec![1.0, 0.0]));
            let w = TimeDependentField::static_field(bump(&chart, 0.15, vec![0.4, 1.0]));
            let report =
                tame_flow_check(&flow, &[(v, w)], &[0.1, 0.3], &cfg.quadrature.scheme(), 8)?;
            let worst = report
                .records
                .iter()
                .map(|r| r.residual.abs() / r.scale.max(1e-9))
                .fold(0.0f64, f64::max);
            Ok(CheckRecord::against(
                "flow-residual-relative",
                worst,
                0.0,
                1e-3,
                "identity: flow equation is diffeomorphism covariant",
            ))
        }));
    }
    Ok(checks)
}

fn flow_limit_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let members: Vec<_> = [1.0, 2.0, 4.0]
                .iter()
                .map(|i| sheared_sphere_flow(1.0, 0.3 + 0.1 / i, 2.0, 0.45))
                .collect();
            let limit = sheared_sphere_flow(1.0, 0.3, 2.0, 0.45);
            let chart = limit.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.2, vec![1.0, 0.0]));
            let w = TimeDependentField::static_field(bump(&chart, 0.2, vec![0.0, 1.0]));
            let grid = BoxDomain::centered_cube(2, 1.2).interior_grid(3);
            let report = lipschitz_limit_stability(
                &members,
                &limit,
                &[(v, w)],
                &[0.1, 0.3],
                &cfg.quadrature.scheme(),
                8,
                &grid,
                1e-4,
            )?;
            Ok(CheckRecord::condition(
                "shear-limit-stability",
                report.precondition_ok && report.limit_pass,
                true,
                "identity: residual stability under Lipschitz limits",
            ))
        }));
    }
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let members: Vec<_> = [0.2, 0.1]
                .iter()
                .map(|eps| mollified_cone_flow(0.5, *eps, 1.0, 1.0))
                .collect();
            let limit = static_flow(builtins::cone(2, 0.5, 1.0), 1.0);
            let chart = limit.chart.clone();
            let v = TimeDependentField::static_field(bump(&chart, 0.1, vec![1.0, 0.0]));
            let grid = BoxDomain::centered_cube(2, 0.8).interior_grid(3);
            let report = lipschitz_limit_stability(
                &members,
                &limit,
                &[(v.clone(), v)],
                &[0.1, 0.3],
                &cfg.quadrature.scheme(),
                8,
                &grid,
                1e-4,
            )?;
            // Smoothed cones are static curved metrics, not flow solutions:
            // the precondition must fail, which is why the cone limit does
            // not contradict stability.
            Ok(CheckRecord::condition(
                "smoothed-cones-fail-precondition",
                report.precondition_ok,
                false,
                "identity: smoothed cones are not flow solutions",
            ))
        }));
    }
    Ok(checks)
}

fn perturbation_checks(cfg: RunConfig) -> Result<Vec<CheckFn>> {
    let mut checks: Vec<CheckFn> = Vec::new();
    {
        let cfg = cfg.clone();
        checks.push(Box::new(move || {
            let data = build("perturbation", &cfg)?;
            let gamma = data.gamma()?;
            let chart = data.chart()?.clone();
            let mut t0 = ricci_core::linalg::Tensor3::zeros(2);
            t0.set(0, 0, 0, 0.02);
            t0.set(1, 0, 1, 0.02);
            t0.set(1, 1, 0, 0.02);
            let base =
                ricci_core::geometry::ConnectionPerturbation::constant(chart.clone(), t0)?;
            let perts: Vec<_> =
                [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|r| base.scaled(1.0 / r)).collect();
            // Off-center supports keep the connection-linear response from
            // cancelling by parity.
            let v = plateau_field(
                &chart,
                BoxDomain::new(vec![-0.5, -0.85], vec![0.9, 0.55]).unwrap(),
                0.25,
                CoeffSpec::Constant(vec![1.0, 0.0]),
            );
            let w = plateau_field(
                &chart,
                BoxDomain::new(vec![-0.9, -0.5], vec![0.55, 0.85]).unwrap(),
                0.25,
                CoeffSpec::Constant(vec![0.4, 1.0]),
            );
            let conv = q_convergence_under_perturbation(
                &gamma,
                &perts,
                &v,
                &w,
                &cfg.quadrature.scheme(),
            )?;
            let (_slope, r2) = conv.linear_fit();
            let trace = conv
                .perturbed
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.value - conv.baseline, p.error))
                .collect();
            Ok(CheckRecord::against(
                "linear-response-fit",
                r2,
                1.0,
                0.01,
                "linear response in the perturbation sup norm",
            )
            .with_trace(trace))
        }));
    }
    Ok(checks)
}
