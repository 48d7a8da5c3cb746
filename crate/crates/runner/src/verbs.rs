//! Evaluation verbs: each takes a built scenario and the run configuration
//! and emits a JSON-serializable record. The CLI maps subcommands onto these
//! and derives its exit code from the `pass` summaries.

use anyhow::{anyhow, Result};
use serde::Serialize;
use serde_json::json;

use ricci_core::flow::{flow_identity_residual, sobolev_gate, TimeDependentField};
use ricci_core::geometry::half_density::HalfDensityField;
use ricci_core::measure::assemble_measure_report;
use ricci_core::qform::{
    alexandrov_q, bakry_emery_q, kahler_q, killing_defect, q_form, WeightFunction,
    WeightRegularity,
};

use crate::config::RunConfig;
use crate::scenario::{build, ScenarioData};

#[derive(Serialize)]
pub struct VerbOutput {
    pub scenario: String,
    pub verb: String,
    pub record: serde_json::Value,
    /// `None` when the verb has no pass/fail meaning.
    pub pass: Option<bool>,
    /// Ladder/shell traces written as `trace_<name>.csv` under `--out`.
    #[serde(skip)]
    pub traces: Vec<(String, Vec<(usize, f64, f64)>)>,
}

fn field_pair(data: &ScenarioData) -> Result<(HalfDensityField, HalfDensityField)> {
    data.default_pair()
}

pub fn qform_verb(name: &str, config: &RunConfig, with_split: bool) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let gamma = data.gamma()?;
    let (v, w) = field_pair(&data)?;
    let q = q_form(&gamma, &v, &w, &config.quadrature.scheme())?;
    let verdicts = ricci_core::quadrature::integrability_diagnostic(
        &gamma,
        &config.quadrature.scheme(),
    )?;
    let record = json!({
        "value": q.value,
        "error": q.error,
        "split": { "q1": q.q1, "q2": q.q2, "q1_error": q.q1_error, "q2_error": q.q2_error },
        "converged": q.converged,
        "verdicts": {
            "gamma_l1": verdicts.gamma_l1,
            "gamma_l2": verdicts.gamma_l2,
            "quadratic_l1": verdicts.quadratic_l1,
        },
    });
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: if with_split { "qform-split" } else { "qform" }.to_string(),
        record,
        pass: Some(q.converged),
        traces: vec![],
    })
}

pub fn qform_be_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let gamma = data.gamma()?;
    let (v, w) = field_pair(&data)?;
    let weight = WeightFunction::new(
        std::sync::Arc::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>()),
        WeightRegularity::Semiconvex,
    )
    .with_grad(std::sync::Arc::new(|x: &[f64]| x.to_vec()));
    let q = bakry_emery_q(&gamma, &weight, &v, &w, &config.quadrature.scheme())?;
    let record = json!({
        "value": q.value,
        "error": q.error,
        "split": { "plain": q.q1, "drift": q.q2 },
        "converged": q.converged,
    });
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "qform-be".to_string(),
        record,
        pass: Some(q.converged),
        traces: vec![],
    })
}

pub fn qform_kahler_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let kahler = data
        .kahler
        .as_ref()
        .ok_or_else(|| anyhow!("scenario {name:?} has no complex structure"))?;
    let (v, w) = field_pair(&data)?;
    let r = kahler_q(kahler, &v, &w, &config.quadrature.scheme())?;
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "qform-kahler".to_string(),
        record: json!({ "value": r.value, "error": r.error, "converged": r.converged }),
        pass: Some(r.converged),
        traces: vec![],
    })
}

pub fn qform_alexandrov_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let factor = data
        .factor
        .as_ref()
        .ok_or_else(|| anyhow!("scenario {name:?} has no conformal factor"))?;
    let singular = data
        .metric
        .as_ref()
        .map(|m| m.singular.clone())
        .unwrap_or_default();
    let (v, w) = field_pair(&data)?;
    let r = alexandrov_q(factor, &v, &w, &singular, &config.quadrature.scheme())?;
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "qform-alexandrov".to_string(),
        record: json!({
            "value": r.value,
            "error": r.error,
            "atom_part": r.atom_part,
            "line_part": r.line_part,
            "ac_part": r.ac_part,
        }),
        pass: None,
        traces: vec![],
    })
}

pub fn killing_defect_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let metric = data
        .metric
        .as_ref()
        .ok_or_else(|| anyhow!("scenario {name:?} has no chart metric"))?;
    let gamma = data.gamma()?;
    let (v, _) = field_pair(&data)?;
    let grid = metric.chart.domain.shrunk(0.2).interior_grid(4);
    let d = killing_defect(metric, &gamma, &v, &grid)?;
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "killing-defect".to_string(),
        record: json!({ "defect": d, "grid_points": grid.len() }),
        pass: None,
        traces: vec![],
    })
}

pub fn ricci_measure_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let gamma = data.gamma()?;
    let mc = ricci_core::measure::MeasureConfig {
        ladder: config.ladder.ladder(),
        scheme: {
            let mut s = config.quadrature.scheme();
            s.order = s.order.min(4);
            s.rel_tol = s.rel_tol.max(1e-5);
            s.max_depth = s.max_depth.min(22);
            s
        },
        pairing_seed: config.seed,
        ..Default::default()
    };
    let report = assemble_measure_report(&gamma, data.background.as_ref(), &mc)?;
    let pass = report.pairing.iter().all(|p| p.passes());
    let mut traces = Vec::new();
    for atom in &report.atoms {
        for (i, j, rungs) in &atom.traces {
            traces.push((
                format!("atom{}_{}{}", atom.stratum, i, j),
                rungs.iter().enumerate().map(|(k, r)| (k, r.value, r.error)).collect(),
            ));
        }
    }
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "ricci-measure".to_string(),
        record: serde_json::to_value(&report)?,
        pass: Some(pass),
        traces,
    })
}

pub fn flow_check_verb(name: &str, config: &RunConfig, gated: bool) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let flow = data
        .flow
        .clone()
        .ok_or_else(|| anyhow!("scenario {name:?} has no metric family"))?;
    let chart = flow.chart.clone();
    let (v, w) = data.default_pair()?;
    let suite = vec![(
        TimeDependentField::static_field(v),
        TimeDependentField::static_field(w),
    )];
    let scheme = config.quadrature.scheme();
    if gated {
        let report = ricci_core::flow::cone_preserving_flow_check(
            &flow,
            &suite,
            &config.times,
            &scheme,
            8,
        )?;
        let pass = report.pass;
        Ok(VerbOutput {
            scenario: name.to_string(),
            verb: "flow-check-gated".to_string(),
            record: serde_json::to_value(&report)?,
            pass: Some(pass),
            traces: vec![],
        })
    } else {
        let report = ricci_core::flow::tame_flow_check(&flow, &suite, &config.times, &scheme, 8)?;
        let pass = report.pass;
        let _ = chart;
        Ok(VerbOutput {
            scenario: name.to_string(),
            verb: "flow-check".to_string(),
            record: serde_json::to_value(&report)?,
            pass: Some(pass),
            traces: vec![],
        })
    }
}

pub fn flow_residual_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let flow = data
        .flow
        .clone()
        .ok_or_else(|| anyhow!("scenario {name:?} has no metric family"))?;
    let (v, w) = data.default_pair()?;
    let v = TimeDependentField::static_field(v);
    let w = TimeDependentField::static_field(w);
    let scheme = config.quadrature.scheme();
    let mut records = Vec::new();
    let mut pass = true;
    for &t in &config.times {
        let r = flow_identity_residual(&flow, &v, &w, 0.0, t, &scheme, 8)?;
        pass &= r.passes();
        records.push(serde_json::to_value(&r)?);
    }
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "flow-residual".to_string(),
        record: json!({ "times": config.times, "residuals": records }),
        pass: Some(pass),
        traces: vec![],
    })
}

pub fn sobolev_gate_verb(name: &str, config: &RunConfig) -> Result<VerbOutput> {
    let data = build(name, config)?;
    let gamma = data.gamma()?;
    let (v, _) = data.default_pair()?;
    let gate = sobolev_gate(&gamma, &v, &config.quadrature.scheme())?;
    Ok(VerbOutput {
        scenario: name.to_string(),
        verb: "sobolev-gate".to_string(),
        record: serde_json::to_value(&gate)?,
        pass: None,
        traces: vec![],
    })
}
