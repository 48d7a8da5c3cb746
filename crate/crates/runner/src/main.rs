//! Command line interface: `ricci <verb> <scenario> [--key value ...] [--out dir]`.
//!
//! Exit codes: 0 when every check passes, 2 on a check failure, 1 on an
//! execution error. `RICCI_THREADS` caps the worker pool; unset uses the
//! hardware default.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use ricci_runner::{config::RunConfig, scenario, verbs};

#[derive(Parser)]
#[command(
    name = "ricci",
    version,
    about = "Curvature quadratic forms, measure decompositions and weak-flow checks on chart scenarios"
)]
struct Cli {
    /// Verb: list, run, qform, qform-split, qform-be, qform-kahler,
    /// qform-alexandrov, killing-defect, ricci-measure, flow-check,
    /// flow-residual, sobolev-gate.
    verb: String,
    /// Scenario name (see `ricci list`); everything after it is parsed as
    /// `--key value` configuration overrides plus `--out DIR`,
    /// `--config FILE` and `--t T1,T2,...`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    rest: Vec<String>,
}

struct Invocation {
    scenario: Option<String>,
    config: RunConfig,
    out: Option<PathBuf>,
}

fn parse_invocation(rest: &[String]) -> Result<Invocation> {
    let mut scenario = None;
    let mut out = None;
    let mut config_path: Option<PathBuf> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut iter = rest.iter().peekable();
    while let Some(token) = iter.next() {
        if let Some(key) = token.strip_prefix("--") {
            let value = match key.split_once('=') {
                Some((k, v)) => {
                    overrides.push((k.to_string(), v.to_string()));
                    continue;
                }
                None => iter
                    .next()
                    .with_context(|| format!("flag --{key} needs a value"))?,
            };
            match key {
                "out" => out = Some(PathBuf::from(value)),
                "config" => config_path = Some(PathBuf::from(value)),
                "t" => overrides.push(("times".to_string(), value.clone())),
                "set" => {
                    let (k, v) = value
                        .split_once('=')
                        .context("--set expects key=value")?;
                    overrides.push((k.to_string(), v.to_string()));
                }
                other => overrides.push((other.to_string(), value.clone())),
            }
        } else if scenario.is_none() {
            scenario = Some(token.clone());
        } else {
            bail!("unexpected positional argument {token:?}");
        }
    }
    let mut config = match config_path {
        Some(p) => RunConfig::from_file(&p)?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        config.apply_override(&k, &v)?;
    }
    Ok(Invocation { scenario, config, out })
}

fn list_scenarios(filter: Option<&str>) {
    println!("{:<18} {:<76} sources", "scenario", "summary");
    for info in scenario::CATALOG {
        if let Some(f) = filter {
            if !info.name.contains(f) {
                continue;
            }
        }
        println!("{:<18} {:<76} {}", info.name, info.summary, info.anchors.join("; "));
    }
}

fn emit(out: &Option<PathBuf>, output: &verbs::VerbOutput) -> Result<()> {
    let text = serde_json::to_string_pretty(&serde_json::to_value(output)?)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.json"), format!("{text}\n"))?;
            for (name, rows) in &output.traces {
                let mut csv = String::from("index,value,error\n");
                for (i, v, e) in rows {
                    csv.push_str(&format!("{i},{v},{e}\n"));
                }
                std::fs::write(dir.join(format!("trace_{name}.csv")), csv)?;
            }
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let inv = parse_invocation(&cli.rest)?;
    if cli.verb == "list" {
        list_scenarios(inv.scenario.as_deref());
        return Ok(true);
    }
    let name = inv
        .scenario
        .as_deref()
        .with_context(|| format!("verb {:?} needs a scenario name", cli.verb))?;
    scenario::find(name)?;
    match cli.verb.as_str() {
        "run" => {
            let report = scenario::run_scenario(name, &inv.config)?;
            for check in &report.checks {
                let status = if check.pass { "pass" } else { "FAIL" };
                println!(
                    "[{status}] {:<38} computed {: >14.6e}  expected {: >14.6e}  tol {:.2e}",
                    check.name, check.computed, check.oracle, check.tolerance
                );
            }
            println!(
                "{}: {} checks, {} passed, {} failed",
                report.scenario,
                report.checks.len(),
                report.passed,
                report.failed
            );
            if let Some(dir) = &inv.out {
                report.write_files(dir)?;
                println!("report written to {}", dir.join("report.json").display());
            }
            Ok(report.all_pass())
        }
        verb => {
            let output = match verb {
                "qform" => verbs::qform_verb(name, &inv.config, false)?,
                "qform-split" => verbs::qform_verb(name, &inv.config, true)?,
                "qform-be" => verbs::qform_be_verb(name, &inv.config)?,
                "qform-kahler" => verbs::qform_kahler_verb(name, &inv.config)?,
                "qform-alexandrov" => verbs::qform_alexandrov_verb(name, &inv.config)?,
                "killing-defect" => verbs::killing_defect_verb(name, &inv.config)?,
                "ricci-measure" => verbs::ricci_measure_verb(name, &inv.config)?,
                "flow-check" => verbs::flow_check_verb(name, &inv.config, false)?,
                "flow-check-gated" => verbs::flow_check_verb(name, &inv.config, true)?,
                "flow-residual" => verbs::flow_residual_verb(name, &inv.config)?,
                "sobolev-gate" => verbs::sobolev_gate_verb(name, &inv.config)?,
                other => bail!("unknown verb {other:?}"),
            };
            emit(&inv.out, &output)?;
            Ok(output.pass.unwrap_or(true))
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("RICCI_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
