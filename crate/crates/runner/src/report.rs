//! Deterministic run reports: per-check records with their oracle values and
//! provenance keys, JSON emission with the wall-clock timing isolated in its
//! own section, and CSV traces for ladders and shell sums.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub computed: f64,
    pub oracle: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Where the expected value comes from: a closed form, an independent
    /// evaluation route, or an exact identity.
    pub source: String,
    /// Optional trace rows `(index, value, error)` written as CSV.
    #[serde(skip)]
    pub trace: Vec<(usize, f64, f64)>,
}

impl CheckRecord {
    pub fn against(
        name: &str,
        computed: f64,
        oracle: f64,
        tolerance: f64,
        source: &str,
    ) -> CheckRecord {
        CheckRecord {
            name: name.to_string(),
            computed,
            oracle,
            tolerance,
            pass: (computed - oracle).abs() <= tolerance,
            source: source.to_string(),
            trace: vec![],
        }
    }

    /// A boolean check: `computed` is 1 for the observed condition.
    pub fn condition(name: &str, observed: bool, expected: bool, source: &str) -> CheckRecord {
        CheckRecord {
            name: name.to_string(),
            computed: observed as u8 as f64,
            oracle: expected as u8 as f64,
            tolerance: 0.0,
            pass: observed == expected,
            source: source.to_string(),
            trace: vec![],
        }
    }

    pub fn with_trace(mut self, rows: Vec<(usize, f64, f64)>) -> CheckRecord {
        self.trace = rows;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub scenario: String,
    pub config: RunConfig,
    pub checks: Vec<CheckRecord>,
    pub passed: usize,
    pub failed: usize,
    /// Wall-clock milliseconds per check. Isolated here so that the rest of
    /// the report is byte-identical across runs with the same config.
    pub timing: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(scenario: &str, config: RunConfig, checks: Vec<CheckRecord>, timing: BTreeMap<String, f64>) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        let failed = checks.len() - passed;
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.to_string(),
            config,
            checks,
            passed,
            failed,
            timing,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }

    /// JSON with the timing section stripped: the deterministic portion.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("timing");
        v
    }

    pub fn write_files(&self, out_dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("report.json");
        let mut file = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        for check in &self.checks {
            if check.trace.is_empty() {
                continue;
            }
            let name = check.name.replace([' ', '/'], "_");
            let mut csv = std::fs::File::create(out_dir.join(format!("trace_{name}.csv")))?;
            writeln!(csv, "index,value,error")?;
            for (i, v, e) in &check.trace {
                writeln!(csv, "{i},{v},{e}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_fail_accounting() {
        let checks = vec![
            CheckRecord::against("a", 1.0, 1.0, 0.1, "exact"),
            CheckRecord::against("b", 2.0, 1.0, 0.1, "exact"),
        ];
        let report = RunReport::new("demo", RunConfig::default(), checks, BTreeMap::new());
        assert_eq!(report.passed, 1);
        assert_eq!(report.failed, 1);
        assert!(!report.all_pass());
    }

    #[test]
    fn deterministic_json_drops_timing() {
        let mut timing = BTreeMap::new();
        timing.insert("a".to_string(), 12.0);
        let report = RunReport::new("demo", RunConfig::default(), vec![], timing);
        let v = report.deterministic_json();
        assert!(v.get("timing").is_none());
        assert!(v.get("scenario").is_some());
    }
}
