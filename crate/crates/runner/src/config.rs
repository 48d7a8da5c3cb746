//! Run configuration: a JSON-compatible structure plus dotted-key command
//! line overrides. The full configuration is echoed into every report so
//! runs are reproducible from their outputs.

use std::collections::BTreeMap;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ricci_core::measure::Ladder;
use ricci_core::quadrature::QuadratureScheme;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    pub order: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub shell_ratio: f64,
    pub r_min_factor: f64,
    pub max_depth: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        let s = QuadratureScheme::default();
        QuadratureSettings {
            order: s.order,
            rel_tol: s.rel_tol,
            abs_tol: s.abs_tol,
            shell_ratio: s.shell_ratio,
            r_min_factor: s.r_min_factor,
            max_depth: s.max_depth,
        }
    }
}

impl QuadratureSettings {
    pub fn scheme(&self) -> QuadratureScheme {
        QuadratureScheme {
            order: self.order,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            shell_ratio: self.shell_ratio,
            r_min_factor: self.r_min_factor,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderSettings {
    pub eps0: f64,
    pub ratio: f64,
    pub rungs: usize,
}

impl Default for LadderSettings {
    fn default() -> Self {
        LadderSettings { eps0: 0.06, ratio: 0.5, rungs: 5 }
    }
}

impl LadderSettings {
    pub fn ladder(&self) -> Ladder {
        Ladder { eps0: self.eps0, ratio: self.ratio, rungs: self.rungs }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seed for every randomized test-field choice.
    pub seed: u64,
    pub quadrature: QuadratureSettings,
    pub ladder: LadderSettings,
    /// Scenario parameters (`alpha`, `c`, `l`, `r0`, ...), merged over the
    /// scenario defaults.
    pub params: BTreeMap<String, f64>,
    /// Flow check times.
    pub times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0x5eed,
            quadrature: QuadratureSettings::default(),
            ladder: LadderSettings::default(),
            params: BTreeMap::new(),
            times: vec![0.05, 0.1, 0.2, 0.4],
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Applies one `key=value` override with dotted paths
    /// (`quadrature.order=7`, `params.alpha=0.25`, `seed=42`,
    /// `times=0.1,0.2`). Bare keys fall through to `params`.
    pub fn apply_override(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        let parse_f64 = |v: &str| -> anyhow::Result<f64> {
            v.parse::<f64>().with_context(|| format!("value {v:?} for key {key:?} is not numeric"))
        };
        match key {
            "seed" => self.seed = value.parse().context("seed must be an integer")?,
            "times" => {
                self.times = value
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .context("times must be a comma-separated list")?;
            }
            "quadrature.order" => self.quadrature.order = value.parse()?,
            "quadrature.rel_tol" => self.quadrature.rel_tol = parse_f64(value)?,
            "quadrature.abs_tol" => self.quadrature.abs_tol = parse_f64(value)?,
            "quadrature.shell_ratio" => self.quadrature.shell_ratio = parse_f64(value)?,
            "quadrature.r_min_factor" => self.quadrature.r_min_factor = parse_f64(value)?,
            "quadrature.max_depth" => self.quadrature.max_depth = value.parse()?,
            "ladder.eps0" => self.ladder.eps0 = parse_f64(value)?,
            "ladder.ratio" => self.ladder.ratio = parse_f64(value)?,
            "ladder.rungs" => self.ladder.rungs = value.parse()?,
            _ => {
                let field = key.strip_prefix("params.").unwrap_or(key);
                if field.contains('.') {
                    bail!("unknown configuration key {key:?}");
                }
                self.params.insert(field.to_string(), parse_f64(value)?);
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("quadrature.order", "7").unwrap();
        cfg.apply_override("alpha", "0.25").unwrap();
        cfg.apply_override("params.c", "0.8").unwrap();
        cfg.apply_override("times", "0.1, 0.2").unwrap();
        assert_eq!(cfg.quadrature.order, 7);
        assert_eq!(cfg.param("alpha", 0.5), 0.25);
        assert_eq!(cfg.param("c", 1.0), 0.8);
        assert_eq!(cfg.times, vec![0.1, 0.2]);
    }

    #[test]
    fn unknown_dotted_key_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_override("nope.key", "1").is_err());
        assert!(cfg.apply_override("seed", "not-a-number").is_err());
    }

    #[test]
    fn json_roundtrip_preserves_config() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("alpha", "0.75").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.param("alpha", 0.0), 0.75);
        assert_eq!(back.seed, cfg.seed);
    }
}
