//! Experiment configuration: a scenario plus planner variants and an optional sweep.

use std::path::{Path, PathBuf};

use bspop_core::costs::ObjectiveWeights;
use bspop_core::simharness::{PlannerKind, Scenario};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let ok = self.min.is_finite() && self.max.is_finite() && self.step.is_finite();
        if !ok || self.step <= 0.0 || self.max < self.min {
            return Err(CliError::Config(format!(
                "bad sweep {}:{}:{} (need min <= max and step > 0)",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for SweepSpec {
    type Err = String;

    /// `min:max:step`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, step] = parts[..] else {
            return Err(format!("expected min:max:step, got {s:?}"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Self {
            min: num(min)?,
            max: num(max)?,
            step: num(step)?,
        })
    }
}

/// Planner overrides applied on top of the scenario's planner block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<ObjectiveWeights>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) {
        if let Some(k) = self.planner {
            sc.planner.kind = k;
        }
        if let Some(r) = self.rate {
            sc.planner.rate = r;
        }
        if let Some(d) = self.degree {
            sc.planner.degree = d;
        }
        if let Some(n) = self.points {
            sc.planner.points = n;
        }
        if let Some(w) = self.weights {
            sc.planner.weights = w;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Scenario of this variant when it differs from the shared one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    #[serde(flatten)]
    pub overrides: Overrides,
}

impl std::str::FromStr for Variant {
    type Err = String;

    /// `planner[:rate]`, e.g. `bspop:10`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rate) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r.parse::<f64>().map_err(|e| format!("rate {r:?}: {e}"))?)),
            None => (s, None),
        };
        let planner = match kind {
            "baseline" => PlannerKind::Baseline,
            "bspop" => PlannerKind::Bspop,
            other => return Err(format!("unknown planner {other:?}")),
        };
        Ok(Self {
            label: None,
            scenario: None,
            overrides: Overrides {
                planner: Some(planner),
                rate,
                ..Overrides::default()
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Svg,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Svg]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: PathBuf,
    #[serde(default)]
    pub variants: Vec<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("experiment config: {e}")))?;
        if let Some(s) = &cfg.sweep {
            s.validate()?;
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config; relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        rebase(&mut cfg.scenario);
        for v in &mut cfg.variants {
            if let Some(p) = &mut v.scenario {
                rebase(p);
            }
        }
        Ok(cfg)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| CliError::scenario(path, e))
}

/// The four planner rows of the frequency comparison: baseline at 10, 20 and 50 Hz
/// and the spline planner at 10 Hz.
pub fn default_variants() -> Vec<Variant> {
    ["baseline:10", "baseline:20", "baseline:50", "bspop:10"]
        .iter()
        .map(|s| s.parse().expect("valid variant"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = r#"{
            "scenario": "s.json",
            "variants": [
                {"planner": "baseline", "rate": 20},
                {"label": "smooth", "planner": "bspop", "degree": 2, "points": 5, "weights": {"w1": 5, "w2": 1}},
                {"scenario": "other.json"}
            ],
            "sweep": {"min": -1, "max": 1, "step": 0.5}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.out, PathBuf::from("out"));
        assert_eq!(cfg.variants[1].overrides.degree, Some(2));
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_bad_sweep() {
        assert!(ExperimentConfig::from_json(r#"{"scenario": "a", "colour": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario": "a", "sweep": {"min": 1, "max": 0, "step": 1}}"#).is_err());
    }

    #[test]
    fn parses_short_forms() {
        let v: Variant = "bspop:10".parse().unwrap();
        assert_eq!(v.overrides.planner, Some(PlannerKind::Bspop));
        assert_eq!(v.overrides.rate, Some(10.0));
        assert!("mpc:10".parse::<Variant>().is_err());
        let s: SweepSpec = "-3.2:3.2:0.1".parse().unwrap();
        assert_eq!((s.min, s.max, s.step), (-3.2, 3.2, 0.1));
        assert!("1:2".parse::<SweepSpec>().is_err());
    }
}
