//! Experiment configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::expansional::SeriesBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Inequalities,
    Modular,
    Kms,
    Expansional,
    Exponentiable,
    Perturbation,
    All,
}

impl SuiteName {
    pub const CONCRETE: [SuiteName; 6] = [
        SuiteName::Inequalities,
        SuiteName::Modular,
        SuiteName::Kms,
        SuiteName::Expansional,
        SuiteName::Exponentiable,
        SuiteName::Perturbation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Inequalities => "inequalities",
            SuiteName::Modular => "modular",
            SuiteName::Kms => "kms",
            SuiteName::Expansional => "expansional",
            SuiteName::Exponentiable => "exponentiable",
            SuiteName::Perturbation => "perturbation",
            SuiteName::All => "all",
        }
    }

    pub fn expand(self) -> Vec<SuiteName> {
        match self {
            SuiteName::All => Self::CONCRETE.to_vec(),
            s => vec![s],
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| ConfigError::Validation(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn default_suite() -> SuiteName {
    SuiteName::All
}

fn default_dims() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_trials() -> usize {
    10
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_output_path() -> String {
    "kms-lab-out".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_suite")]
    pub suite: SuiteName,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Slack tolerance for rows without an override.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Per-check tolerances keyed by row name.
    #[serde(default)]
    pub tolerance_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub budget: SeriesBudget,
    #[serde(default = "default_output_path")]
    pub output_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suite: default_suite(),
            dims: default_dims(),
            trials: default_trials(),
            seed: 0,
            tolerance: default_tolerance(),
            tolerance_overrides: BTreeMap::new(),
            budget: SeriesBudget::default(),
            output_path: default_output_path(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dims.is_empty() {
            return Err(ConfigError::Validation("dims must not be empty".into()));
        }
        if let Some(d) = self.dims.iter().find(|&&d| d < 2) {
            return Err(ConfigError::Validation(format!("dims must be at least 2, got {d}")));
        }
        if self.trials == 0 {
            return Err(ConfigError::Validation("trials must be at least 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(ConfigError::Validation(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        for (name, &tol) in &self.tolerance_overrides {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(ConfigError::Validation(format!("tolerance override '{name}' must be positive, got {tol}")));
            }
        }
        if self.budget.max_order == 0 || !(self.budget.tolerance > 0.0) {
            return Err(ConfigError::Validation("budget needs max_order ≥ 1 and a positive tolerance".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    ExperimentConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"suite": "all"}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.budget.max_order, 25);
        assert_eq!(cfg.budget.tolerance, 1e-10);
        assert_eq!(cfg.tolerance, 1e-10);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"dims": [1]}"#), Err(ConfigError::Validation(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"trials": 0}"#), Err(ConfigError::Validation(_))));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"tolerance_overrides": {"holder": 0.0}}"#),
            Err(ConfigError::Validation(_))
        ));
        match ExperimentConfig::from_json("{\n  \"suite\": \"all\",\n  \"bogus\": 1\n}") {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_normalizes() {
        let text = r#"{"suite": "kms", "seed": 9, "budget": {"max_order": 30}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.budget.tolerance, 1e-10);
        assert_eq!("perturbation".parse::<SuiteName>().unwrap(), SuiteName::Perturbation);
        assert!("nope".parse::<SuiteName>().is_err());
    }
}
