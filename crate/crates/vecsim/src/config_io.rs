use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vecsim_core::config::ScenarioConfig;
use vecsim_core::learn::LearnConfig;

/// One experiment's full configuration: the scenario fields at the top level
/// plus a `learn` section. Every field has a default, so `{}` is a valid
/// config and `run.json` always records the resolved values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub learn: LearnConfig,
}

/// Reads and validates a config file; the error message lists every
/// violation, not just the first.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    cfg.scenario
        .validate()
        .map_err(|e| anyhow::anyhow!("{e}"))
        .with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn empty_object_resolves_to_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "{{}}").unwrap();
        let cfg = load_config(f.path()).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn scenario_fields_flatten_to_the_top_level() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"vehicle_count": 5, "learn": {{"episodes": 7}}}}"#).unwrap();
        let cfg = load_config(f.path()).unwrap();
        assert_eq!(cfg.scenario.vehicle_count, 5);
        assert_eq!(cfg.learn.episodes, 7);
    }

    #[test]
    fn invalid_config_reports_every_violation() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"vehicle_count": 0, "arrival_probability": 2.0}}"#).unwrap();
        let err = format!("{:#}", load_config(f.path()).unwrap_err());
        assert!(err.contains("vehicle_count"), "{err}");
        assert!(err.contains("arrival_probability"), "{err}");
    }

    #[test]
    fn missing_file_errors_with_the_path() {
        let err = format!("{:#}", load_config(Path::new("/no/such/file.json")).unwrap_err());
        assert!(err.contains("/no/such/file.json"));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
