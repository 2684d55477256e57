use std::path::Path;

use cbayes_core::experiments::{ExperimentConfig, ExperimentKind};
use sha2::{Digest, Sha256};

use crate::{read_file, Error, Result};

/// Parse a config and check it is for `experiment`. `seed` overrides the
/// config's own seed.
pub fn parse_config(json: &str, experiment: &str, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = serde_json::from_str(json)?;
    if cfg.name() != experiment {
        return Err(Error::ExperimentMismatch { requested: experiment.to_string(), found: cfg.name().to_string() });
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path, experiment: &str, seed: Option<u64>) -> Result<ExperimentConfig> {
    parse_config(&read_file(path)?, experiment, seed)
}

/// Default config for a named experiment.
pub fn default_config(experiment: &str, seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::new(ExperimentKind::from_name(experiment)?, seed))
}

/// SHA-256 of the canonical (re-serialized) config.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"experiment": "map_demo", "seed": 5}"#, "map_demo", None).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.effort.samples, 100_000);
        let cfg = parse_config(r#"{"experiment": "map_demo", "seed": 5}"#, "map_demo", Some(9)).unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn mismatched_experiment_is_rejected() {
        let err = parse_config(r#"{"experiment": "audit", "seed": 1}"#, "metrics", None).unwrap_err();
        assert!(matches!(err, Error::ExperimentMismatch { .. }));
        assert!(parse_config(r#"{"experiment": "audit"}"#, "audit", None).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = default_config("audit", 1).unwrap();
        let b = default_config("audit", 2).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&a.clone()).unwrap());
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }
}
