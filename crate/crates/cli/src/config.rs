//! TOML campaign configs.
//!
//! Every field is optional; omitted fields take their defaults. The `dataset`
//! path is resolved relative to the config file.

use std::fs;
use std::path::{Path, PathBuf};

use mvactive_core::campaign::CampaignConfig;
use mvactive_core::dataset::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub fn parse_config(text: &str) -> Result<CampaignConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Loads a config and rewrites its dataset path relative to the config's
/// directory.
pub fn load_config(path: &Path) -> Result<CampaignConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut config = parse_config(&text).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })?;
    let dataset = Path::new(&config.dataset);
    if dataset.is_relative() {
        let base = path.parent().unwrap_or(Path::new(""));
        config.dataset = base.join(dataset).to_string_lossy().into_owned();
    }
    Ok(config)
}

/// Materializes dataset-dependent defaults and validates.
pub fn resolve(config: &mut CampaignConfig, dataset: &Dataset) -> Result<(), ConfigError> {
    config.resolve(dataset);
    config.validate(dataset).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// The config as TOML with every field written out.
pub fn to_toml(config: &CampaignConfig) -> String {
    toml::to_string(config).expect("campaign configs always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvactive_core::active_learning::Strategy;

    #[test]
    fn empty_config_is_all_defaults() {
        assert_eq!(parse_config("").unwrap(), CampaignConfig::default());
    }

    #[test]
    fn nested_sections_override_single_fields() {
        let c = parse_config("strategy = \"mvc\"\n[st]\nenabled = true\n[noise]\nsigma_base_px = 1.5\n").unwrap();
        assert_eq!(c.strategy, Strategy::Mvc);
        assert!(c.st.enabled);
        assert_eq!(c.st.fraction, 0.2);
        assert_eq!(c.noise.sigma_base_px, 1.5);
        assert_eq!(c.noise.coverage_scale_mm, CampaignConfig::default().noise.coverage_scale_mm);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("stratgy = \"mvc\"").is_err());
        assert!(parse_config("[noise]\nsigma = 1.0").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = CampaignConfig { failure_penalty_px2: Some(2.0e6), seeds: vec![4, 5], ..Default::default() };
        c.noise.seed = 17;
        assert_eq!(parse_config(&to_toml(&c)).unwrap(), c);
    }
}
