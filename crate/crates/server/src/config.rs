use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use groundline_core::llm::{FaultProfile, HttpConfig};
use groundline_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    /// Canned replies; the bundled script when `script` is unset.
    Scripted {
        #[serde(default)]
        script: Option<PathBuf>,
        /// Probabilities only; the seed comes from the request or the top-level `seed`.
        #[serde(default)]
        faults: FaultProfile,
    },
    Http(HttpConfig),
}

impl Default for ProviderConfig {
    fn default() -> ProviderConfig {
        ProviderConfig::Scripted { script: None, faults: FaultProfile::default() }
    }
}

impl ProviderConfig {
    pub fn is_scripted(&self) -> bool {
        matches!(self, ProviderConfig::Scripted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub path: PathBuf,
    /// Defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub source_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub addr: String,
    /// Built UI bundle served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Permissive CORS, for a UI dev server on another port.
    pub dev: bool,
    pub provider: ProviderConfig,
    pub seed: u64,
    /// Anchor for relative dates and ingestion stamps. Unset means today.
    pub now: Option<NaiveDate>,
    pub pipeline: PipelineConfig,
    /// Record wall-clock timings in envelopes. Off keeps responses reproducible.
    pub timing: bool,
    /// Load the bundled demo datasets, model, and rules before anything below.
    pub fixtures: bool,
    pub semantic_model: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub datasets: Vec<DatasetFile>,
}

impl Default for AppConfig {
    fn default() -> AppConfig {
        AppConfig {
            addr: "127.0.0.1:8080".into(),
            static_dir: None,
            dev: false,
            provider: ProviderConfig::default(),
            seed: 0,
            now: None,
            pipeline: PipelineConfig::guarded(),
            timing: false,
            fixtures: false,
            semantic_model: None,
            rules: None,
            datasets: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path}: {detail}")]
    Parse { path: String, detail: String },
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), detail: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c: AppConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, AppConfig::default());
    }

    #[test]
    fn provider_kinds_parse() {
        let c: AppConfig = serde_json::from_str(
            r#"{"provider": {"kind": "http", "endpoint": "http://localhost:9/v1/chat", "model": "m"}}"#,
        )
        .unwrap();
        assert!(!c.provider.is_scripted());
        let c: AppConfig =
            serde_json::from_str(r#"{"provider": {"kind": "scripted", "faults": {"fabricate_field": 0.3}}}"#).unwrap();
        match c.provider {
            ProviderConfig::Scripted { faults, .. } => assert_eq!(faults.fabricate_field, 0.3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<AppConfig>(r#"{"adress": "x"}"#).is_err());
    }
}
