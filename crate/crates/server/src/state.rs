use std::path::Path;
use std::sync::{Arc, RwLock};

use chrono::{NaiveDate, Utc};
use groundline_core::fixtures;
use groundline_core::llm::{HttpProvider, LlmProvider, Script, ScriptedProvider};
use groundline_core::rules::RuleSet;
use groundline_core::semantic::{load_model, ModelError, SemanticModel};
use groundline_core::store::{ingest_csv, DatasetRegistry, IngestError, IngestOptions};

use crate::config::{AppConfig, ProviderConfig};

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("dataset {path}: {source}")]
    Ingest { path: String, source: IngestError },
    #[error("semantic model {path}: {source}")]
    Model { path: String, source: ModelError },
    #[error("rules {path}: {detail}")]
    Rules { path: String, detail: String },
    #[error("script {path}: {detail}")]
    Script { path: String, detail: String },
}

fn read(path: &Path) -> Result<String, StartupError> {
    std::fs::read_to_string(path).map_err(|source| StartupError::Io { path: path.display().to_string(), source })
}

/// Registries plus the provider wiring. Shared by every request.
pub struct AppState {
    pub config: AppConfig,
    pub registry: DatasetRegistry,
    pub rules: RuleSet,
    model: RwLock<Option<SemanticModel>>,
    script: Script,
    http: Option<Arc<HttpProvider>>,
}

impl AppState {
    pub fn from_config(config: AppConfig) -> Result<AppState, StartupError> {
        let registry = DatasetRegistry::new();
        let mut model = None;
        let mut rules = RuleSet::default();
        if config.fixtures {
            for d in fixtures::datasets() {
                registry.register(d);
            }
            model = Some(fixtures::model());
            rules = fixtures::rules();
        }
        if let Some(path) = &config.semantic_model {
            let text = read(path)?;
            model = Some(load_model(&text).map_err(|source| StartupError::Model { path: path.display().to_string(), source })?);
        }
        if let Some(path) = &config.rules {
            let text = read(path)?;
            rules = RuleSet::load(&text)
                .map_err(|e| StartupError::Rules { path: path.display().to_string(), detail: e.to_string() })?;
        }
        let state = AppState {
            registry,
            rules,
            model: RwLock::new(model),
            script: Script::default(),
            http: None,
            config,
        };
        for f in &state.config.datasets {
            let bytes = std::fs::read(&f.path)
                .map_err(|source| StartupError::Io { path: f.path.display().to_string(), source })?;
            let name = f.name.clone().unwrap_or_else(|| {
                f.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
            });
            let opts = IngestOptions {
                source_label: f.source_label.clone(),
                ingested_at: state.ingest_clock(),
                ..IngestOptions::default()
            };
            let ds = ingest_csv(&bytes, &name, &opts)
                .map_err(|source| StartupError::Ingest { path: f.path.display().to_string(), source })?;
            state.registry.register(ds);
        }
        let (script, http) = match &state.config.provider {
            ProviderConfig::Scripted { script: Some(path), .. } => {
                let text = read(path)?;
                let s = Script::load(&text)
                    .map_err(|e| StartupError::Script { path: path.display().to_string(), detail: e.to_string() })?;
                (s, None)
            }
            ProviderConfig::Scripted { script: None, .. } => (fixtures::script(), None),
            ProviderConfig::Http(h) => (Script::default(), Some(Arc::new(HttpProvider::new(h.clone())))),
        };
        Ok(AppState { script, http, ..state })
    }

    pub fn model(&self) -> Option<SemanticModel> {
        self.model.read().expect("model lock poisoned").clone()
    }

    pub fn set_model(&self, model: Option<SemanticModel>) {
        *self.model.write().expect("model lock poisoned") = model;
    }

    /// The configured anchor date, else today (UTC).
    pub fn today(&self) -> NaiveDate {
        self.config.now.unwrap_or_else(|| Utc::now().date_naive())
    }

    /// Seconds recorded as ingestion time: midnight of the anchor date when one is configured.
    pub fn ingest_clock(&self) -> i64 {
        match self.config.now {
            Some(d) => d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp(),
            None => Utc::now().timestamp(),
        }
    }

    /// A provider for one request. Scripted providers are rebuilt so the
    /// fabricated-field fault avoids every currently registered name.
    pub fn provider(&self, seed: u64) -> Arc<dyn LlmProvider> {
        match (&self.config.provider, &self.http) {
            (_, Some(h)) => h.clone(),
            (ProviderConfig::Scripted { faults, .. }, None) => {
                let model = self.model().unwrap_or_default();
                let reserved = fixtures::reserved_names(&self.registry.snapshot(), &model);
                let faults = groundline_core::llm::FaultProfile { seed, ..*faults };
                Arc::new(ScriptedProvider::new(&self.script, faults, reserved))
            }
            (ProviderConfig::Http(_), None) => unreachable!("http provider is built at startup"),
        }
    }
}
