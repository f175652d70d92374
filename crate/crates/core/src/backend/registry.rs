use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CompletionBackend, RemoteBackend, RemoteConfig, ScriptRule, ScriptedBackend};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("backend id `{0}` is already registered")]
    DuplicateId(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
}

/// One entry of a backends file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Scripted {
        id: String,
        #[serde(default)]
        rules: Vec<ScriptRule>,
        #[serde(default)]
        default: String,
    },
    Remote {
        id: String,
        #[serde(flatten)]
        remote: RemoteConfig,
    },
}

impl BackendConfig {
    pub fn id(&self) -> &str {
        match self {
            BackendConfig::Scripted { id, .. } | BackendConfig::Remote { id, .. } => id,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn CompletionBackend>, RegistryError> {
        Ok(match self {
            BackendConfig::Scripted { rules, default, .. } => Arc::new(
                ScriptedBackend::try_new(rules.clone(), default.clone())
                    .map_err(|e| RegistryError::InvalidConfig(e.to_string()))?,
            ),
            BackendConfig::Remote { remote, .. } => Arc::new(RemoteBackend::new(remote.clone())),
        })
    }
}

/// Completion backends addressable by string id.
#[derive(Clone, Default)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn CompletionBackend>>,
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.backends.keys()).finish()
    }
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        id: impl Into<String>,
        backend: Arc<dyn CompletionBackend>,
    ) -> Result<(), RegistryError> {
        let id = id.into();
        if self.backends.contains_key(&id) {
            return Err(RegistryError::DuplicateId(id));
        }
        self.backends.insert(id, backend);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Arc<dyn CompletionBackend>, RegistryError> {
        self.backends
            .get(id)
            .ok_or_else(|| RegistryError::UnknownBackend(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.backends.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }

    /// Build a registry from a backends file: a JSON array of
    /// `{"kind": "scripted" | "remote", "id": ..., ...}` objects.
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let configs: Vec<BackendConfig> =
            serde_json::from_str(text).map_err(|e| RegistryError::InvalidConfig(e.to_string()))?;
        let mut registry = Self::new();
        for cfg in &configs {
            registry.register(cfg.id(), cfg.build()?)?;
        }
        Ok(registry)
    }
}
