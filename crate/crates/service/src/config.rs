//! Service configuration.
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! store_dir = "flowbench-store"
//!
//! [gateway]
//! kind = "template"
//! ```
//!
//! `FLOWBENCH_LISTEN`, `FLOWBENCH_STORE_DIR` and `FLOWBENCH_GATEWAY` (a JSON
//! gateway object) override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flowbench::gateway::BackendConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub store_dir: PathBuf,
    /// Used when a session request names no gateway.
    pub gateway: BackendConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            store_dir: PathBuf::from("flowbench-store"),
            gateway: BackendConfig::Template,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Reads `path` (defaults when `None`), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                let mut c = ServiceConfig::from_toml(&text)?;
                if let Some(base) = p.parent() {
                    if c.store_dir.is_relative() {
                        c.store_dir = base.join(&c.store_dir);
                    }
                    c.gateway.resolve_paths(base);
                }
                c
            }
            None => ServiceConfig::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.gateway.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(config)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("FLOWBENCH_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("FLOWBENCH_STORE_DIR") {
            self.store_dir = PathBuf::from(v);
        }
        if let Some(v) = var("FLOWBENCH_GATEWAY") {
            self.gateway =
                serde_json::from_str(&v).map_err(|e| ConfigError::Invalid(format!("FLOWBENCH_GATEWAY: {e}")))?;
        }
        Ok(())
    }
}
