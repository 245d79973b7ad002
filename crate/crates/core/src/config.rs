//! Provider configuration: one TOML or JSON file mapping profile ids to
//! [`ProviderProfile`]s.
//!
//! ```toml
//! [llama90-v]
//! modality = "vision"
//! endpoint_url = "https://api.example.com/v1"
//! model_name = "llama-3.2-90b-vision"
//! api_key_env = "EXAMPLE_API_KEY"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::model::ProviderProfile;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown provider profile {0:?}")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, Default)]
pub struct ProviderConfig {
    pub profiles: BTreeMap<String, ProviderProfile>,
    /// Directory that relative fixture paths resolve against.
    pub base_dir: PathBuf,
}

impl ProviderConfig {
    /// Reads `path` as JSON when it ends in `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed: Result<BTreeMap<String, ProviderProfile>, String> = if is_json {
            serde_json::from_str(&raw).map_err(|e| e.to_string())
        } else {
            toml::from_str(&raw).map_err(|e| e.to_string())
        };
        let profiles = parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_profiles(profiles, base_dir)
    }

    /// Fills each profile's id from its key and validates it.
    pub fn from_profiles(
        profiles: BTreeMap<String, ProviderProfile>,
        base_dir: PathBuf,
    ) -> Result<Self, ConfigError> {
        let mut out = BTreeMap::new();
        for (id, mut p) in profiles {
            if !p.profile_id.is_empty() && p.profile_id != id {
                return Err(ConfigError::Invalid(format!(
                    "profile key {id:?} does not match its profile_id {:?}",
                    p.profile_id
                )));
            }
            p.profile_id = id.clone();
            p.validate().map_err(ConfigError::Invalid)?;
            out.insert(id, p);
        }
        Ok(Self {
            profiles: out,
            base_dir,
        })
    }

    pub fn get(&self, id: &str) -> Result<&ProviderProfile, ConfigError> {
        self.profiles
            .get(id)
            .ok_or_else(|| ConfigError::UnknownProfile(id.to_string()))
    }

    /// Gateway with the fixtures of every mock profile loaded.
    pub fn gateway(&self) -> Result<Gateway, GatewayError> {
        Gateway::for_profiles(self.profiles.values(), &self.base_dir)
    }
}
