//! Run configuration: one TOML file, with relative paths resolved against
//! the file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use probe_core::{BiasLabel, CascadeConfig};
use serde::{Deserialize, Serialize};

use crate::gateway::RetryPolicy;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad-config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad-config: `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
    #[error("bad-config: {0}")]
    Cascade(#[from] probe_core::cascade::ConfigError),
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Fake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Scripted replies for the fake backend.
    pub script: Option<PathBuf>,
    pub base_url: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    /// First backoff delay; later retries double it.
    pub base_delay_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            script: None,
            base_url: "https://api.openai.com/v1".into(),
            timeout_secs: 120,
            max_attempts: 5,
            base_delay_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            base_delay: Duration::from_millis(self.base_delay_ms),
            factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrologConfig {
    /// Engine binary; `PROBE_SWIPL` or `swipl` when unset.
    pub binary: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for PrologConfig {
    fn default() -> Self {
        Self {
            binary: None,
            timeout_secs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parallelism {
    /// Provider calls allowed in flight at once.
    pub in_flight: usize,
    /// Evaluation worker threads.
    pub workers: usize,
}

impl Default for Parallelism {
    fn default() -> Self {
        Self {
            in_flight: 4,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generator_model: String,
    pub evaluated_models: Vec<String>,
    pub embedding_model: String,
    /// Awareness judge; the generator model when unset.
    pub judge_model: Option<String>,
    pub biases: Vec<BiasLabel>,
    pub seeds: PathBuf,
    #[serde(skip_serializing)]
    pub output: PathBuf,
    /// Fixed creation stamp for generated pairs; the current UTC time when
    /// unset.
    pub created_at: Option<String>,
    pub awareness_runs: u32,
    pub backend: BackendConfig,
    pub prolog: PrologConfig,
    pub parallelism: Parallelism,
    pub cascade: CascadeConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            generator_model: String::new(),
            evaluated_models: Vec::new(),
            embedding_model: "text-embedding-3-small".into(),
            judge_model: None,
            biases: BiasLabel::ALL.to_vec(),
            seeds: PathBuf::from("seeds.v1"),
            output: PathBuf::from("out"),
            created_at: None,
            awareness_runs: 5,
            backend: BackendConfig::default(),
            prolog: PrologConfig::default(),
            parallelism: Parallelism::default(),
            cascade: CascadeConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// `p` joined onto the config directory unless already absolute.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn judge(&self) -> &str {
        self.judge_model.as_deref().unwrap_or(&self.generator_model)
    }

    pub fn prolog_timeout(&self) -> Duration {
        Duration::from_secs(self.prolog.timeout_secs)
    }

    /// Checks what generation needs.
    pub fn validate_generate(&self) -> Result<(), ConfigError> {
        self.cascade.validate()?;
        if self.generator_model.trim().is_empty() {
            return Err(field("generator_model", "must be set"));
        }
        if self.biases.is_empty() {
            return Err(field("biases", "select at least one bias"));
        }
        if !self.resolve(&self.seeds).is_file() {
            return Err(field(
                "seeds",
                format!("{} does not exist", self.resolve(&self.seeds).display()),
            ));
        }
        if self.prolog.timeout_secs == 0 {
            return Err(field("prolog.timeout_secs", "must be at least 1"));
        }
        self.validate_backend()
    }

    /// Checks what evaluation needs.
    pub fn validate_evaluate(&self) -> Result<(), ConfigError> {
        if self.evaluated_models.is_empty() {
            return Err(field("evaluated_models", "name at least one model"));
        }
        if self.awareness_runs == 0 {
            return Err(field("awareness_runs", "must be at least 1"));
        }
        self.validate_backend()
    }

    fn validate_backend(&self) -> Result<(), ConfigError> {
        if self.backend.max_attempts == 0 {
            return Err(field("backend.max_attempts", "must be at least 1"));
        }
        if self.parallelism.in_flight == 0 || self.parallelism.workers == 0 {
            return Err(field("parallelism", "caps must be at least 1"));
        }
        if self.backend.kind == BackendKind::Fake {
            let script = self
                .backend
                .script
                .as_ref()
                .ok_or_else(|| field("backend.script", "the fake backend needs a script"))?;
            if !self.resolve(script).is_file() {
                return Err(field(
                    "backend.script",
                    format!("{} does not exist", self.resolve(script).display()),
                ));
            }
        }
        Ok(())
    }
}
