//! TOML configuration and test manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::{FallbackPolicy, Granularity, DEFAULT_K, HASHING_PROVIDER_ID};
use crate::query::DEFAULT_HOP_LIMIT;
use crate::repo::{RunnerConfig, TestCase, TestRole};

pub const DEFAULT_REPRODUCER_TURNS: usize = 20;
pub const DEFAULT_PATCHER_TURNS: usize = 50;
pub const DEFAULT_CANDIDATE_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Vote,
    MinComplexity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default)]
    pub strategy: Strategy,
    /// `(alignment, minimality, locality)`; normalized before use.
    #[serde(default = "default_weights")]
    pub vote_weights: [f64; 3],
    #[serde(default = "default_candidates")]
    pub candidate_count: usize,
}

fn default_weights() -> [f64; 3] {
    [0.5, 0.25, 0.25]
}

fn default_candidates() -> usize {
    DEFAULT_CANDIDATE_COUNT
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            strategy: Strategy::Vote,
            vote_weights: default_weights(),
            candidate_count: DEFAULT_CANDIDATE_COUNT,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.candidate_count == 0 {
            return Err(ConfigError::Invalid("candidate_count must be at least 1".into()));
        }
        if self.vote_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ConfigError::Invalid("vote weights must be nonnegative".into()));
        }
        if self.vote_weights.iter().sum::<f64>() <= 0.0 {
            return Err(ConfigError::Invalid("vote weights must not all be zero".into()));
        }
        Ok(())
    }

    /// Weights scaled to sum to one.
    pub fn normalized_weights(&self) -> [f64; 3] {
        let sum: f64 = self.vote_weights.iter().sum();
        if sum <= 0.0 {
            return default_weights();
        }
        self.vote_weights.map(|w| w / sum)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_hops")]
    pub hop_limit: usize,
    #[serde(default = "default_granularities")]
    pub granularities: BTreeSet<Granularity>,
    #[serde(default)]
    pub fallback: FallbackPolicy,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_hops() -> usize {
    DEFAULT_HOP_LIMIT
}

fn default_granularities() -> BTreeSet<Granularity> {
    Granularity::all()
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: DEFAULT_K,
            hop_limit: DEFAULT_HOP_LIMIT,
            granularities: Granularity::all(),
            fallback: FallbackPolicy::IntentOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default = "default_provider")]
    pub provider_id: String,
    /// Shell command for an external provider; unset means the built-in
    /// hashing provider.
    #[serde(default)]
    pub endpoint: Option<String>,
}

fn default_provider() -> String {
    HASHING_PROVIDER_ID.to_string()
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider_id: default_provider(),
            endpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    #[serde(default = "default_repro_turns")]
    pub reproducer_turns: usize,
    #[serde(default = "default_patch_turns")]
    pub patcher_turns: usize,
    #[serde(default = "default_judge_turns")]
    pub judge_turns: usize,
}

fn default_repro_turns() -> usize {
    DEFAULT_REPRODUCER_TURNS
}

fn default_patch_turns() -> usize {
    DEFAULT_PATCHER_TURNS
}

fn default_judge_turns() -> usize {
    1
}

impl Default for AgentsConfig {
    fn default() -> Self {
        AgentsConfig {
            reproducer_turns: DEFAULT_REPRODUCER_TURNS,
            patcher_turns: DEFAULT_PATCHER_TURNS,
            judge_turns: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub runner: RunnerConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub agents: AgentsConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.selection.validate()?;
        if self.retrieval.k == 0 {
            return Err(ConfigError::Invalid("retrieval.k must be at least 1".into()));
        }
        if self.agents.reproducer_turns == 0 || self.agents.patcher_turns == 0 || self.agents.judge_turns == 0 {
            return Err(ConfigError::Invalid("turn budgets must be at least 1".into()));
        }
        if self.runner.timeout_seconds == 0 {
            return Err(ConfigError::Invalid("runner.timeout_seconds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    command: String,
    #[serde(default = "default_role")]
    role: TestRole,
    #[serde(default)]
    timeout_seconds: Option<u64>,
    #[serde(default)]
    support_files: BTreeMap<String, String>,
}

fn default_role() -> TestRole {
    TestRole::Regression
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    test: Vec<ManifestEntry>,
}

/// Parses a `[[test]]` manifest. Tests without their own timeout use the
/// runner default.
pub fn parse_tests_manifest(text: &str, runner: &RunnerConfig) -> Result<Vec<TestCase>, ConfigError> {
    let manifest: Manifest = toml::from_str(text)?;
    let mut seen = BTreeSet::new();
    manifest
        .test
        .into_iter()
        .map(|e| {
            if !seen.insert(e.id.clone()) {
                return Err(ConfigError::Invalid(format!("duplicate test id {:?}", e.id)));
            }
            let timeout = match e.timeout_seconds {
                Some(0) => return Err(ConfigError::Invalid(format!("test {:?} has a zero timeout", e.id))),
                Some(s) => Duration::from_secs(s),
                None => runner.default_timeout(),
            };
            let mut t = TestCase::new(e.id, e.command, e.role, timeout);
            t.support_files = e.support_files;
            Ok(t)
        })
        .collect()
}

pub fn load_tests_manifest(path: &Path, runner: &RunnerConfig) -> Result<Vec<TestCase>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tests_manifest(&text, runner)
}
