use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::dealer::DEALER_NAME;
use crate::routing::REGISTRY_NAME;
use crate::sss::PrimeField;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("mapping line {line}: {reason}")]
    Mapping { line: usize, reason: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
}

/// What a topology is made of and where its services listen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub controllers: usize,
    pub nodes: usize,
    /// Overrides the generated `controller-k` names.
    pub controller_names: Option<Vec<String>>,
    pub node_names: Option<Vec<String>>,
    pub dealer: String,
    pub registry: String,
    pub seed: u64,
    pub host: String,
    /// Registry listens here, dealer on the next port, then controllers, then nodes.
    pub base_port: u16,
    /// INI file of `name = url` lines; replaces the generated ports.
    pub mapping_file: Option<PathBuf>,
    /// SQLite file for the action store; in-memory when absent.
    pub database: Option<PathBuf>,
    pub auto_respond: bool,
    /// Decimal Shamir modulus; the 256-bit production prime when absent.
    pub shamir_prime: Option<String>,
    /// Run allow-listed commands on nodes instead of only recording them.
    pub execute_actions: bool,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            controllers: 6,
            nodes: 6,
            controller_names: None,
            node_names: None,
            dealer: DEALER_NAME.into(),
            registry: REGISTRY_NAME.into(),
            seed: 0,
            host: "127.0.0.1".into(),
            base_port: 7400,
            mapping_file: None,
            database: None,
            auto_respond: false,
            shamir_prime: None,
            execute_actions: false,
        }
    }
}

impl TopologyConfig {
    /// Six controllers and six nodes.
    pub fn demo() -> Self {
        Self::default()
    }

    /// Three controllers and two nodes.
    pub fn minimal() -> Self {
        Self { controllers: 3, nodes: 2, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let config: Self = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn controller_names(&self) -> Vec<String> {
        self.controller_names
            .clone()
            .unwrap_or_else(|| (1..=self.controllers).map(|k| format!("controller-{k}")).collect())
    }

    pub fn node_names(&self) -> Vec<String> {
        self.node_names.clone().unwrap_or_else(|| (1..=self.nodes).map(|k| format!("node-{k}")).collect())
    }

    /// Every service name: registry, dealer, controllers, nodes.
    pub fn service_names(&self) -> Vec<String> {
        let mut names = vec![self.registry.clone(), self.dealer.clone()];
        names.extend(self.controller_names());
        names.extend(self.node_names());
        names
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let controllers = self.controller_names();
        let nodes = self.node_names();
        if controllers.is_empty() || nodes.is_empty() {
            return Err(ConfigError::Invalid("need at least one controller and one node".into()));
        }
        let mut seen = BTreeSet::new();
        for name in self.service_names() {
            if name.trim().is_empty() || name.contains(char::is_whitespace) {
                return Err(ConfigError::Invalid(format!("bad service name {name:?}")));
            }
            if !seen.insert(name.clone()) {
                return Err(ConfigError::Invalid(format!("duplicate service name {name}")));
            }
        }
        self.field()?;
        Ok(())
    }

    pub fn field(&self) -> Result<PrimeField, ConfigError> {
        match &self.shamir_prime {
            None => Ok(PrimeField::production()),
            Some(text) => {
                let modulus: BigUint =
                    text.trim().parse().map_err(|_| ConfigError::Invalid(format!("bad prime {text:?}")))?;
                PrimeField::new(modulus).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }

    /// Name to URL for every service, from the mapping file or generated ports.
    pub fn mapping(&self) -> Result<Vec<(String, String)>, ConfigError> {
        if let Some(path) = &self.mapping_file {
            let text =
                std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
            let entries = parse_mapping(&text)?;
            let names: BTreeSet<&str> = entries.iter().map(|(n, _)| n.as_str()).collect();
            if let Some(missing) = self.service_names().iter().find(|n| !names.contains(n.as_str())) {
                return Err(ConfigError::Invalid(format!("mapping has no entry for {missing}")));
            }
            return Ok(entries);
        }
        Ok(self
            .service_names()
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let port = self.base_port as usize + i;
                (name, format!("http://{}:{port}", self.host))
            })
            .collect())
    }
}

/// Parses `name = url` lines. Blank lines, `#`/`;` comments and `[section]`
/// headers are skipped.
pub fn parse_mapping(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let err = |reason: &str| ConfigError::Mapping { line: i + 1, reason: reason.into() };
        let (name, url) = line.split_once('=').ok_or_else(|| err("expected `name = url`"))?;
        let (name, url) = (name.trim(), url.trim());
        if name.is_empty() || url.is_empty() {
            return Err(err("empty name or url"));
        }
        if entries.iter().any(|(n, _)| n == name) {
            return Err(err("duplicate name"));
        }
        entries.push((name.to_string(), url.to_string()));
    }
    Ok(entries)
}

pub fn render_mapping(entries: &[(String, String)]) -> String {
    entries.iter().map(|(name, url)| format!("{name} = {url}\n")).collect()
}
