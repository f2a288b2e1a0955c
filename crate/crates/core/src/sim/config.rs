//! TOML network description.
//!
//! ```toml
//! seed = 7                    # attestation authority and enclave seeds
//! clock_start = 0             # simulated seconds at spawn
//! clock_step = 0              # seconds added after every script step
//! monitoring_period = 0       # blocks between scheduled sessions, 0 disables
//! session_deadline = 10       # blocks a session stays open
//! gas_table = "gas.toml"      # optional, relative to the config file
//!
//! [gas.DTindexing]            # optional inline overrides, same layout as gas_table
//! registerPod = 2703393
//!
//! [[nodes]]
//! name = "bob"
//! country = 372
//! pod_type = "social"
//! base_url = "https://BobNode.com/"
//! apps = [{ id = "ZooResearch", domain = "research" }]
//!
//! [[nodes.resources]]
//! path = "/images/Mesoplodon.jpg"
//! content = "..."             # or `file = "..."`
//! policy = { temporal = 1728000, accessCounter = 100, domain = 1, country = 150 }
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::SimError;
use crate::contracts::{default_gas_table, PodType, ABI};
use crate::ledger::GasTable;
use crate::policy::{parse_policy, CountryCode, DomainCode, UsagePolicy};

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub clock_start: u64,
    #[serde(default)]
    pub clock_step: u64,
    #[serde(default)]
    pub monitoring_period: u64,
    pub session_deadline: Option<u64>,
    pub gas_table: Option<PathBuf>,
    #[serde(default)]
    pub gas: toml::Table,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    /// ISO-3166 numeric code; absent means the location provider is down.
    pub country: Option<u16>,
    pub pod_type: String,
    pub base_url: Option<String>,
    #[serde(default)]
    pub apps: Vec<AppConfig>,
    #[serde(default)]
    pub resources: Vec<ResourceConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub id: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceConfig {
    pub path: String,
    pub content: Option<String>,
    pub file: Option<PathBuf>,
    pub policy: Option<UsagePolicy>,
    pub policy_file: Option<PathBuf>,
}

impl NetworkConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, SimError> {
        let mut cfg: NetworkConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn check(&self) -> Result<(), SimError> {
        let mut names = BTreeSet::new();
        for node in &self.nodes {
            let at = |msg: String| SimError::Config(format!("node {}: {msg}", node.name));
            if node.name.is_empty() || node.name.contains(char::is_whitespace) || node.name.contains(':') {
                return Err(at("names must be non-empty without spaces or ':'".into()));
            }
            if !names.insert(node.name.as_str()) {
                return Err(at("duplicate node name".into()));
            }
            if PodType::parse(&node.pod_type).is_none() {
                return Err(at(format!("unknown pod_type {:?}", node.pod_type)));
            }
            for app in &node.apps {
                if DomainCode::from_name(&app.domain).is_none() {
                    return Err(at(format!("app {}: unknown domain {:?}", app.id, app.domain)));
                }
            }
            for r in &node.resources {
                if r.content.is_some() == r.file.is_some() {
                    return Err(at(format!("resource {}: give exactly one of content or file", r.path)));
                }
                if r.policy.is_some() && r.policy_file.is_some() {
                    return Err(at(format!("resource {}: give at most one of policy or policy_file", r.path)));
                }
                self.resource_policy(r).map_err(|e| at(format!("resource {}: {e}", r.path)))?;
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn gas_table(&self) -> Result<GasTable, SimError> {
        let gas_err = |e: crate::ledger::GasTableError| SimError::Config(format!("gas table: {e}"));
        let mut table = default_gas_table();
        if let Some(p) = &self.gas_table {
            let path = self.resolve(p);
            let text = fs::read_to_string(&path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
            table = table.with_overrides(&text, ABI).map_err(gas_err)?;
        }
        if !self.gas.is_empty() {
            table = table.with_overrides(&toml::to_string(&self.gas).expect("tables encode"), ABI).map_err(gas_err)?;
        }
        Ok(table)
    }

    pub fn resource_payload(&self, r: &ResourceConfig) -> Result<Vec<u8>, SimError> {
        match (&r.content, &r.file) {
            (Some(text), _) => Ok(text.as_bytes().to_vec()),
            (None, Some(p)) => {
                let path = self.resolve(p);
                fs::read(&path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
            }
            (None, None) => Err(SimError::Config(format!("resource {} has no content", r.path))),
        }
    }

    pub fn resource_policy(&self, r: &ResourceConfig) -> Result<UsagePolicy, SimError> {
        if let Some(p) = &r.policy_file {
            let path = self.resolve(p);
            let bytes = fs::read(&path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
            return parse_policy(&bytes).map_err(|e| SimError::Config(format!("{}: {e}", path.display())));
        }
        Ok(r.policy.unwrap_or_default())
    }
}

impl NodeConfig {
    pub fn pod_type(&self) -> PodType {
        PodType::parse(&self.pod_type).expect("checked at load")
    }

    pub fn country(&self) -> Option<CountryCode> {
        self.country.map(CountryCode)
    }

    pub fn url(&self) -> String {
        self.base_url.clone().unwrap_or_else(|| format!("https://{}.node/", self.name))
    }
}
