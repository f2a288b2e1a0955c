//! The two JSON metafiles kept at the root of a datastore directory.
//!
//! `DTconfig.json`:
//!
//! ```json
//! {"datastoreId":1,"publicKey":"02..","privateKey":"..","baseUrl":"https://BobNode.com/",
//!  "podType":"social","dtIndexing":"0x..","obligationsAddress":"0x..",
//!  "resources":[{"path":"/images/Mesoplodon.jpg","resourceId":1,"registeredAt":3}],
//!  "retrievers":{"1":["03.."]},"oracleCursor":0}
//! ```
//!
//! `DTobligations.json`: `{"default":{..policy..},"resources":{"1":{..policy..}}}`
//! where each policy uses the metafile encoding of [`crate::policy`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DatastoreError;
use crate::contracts::PodType;
use crate::identity::PublicKey;
use crate::ledger::Address;
use crate::policy::{effective_policy, UsagePolicy};

pub const CONFIG_FILE: &str = "DTconfig.json";
pub const OBLIGATIONS_FILE: &str = "DTobligations.json";
pub const RESOURCE_DIR: &str = "resources";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ResourceEntry {
    pub path: String,
    pub resource_id: u64,
    /// Block height at which the resource was registered.
    pub registered_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DtConfig {
    pub datastore_id: u64,
    pub public_key: PublicKey,
    pub private_key: String,
    pub base_url: String,
    pub pod_type: PodType,
    pub dt_indexing: Address,
    pub obligations_address: Address,
    pub resources: Vec<ResourceEntry>,
    /// Resource id to every consumer ever granted it.
    pub retrievers: BTreeMap<u64, BTreeSet<PublicKey>>,
    pub oracle_cursor: u64,
}

impl DtConfig {
    pub fn resource_by_path(&self, path: &str) -> Option<&ResourceEntry> {
        self.resources.iter().find(|r| r.path == path)
    }

    pub fn resource_by_id(&self, id: u64) -> Option<&ResourceEntry> {
        self.resources.iter().find(|r| r.resource_id == id)
    }

    /// Full url of a path relative to the base url.
    pub fn url_for(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtObligationsFile {
    pub default: UsagePolicy,
    pub resources: BTreeMap<u64, UsagePolicy>,
}

impl DtObligationsFile {
    pub fn effective(&self, resource_id: u64) -> UsagePolicy {
        effective_policy(&self.default, self.resources.get(&resource_id))
    }
}

pub(super) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DatastoreError> {
    let bytes = fs::read(path).map_err(|e| DatastoreError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| DatastoreError::Metafile(format!("{}: {e}", path.display())))
}

pub(super) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatastoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("metafiles always encode");
    bytes.push(b'\n');
    crate::fsutil::write_atomic(path, &bytes).map_err(|e| DatastoreError::Io(format!("{}: {e}", path.display())))
}
