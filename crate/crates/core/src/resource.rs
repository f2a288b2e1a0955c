use serde::{Deserialize, Serialize};

use crate::identity::PublicKey;

/// Where a shared resource lives and who owns it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRef {
    pub resource_id: u64,
    pub pod_id: u64,
    pub url: String,
    pub owner: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResourceRefError {
    #[error("resource ids start at 1")]
    ZeroId,
    #[error("resource url is empty")]
    EmptyUrl,
}

impl ResourceRef {
    pub fn new(resource_id: u64, pod_id: u64, url: impl Into<String>, owner: PublicKey) -> Result<Self, ResourceRefError> {
        let url = url.into();
        if resource_id == 0 {
            return Err(ResourceRefError::ZeroId);
        }
        if url.is_empty() {
            return Err(ResourceRefError::EmptyUrl);
        }
        Ok(Self { resource_id, pod_id, url, owner })
    }
}
