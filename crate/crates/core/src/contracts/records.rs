use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::identity::PublicKey;
use crate::ledger::Address;
use crate::policy::{DomainCode, PolicyError, RegionCode, UsagePolicy, UsageRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PodType {
    Medical,
    Social,
    Financial,
}

impl PodType {
    pub const ALL: [PodType; 3] = [PodType::Medical, PodType::Social, PodType::Financial];

    pub fn as_str(self) -> &'static str {
        match self {
            PodType::Medical => "medical",
            PodType::Social => "social",
            PodType::Financial => "financial",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Name of the DTindexing search function for this type.
    pub fn search_function(self) -> &'static str {
        match self {
            PodType::Medical => "getMedicalPods",
            PodType::Social => "getSocialPods",
            PodType::Financial => "getFinancialPods",
        }
    }
}

impl fmt::Display for PodType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PodRecord {
    pub id: u64,
    pub owner: PublicKey,
    pub base_url: String,
    pub is_active: bool,
    pub pod_type: PodType,
    pub obligations_address: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceRecord {
    pub id: u64,
    pub owner: PublicKey,
    pub pod_id: u64,
    pub url: String,
    pub is_active: bool,
}

/// On-chain mirror of a [`UsagePolicy`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObligationRules {
    pub access_counter: Option<u64>,
    pub temporal: Option<u64>,
    pub country: Option<RegionCode>,
    pub domain: Option<DomainCode>,
}

impl From<UsagePolicy> for ObligationRules {
    fn from(p: UsagePolicy) -> Self {
        Self { access_counter: p.access_counter(), temporal: p.temporal(), country: p.geographical(), domain: p.domain() }
    }
}

impl TryFrom<ObligationRules> for UsagePolicy {
    type Error = PolicyError;

    fn try_from(r: ObligationRules) -> Result<Self, Self::Error> {
        let mut p = UsagePolicy::empty();
        if let Some(n) = r.access_counter {
            p.set(UsageRule::AccessCounter { max_accesses: n })?;
        }
        if let Some(s) = r.temporal {
            p.set(UsageRule::Temporal { max_retention: s })?;
        }
        if let Some(c) = r.country {
            p.set(UsageRule::Geographical(c))?;
        }
        if let Some(d) = r.domain {
            p.set(UsageRule::Domain(d))?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    Complete,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MonitoringSession {
    pub session_id: u64,
    pub resource_ids: Vec<u64>,
    pub initiator: Address,
    pub expected_responders: Vec<PublicKey>,
    /// Responder key to exported usage-log records.
    pub responses: BTreeMap<PublicKey, String>,
    pub state: SessionState,
    pub opened_at: u64,
    pub deadline: u64,
}

impl MonitoringSession {
    /// Last block at which a callback is still accepted.
    pub fn closes_after(&self) -> u64 {
        self.opened_at + self.deadline
    }

    /// State as seen at `block_height`: an open session past its deadline reads as timed out.
    pub fn state_at(&self, block_height: u64) -> SessionState {
        match self.state {
            SessionState::Open if block_height > self.closes_after() => SessionState::TimedOut,
            s => s,
        }
    }

    pub fn non_responders(&self) -> Vec<PublicKey> {
        self.expected_responders.iter().filter(|k| !self.responses.contains_key(k)).copied().collect()
    }
}
