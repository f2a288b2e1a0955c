//! Usage rules and policies.
//!
//! A policy holds at most one rule of each of the four obligation types.
//! A missing rule places no constraint of that type.

mod codes;
mod metafile;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use codes::{CountryCode, DomainCode, RegionCode};
pub use metafile::{parse_policy, serialize_policy};

pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("temporal rule needs a positive duration")]
    NonPositiveDuration,
    #[error("access counter rule needs at least one access")]
    ZeroAccessCount,
    #[error("unknown domain code {0}")]
    UnknownDomainCode(u64),
    #[error("unknown region code {0}")]
    UnknownRegionCode(u64),
    #[error("malformed metafile at byte {offset}: {message}")]
    MalformedMetafile { offset: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleType {
    Temporal,
    AccessCounter,
    Domain,
    Geographical,
}

impl RuleType {
    pub const ALL: [RuleType; 4] = [RuleType::Temporal, RuleType::AccessCounter, RuleType::Domain, RuleType::Geographical];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleType::Temporal => "temporal",
            RuleType::AccessCounter => "access_counter",
            RuleType::Domain => "domain",
            RuleType::Geographical => "geographical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "temporal" => Some(RuleType::Temporal),
            "access_counter" | "counter" | "accessCounter" => Some(RuleType::AccessCounter),
            "domain" => Some(RuleType::Domain),
            "geographical" | "country" | "geo" => Some(RuleType::Geographical),
            _ => None,
        }
    }
}

impl fmt::Display for RuleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UsageRule {
    /// Maximum time, in seconds, a retrieved copy may be kept.
    Temporal {
        max_retention: u64,
    },
    /// Maximum number of local accesses before the copy is deleted.
    AccessCounter {
        max_accesses: u64,
    },
    Domain(DomainCode),
    Geographical(RegionCode),
}

impl UsageRule {
    pub fn rule_type(&self) -> RuleType {
        match self {
            UsageRule::Temporal { .. } => RuleType::Temporal,
            UsageRule::AccessCounter { .. } => RuleType::AccessCounter,
            UsageRule::Domain(_) => RuleType::Domain,
            UsageRule::Geographical(_) => RuleType::Geographical,
        }
    }

    /// Builds a rule from its integer parameter, as carried on-chain and in metafiles.
    pub fn from_parameter(rule_type: RuleType, value: u64) -> Result<Self, PolicyError> {
        let rule = match rule_type {
            RuleType::Temporal => UsageRule::Temporal { max_retention: value },
            RuleType::AccessCounter => UsageRule::AccessCounter { max_accesses: value },
            RuleType::Domain => {
                UsageRule::Domain(u32::try_from(value).ok().and_then(DomainCode::from_code).ok_or(PolicyError::UnknownDomainCode(value))?)
            }
            RuleType::Geographical => {
                UsageRule::Geographical(RegionCode(u16::try_from(value).map_err(|_| PolicyError::UnknownRegionCode(value))?))
            }
        };
        validate_rule(&rule)?;
        Ok(rule)
    }

    pub fn parameter(&self) -> u64 {
        match *self {
            UsageRule::Temporal { max_retention } => max_retention,
            UsageRule::AccessCounter { max_accesses } => max_accesses,
            UsageRule::Domain(d) => d.code().into(),
            UsageRule::Geographical(r) => r.0.into(),
        }
    }
}

impl fmt::Display for UsageRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UsageRule::Temporal { max_retention } => write!(f, "temporal({max_retention}s)"),
            UsageRule::AccessCounter { max_accesses } => write!(f, "access_counter({max_accesses})"),
            UsageRule::Domain(d) => write!(f, "domain({d})"),
            UsageRule::Geographical(r) => write!(f, "geographical({})", r.0),
        }
    }
}

pub fn validate_rule(rule: &UsageRule) -> Result<(), PolicyError> {
    match *rule {
        UsageRule::Temporal { max_retention: 0 } => Err(PolicyError::NonPositiveDuration),
        UsageRule::AccessCounter { max_accesses: 0 } => Err(PolicyError::ZeroAccessCount),
        UsageRule::Geographical(region) if !region.is_known() => Err(PolicyError::UnknownRegionCode(region.0.into())),
        _ => Ok(()),
    }
}

/// A set of usage rules, at most one per [`RuleType`]. Every stored rule is valid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct UsagePolicy {
    temporal: Option<u64>,
    access_counter: Option<u64>,
    domain: Option<DomainCode>,
    geographical: Option<RegionCode>,
}

impl UsagePolicy {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_rules<I: IntoIterator<Item = UsageRule>>(rules: I) -> Result<Self, PolicyError> {
        let mut policy = Self::empty();
        for rule in rules {
            policy.set(rule)?;
        }
        Ok(policy)
    }

    /// Stores `rule`, replacing any rule of the same type. Returns the previous one.
    pub fn set(&mut self, rule: UsageRule) -> Result<Option<UsageRule>, PolicyError> {
        validate_rule(&rule)?;
        let previous = self.get(rule.rule_type());
        match rule {
            UsageRule::Temporal { max_retention } => self.temporal = Some(max_retention),
            UsageRule::AccessCounter { max_accesses } => self.access_counter = Some(max_accesses),
            UsageRule::Domain(d) => self.domain = Some(d),
            UsageRule::Geographical(r) => self.geographical = Some(r),
        }
        Ok(previous)
    }

    pub fn with(mut self, rule: UsageRule) -> Result<Self, PolicyError> {
        self.set(rule)?;
        Ok(self)
    }

    pub fn clear(&mut self, rule_type: RuleType) -> Option<UsageRule> {
        let previous = self.get(rule_type);
        match rule_type {
            RuleType::Temporal => self.temporal = None,
            RuleType::AccessCounter => self.access_counter = None,
            RuleType::Domain => self.domain = None,
            RuleType::Geographical => self.geographical = None,
        }
        previous
    }

    pub fn get(&self, rule_type: RuleType) -> Option<UsageRule> {
        match rule_type {
            RuleType::Temporal => self.temporal.map(|s| UsageRule::Temporal { max_retention: s }),
            RuleType::AccessCounter => self.access_counter.map(|n| UsageRule::AccessCounter { max_accesses: n }),
            RuleType::Domain => self.domain.map(UsageRule::Domain),
            RuleType::Geographical => self.geographical.map(UsageRule::Geographical),
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = UsageRule> + '_ {
        RuleType::ALL.into_iter().filter_map(|t| self.get(t))
    }

    pub fn is_empty(&self) -> bool {
        self.rules().next().is_none()
    }

    pub fn temporal(&self) -> Option<u64> {
        self.temporal
    }

    pub fn access_counter(&self) -> Option<u64> {
        self.access_counter
    }

    pub fn domain(&self) -> Option<DomainCode> {
        self.domain
    }

    pub fn geographical(&self) -> Option<RegionCode> {
        self.geographical
    }
}

impl fmt::Display for UsagePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rules().map(|r| r.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Policy that governs a resource: its specific policy when one exists,
/// otherwise the datastore default. Specific policies replace the default
/// as a whole; rules are never merged.
pub fn effective_policy(default_policy: &UsagePolicy, specific_policy: Option<&UsagePolicy>) -> UsagePolicy {
    *specific_policy.unwrap_or(default_policy)
}

/// The usage policy attached to the motivating whale-photo resource:
/// research apps only, European devices only, 20 days, 100 opens.
pub fn scenario_policy() -> UsagePolicy {
    UsagePolicy {
        temporal: Some(20 * SECONDS_PER_DAY),
        access_counter: Some(100),
        domain: Some(DomainCode::Research),
        geographical: Some(RegionCode::EUROPE),
    }
}
