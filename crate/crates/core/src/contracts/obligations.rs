//! DTobligations: per-datastore policy store and monitoring initiator.
//!
//! Each rule function checks its modifiers in the order they are declared
//! on the contract, then applies the change.

use std::collections::{BTreeMap, BTreeSet};

use super::records::ObligationRules;
use crate::identity::PublicKey;
use crate::ledger::{Address, Revert};
use crate::policy::{effective_policy, RuleType, UsagePolicy, UsageRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleScope {
    Default,
    Resource(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Modifier {
    OnlyOwner,
    IsTheResourceCovered,
    IsValidTemporal,
    HasSpecificRules,
}

impl Modifier {
    fn reason(self) -> &'static str {
        match self {
            Modifier::OnlyOwner => "onlyOwner",
            Modifier::IsTheResourceCovered => "isTheResourceCovered",
            Modifier::IsValidTemporal => "isValidTemporal",
            Modifier::HasSpecificRules => "hasSpecificRules",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum RuleOp {
    Add,
    Remove,
}

#[derive(Debug)]
pub(super) struct RuleFunction {
    pub name: &'static str,
    pub op: RuleOp,
    pub default_scope: bool,
    pub rule_type: RuleType,
    pub modifiers: &'static [Modifier],
}

use Modifier::{HasSpecificRules as Specific, IsTheResourceCovered as Covered, IsValidTemporal as Temporal, OnlyOwner as Owner};

macro_rules! rule_fn {
    ($name:literal, $op:ident, $default:literal, $rt:ident, [$($m:ident),*]) => {
        RuleFunction { name: $name, op: RuleOp::$op, default_scope: $default, rule_type: RuleType::$rt, modifiers: &[$($m),*] }
    };
}

pub(super) const RULE_FUNCTIONS: &[RuleFunction] = &[
    rule_fn!("addDefaultAccessCounterObligation", Add, true, AccessCounter, [Owner]),
    rule_fn!("addDefaultTemporalObligation", Add, true, Temporal, [Temporal, Owner]),
    rule_fn!("addDefaultCountryObligation", Add, true, Geographical, [Owner]),
    rule_fn!("addDefaultDomainObligation", Add, true, Domain, [Owner]),
    rule_fn!("addAccessCounterObligation", Add, false, AccessCounter, [Covered, Owner]),
    rule_fn!("addDomainObligation", Add, false, Domain, [Owner, Covered]),
    rule_fn!("addCountryObligation", Add, false, Geographical, [Owner, Covered]),
    rule_fn!("addTemporalObligation", Add, false, Temporal, [Owner, Covered, Temporal]),
    rule_fn!("removeAccessCounterObligation", Remove, false, AccessCounter, [Owner, Covered, Specific]),
    rule_fn!("removeTemporalObligation", Remove, false, Temporal, [Covered, Owner, Specific]),
    rule_fn!("removeDomainObligation", Remove, false, Domain, [Covered, Owner, Specific]),
    rule_fn!("removeCountryObligation", Remove, false, Geographical, [Covered, Owner, Specific]),
    rule_fn!("removeDefaultTemporalObligation", Remove, true, Temporal, [Owner]),
    rule_fn!("removeDefaultAccessCounterObligation", Remove, true, AccessCounter, [Owner]),
    rule_fn!("removeDefaultCountryObligation", Remove, true, Geographical, [Owner]),
    rule_fn!("removeDefaultDomainObligation", Remove, true, Domain, [Owner]),
];

/// Contract function name for adding or removing a rule of `rule_type` in `scope`.
pub fn rule_function_name(add: bool, scope: RuleScope, rule_type: RuleType) -> &'static str {
    let op = if add { RuleOp::Add } else { RuleOp::Remove };
    RULE_FUNCTIONS
        .iter()
        .find(|f| f.op == op && f.default_scope == (scope == RuleScope::Default) && f.rule_type == rule_type)
        .map(|f| f.name)
        .expect("every (op, scope, type) combination has a function")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtObligations {
    pub(super) owner: PublicKey,
    pub(super) dt_indexing: Address,
    pub(super) pod_id: u64,
    default_rules: UsagePolicy,
    resource_rules: BTreeMap<u64, UsagePolicy>,
    pub(super) sessions: Vec<u64>,
}

impl DtObligations {
    pub(super) fn new(owner: PublicKey, dt_indexing: Address, pod_id: u64) -> Self {
        Self { owner, dt_indexing, pod_id, default_rules: UsagePolicy::empty(), resource_rules: BTreeMap::new(), sessions: Vec::new() }
    }

    pub fn owner(&self) -> PublicKey {
        self.owner
    }

    pub fn pod_id(&self) -> u64 {
        self.pod_id
    }

    pub fn default_rules(&self) -> UsagePolicy {
        self.default_rules
    }

    pub fn specific_rules(&self, resource_id: u64) -> Option<&UsagePolicy> {
        self.resource_rules.get(&resource_id)
    }

    pub fn with_specific_rules(&self, resource_id: u64) -> bool {
        self.resource_rules.contains_key(&resource_id)
    }

    pub fn obligation_rules(&self, resource_id: u64) -> UsagePolicy {
        effective_policy(&self.default_rules, self.specific_rules(resource_id))
    }

    pub(super) fn only_owner(&self, sender: &PublicKey) -> Result<(), Revert> {
        if *sender == self.owner {
            Ok(())
        } else {
            Err(Revert::new(Modifier::OnlyOwner.reason()))
        }
    }

    /// Runs one add/remove rule function. `covered` holds the ids of every
    /// resource registered under this contract's pod.
    pub(super) fn apply(
        &mut self,
        function: &RuleFunction,
        sender: &PublicKey,
        resource_id: Option<u64>,
        value: Option<u64>,
        covered: &BTreeSet<u64>,
    ) -> Result<ObligationRules, Revert> {
        for modifier in function.modifiers {
            let ok = match modifier {
                Modifier::OnlyOwner => *sender == self.owner,
                Modifier::IsTheResourceCovered => resource_id.is_some_and(|r| covered.contains(&r)),
                Modifier::IsValidTemporal => value.is_some_and(|v| v > 0),
                Modifier::HasSpecificRules => resource_id.is_some_and(|r| self.resource_rules.contains_key(&r)),
            };
            if !ok {
                return Err(Revert::new(modifier.reason()));
            }
        }

        match function.op {
            RuleOp::Add => {
                let value = value.ok_or_else(|| Revert::new("missing rule value"))?;
                let rule = UsageRule::from_parameter(function.rule_type, value).map_err(|e| Revert(format!("invalidRule: {e}")))?;
                let rules = match resource_id {
                    None => &mut self.default_rules,
                    Some(r) => self.resource_rules.entry(r).or_default(),
                };
                rules.set(rule).expect("rule validated above");
                Ok((*rules).into())
            }
            RuleOp::Remove => match resource_id {
                None => {
                    self.default_rules.clear(function.rule_type).ok_or_else(|| Revert::new("NoSuchRule"))?;
                    Ok(self.default_rules.into())
                }
                Some(r) => {
                    let rules = self.resource_rules.get_mut(&r).expect("hasSpecificRules checked");
                    rules.clear(function.rule_type).ok_or_else(|| Revert::new("NoSuchRule"))?;
                    let remaining = *rules;
                    // With no specific rule left the resource falls back to the default policy.
                    if remaining.is_empty() {
                        self.resource_rules.remove(&r);
                    }
                    Ok(remaining.into())
                }
            },
        }
    }
}
