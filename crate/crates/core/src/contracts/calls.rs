//! Typed wrappers for building governance transactions and decoding reads.

use serde::de::DeserializeOwned;
use serde_json::json;

use super::{rule_function_name, DT_INDEXING, DT_OBLIGATIONS};
use super::{MonitoringSession, ObligationRules, PodRecord, PodType, ResourceRecord, RuleScope};
use crate::identity::PublicKey;
use crate::ledger::{Address, Chain, LedgerError, Receipt, Submitter, Target, Value, DEPLOY};
use crate::policy::UsageRule;

fn decode<T: DeserializeOwned>(v: Value) -> Result<T, LedgerError> {
    serde_json::from_value(v).map_err(|e| LedgerError::Reverted(format!("undecodable contract output: {e}")))
}

/// Signs and submits a contract call as `who`.
pub fn invoke<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    at: Address,
    function: &str,
    args: Vec<Value>,
) -> Result<Receipt, LedgerError> {
    who.submit_as(chain, Target::Contract(at), function, args)
}

/// Like [`invoke`] but a revert becomes an error.
pub fn invoke_ok<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    at: Address,
    function: &str,
    args: Vec<Value>,
) -> Result<Receipt, LedgerError> {
    let receipt = invoke(chain, who, at, function, args)?;
    match receipt.revert_reason() {
        Some(reason) => Err(LedgerError::Reverted(reason.to_owned())),
        None => Ok(receipt),
    }
}

pub fn deploy<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    kind: &str,
    args: Vec<Value>,
) -> Result<Receipt, LedgerError> {
    who.submit_as(chain, Target::Deploy { kind: kind.to_owned() }, DEPLOY, args)
}

/// Deploys DTindexing (and with it the PullInOracle).
pub fn deploy_indexing<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    session_deadline: Option<u64>,
) -> Result<Address, LedgerError> {
    let args = session_deadline.map(|d| vec![json!(d)]).unwrap_or_default();
    let receipt = deploy(chain, who, DT_INDEXING, args)?;
    if let Some(reason) = receipt.revert_reason() {
        return Err(LedgerError::Reverted(reason.to_owned()));
    }
    decode(receipt.output)
}

pub fn deploy_obligations<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    dt_indexing: Address,
    pod_id: u64,
) -> Result<Receipt, LedgerError> {
    deploy(chain, who, DT_OBLIGATIONS, vec![json!(dt_indexing), json!(who.account()), json!(pod_id)])
}

/// Pod id and obligations address assigned by a successful `registerPod`.
pub fn register_pod<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    dt_indexing: Address,
    base_url: &str,
    pod_type: PodType,
) -> Result<(u64, Address), LedgerError> {
    let args = vec![json!(base_url), json!(pod_type.as_str()), json!(who.account())];
    let receipt = invoke_ok(chain, who, dt_indexing, "registerPod", args)?;
    let event = receipt.event(super::EVENT_NEW_POD).expect("registerPod emits NewPod");
    Ok((decode(event.payload["idPod"].clone())?, decode(event.payload["obligationAddress"].clone())?))
}

pub fn register_resource<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    dt_indexing: Address,
    pod_id: u64,
    url: &str,
) -> Result<u64, LedgerError> {
    let receipt = invoke_ok(chain, who, dt_indexing, "registerResource", vec![json!(pod_id), json!(url)])?;
    decode(receipt.output)
}

/// Arguments for the rule function selected by `scope` and the rule's type.
pub fn rule_args(scope: RuleScope, value: Option<u64>) -> Vec<Value> {
    let mut args = Vec::new();
    if let RuleScope::Resource(id) = scope {
        args.push(json!(id));
    }
    if let Some(v) = value {
        args.push(json!(v));
    }
    args
}

pub fn add_rule<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    obligations: Address,
    scope: RuleScope,
    rule: UsageRule,
) -> Result<Receipt, LedgerError> {
    let function = rule_function_name(true, scope, rule.rule_type());
    invoke(chain, who, obligations, function, rule_args(scope, Some(rule.parameter())))
}

pub fn remove_rule<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    obligations: Address,
    scope: RuleScope,
    rule_type: crate::policy::RuleType,
) -> Result<Receipt, LedgerError> {
    let function = rule_function_name(false, scope, rule_type);
    invoke(chain, who, obligations, function, rule_args(scope, None))
}

/// Starts a monitoring session; returns its id.
pub fn monitor_compliance<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    obligations: Address,
    resource_ids: &[u64],
    responders: &[PublicKey],
    deadline: Option<u64>,
) -> Result<u64, LedgerError> {
    let args = vec![json!(resource_ids), json!(responders), json!(deadline)];
    let receipt = invoke_ok(chain, who, obligations, "monitorCompliance", args)?;
    decode(receipt.output)
}

pub fn callback<C: Chain + ?Sized, S: Submitter + ?Sized>(
    chain: &mut C,
    who: &S,
    oracle: Address,
    session_id: u64,
    evidence: &str,
) -> Result<Receipt, LedgerError> {
    invoke(chain, who, oracle, "_callback", vec![json!(session_id), json!(evidence)])
}

pub fn obligation_rules<C: Chain + ?Sized>(chain: &C, obligations: Address, resource_id: u64) -> Result<ObligationRules, LedgerError> {
    decode(chain.call(obligations, "getObligationRules", &[json!(resource_id)])?)
}

pub fn default_rules<C: Chain + ?Sized>(chain: &C, obligations: Address) -> Result<ObligationRules, LedgerError> {
    decode(chain.call(obligations, "getDefaultObligationRules", &[])?)
}

pub fn pods_by_type<C: Chain + ?Sized>(chain: &C, dt_indexing: Address, pod_type: PodType) -> Result<Vec<PodRecord>, LedgerError> {
    decode(chain.call(dt_indexing, pod_type.search_function(), &[])?)
}

pub fn pod<C: Chain + ?Sized>(chain: &C, dt_indexing: Address, pod_id: u64) -> Result<PodRecord, LedgerError> {
    decode(chain.call(dt_indexing, "getPod", &[json!(pod_id)])?)
}

pub fn resource<C: Chain + ?Sized>(chain: &C, dt_indexing: Address, resource_id: u64) -> Result<ResourceRecord, LedgerError> {
    decode(chain.call(dt_indexing, "getResource", &[json!(resource_id)])?)
}

pub fn pod_resources<C: Chain + ?Sized>(chain: &C, dt_indexing: Address, pod_id: u64) -> Result<Vec<ResourceRecord>, LedgerError> {
    decode(chain.call(dt_indexing, "getPodResources", &[json!(pod_id)])?)
}

pub fn oracle_address<C: Chain + ?Sized>(chain: &C, dt_indexing: Address) -> Result<Address, LedgerError> {
    decode(chain.call(dt_indexing, "getOracle", &[])?)
}

pub fn session<C: Chain + ?Sized>(chain: &C, oracle: Address, session_id: u64) -> Result<MonitoringSession, LedgerError> {
    decode(chain.call(oracle, "getSession", &[json!(session_id)])?)
}

/// Evidence of a finished session; reverts with `SessionNotFinished` while open.
pub fn monitoring_evidence<C: Chain + ?Sized>(chain: &C, obligations: Address, session_id: u64) -> Result<MonitoringSession, LedgerError> {
    decode(chain.call(obligations, "getMonitoringEvidence", &[json!(session_id)])?)
}
