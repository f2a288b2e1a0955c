//! Governance contracts hosted on the [`ledger`](crate::ledger).
//!
//! * `DTindexing`: one instance; indexes datastores (pods) and resources.
//! * `DTobligations`: one instance per pod, deployed by `registerPod`;
//!   stores default and per-resource obligation rules and starts monitoring.
//! * `PullInOracle`: deployed by `DTindexing`'s constructor; aggregates
//!   monitoring evidence.
//!
//! Function names match the contract ABI verbatim so gas-table keys line up.

pub mod calls;
mod indexing;
mod obligations;
mod oracle;
mod records;

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde_json::json;

pub use indexing::DtIndexing;
pub use obligations::{rule_function_name, DtObligations, RuleScope};
pub use oracle::{PullInOracle, DEFAULT_SESSION_DEADLINE};
pub use records::{MonitoringSession, ObligationRules, PodRecord, PodType, ResourceRecord, SessionState};

use crate::identity::PublicKey;
use crate::ledger::{
    Address, Checkpoint, ContractHost, ExecContext, FunctionSpec, GasTable, Ledger, LedgerError, Mutability, Revert, Value,
};
use obligations::RULE_FUNCTIONS;

pub const DT_INDEXING: &str = "DTindexing";
pub const DT_OBLIGATIONS: &str = "DTobligations";
pub const PULL_IN_ORACLE: &str = "PullInOracle";

pub const EVENT_NEW_POD: &str = "NewPod";
pub const EVENT_NEW_RESOURCE: &str = "NewResource";
pub const EVENT_NEW_MONITORING: &str = "NewMonitoring";

macro_rules! abi {
    ($($kind:ident . $name:literal : $m:ident),* $(,)?) => {
        &[$(FunctionSpec { kind: $kind, name: $name, mutability: Mutability::$m }),*]
    };
}

pub const ABI: &[FunctionSpec] = abi![
    DT_INDEXING."deployment": Write,
    DT_INDEXING."registerPod": Write,
    DT_INDEXING."registerResource": Write,
    DT_INDEXING."deactivateResource": Write,
    DT_INDEXING."deactivatePod": Write,
    DT_INDEXING."getMedicalPods": Read,
    DT_INDEXING."getSocialPods": Read,
    DT_INDEXING."getFinancialPods": Read,
    DT_INDEXING."getPodResources": Read,
    DT_INDEXING."getResource": Read,
    DT_INDEXING."getPod": Read,
    DT_INDEXING."getOracle": Read,
    DT_OBLIGATIONS."deployment": Write,
    DT_OBLIGATIONS."addDefaultAccessCounterObligation": Write,
    DT_OBLIGATIONS."addDefaultTemporalObligation": Write,
    DT_OBLIGATIONS."addDefaultDomainObligation": Write,
    DT_OBLIGATIONS."addDefaultCountryObligation": Write,
    DT_OBLIGATIONS."addAccessCounterObligation": Write,
    DT_OBLIGATIONS."addTemporalObligation": Write,
    DT_OBLIGATIONS."addCountryObligation": Write,
    DT_OBLIGATIONS."addDomainObligation": Write,
    DT_OBLIGATIONS."removeDefaultAccessCounterObligation": Write,
    DT_OBLIGATIONS."removeDefaultTemporalObligation": Write,
    DT_OBLIGATIONS."removeDefaultDomainObligation": Write,
    DT_OBLIGATIONS."removeDefaultCountryObligation": Write,
    DT_OBLIGATIONS."removeAccessCounterObligation": Write,
    DT_OBLIGATIONS."removeTemporalObligation": Write,
    DT_OBLIGATIONS."removeCountryObligation": Write,
    DT_OBLIGATIONS."removeDomainObligation": Write,
    DT_OBLIGATIONS."monitorCompliance": Write,
    DT_OBLIGATIONS."getObligationRules": Read,
    DT_OBLIGATIONS."getDefaultObligationRules": Read,
    DT_OBLIGATIONS."withSpecificRules": Read,
    DT_OBLIGATIONS."getMonitoringEvidence": Read,
    DT_OBLIGATIONS."getOwner": Read,
    PULL_IN_ORACLE."deployment": Write,
    PULL_IN_ORACLE."initializeMonitoring": Write,
    PULL_IN_ORACLE."_callback": Write,
    PULL_IN_ORACLE."getSession": Read,
];

/// Gas costs measured for the reference Solidity contracts. Functions the
/// measurement does not cover (`deactivatePod` and the oracle) cost 0.
pub const REFERENCE_GAS_COSTS: &[(&str, &str, u64)] = &[
    (DT_OBLIGATIONS, "deployment", 2_650_030),
    (DT_OBLIGATIONS, "addDefaultAccessCounterObligation", 62_627),
    (DT_OBLIGATIONS, "addDefaultTemporalObligation", 62_638),
    (DT_OBLIGATIONS, "addDefaultDomainObligation", 44_219),
    (DT_OBLIGATIONS, "addDefaultCountryObligation", 62_561),
    (DT_OBLIGATIONS, "addAccessCounterObligation", 138_768),
    (DT_OBLIGATIONS, "addTemporalObligation", 97_737),
    (DT_OBLIGATIONS, "addCountryObligation", 97_728),
    (DT_OBLIGATIONS, "addDomainObligation", 79_452),
    (DT_OBLIGATIONS, "removeDefaultAccessCounterObligation", 23_780),
    (DT_OBLIGATIONS, "removeDefaultTemporalObligation", 16_079),
    (DT_OBLIGATIONS, "removeDefaultDomainObligation", 24_747),
    (DT_OBLIGATIONS, "removeDefaultCountryObligation", 23_758),
    (DT_OBLIGATIONS, "removeAccessCounterObligation", 28_184),
    (DT_OBLIGATIONS, "removeTemporalObligation", 28_151),
    (DT_OBLIGATIONS, "removeCountryObligation", 28_173),
    (DT_OBLIGATIONS, "removeDomainObligation", 38_111),
    (DT_OBLIGATIONS, "monitorCompliance", 42_000),
    (DT_INDEXING, "deployment", 4_824_135),
    (DT_INDEXING, "registerPod", 2_703_393),
    (DT_INDEXING, "registerResource", 143_004),
    (DT_INDEXING, "deactivateResource", 21_465),
    (DT_INDEXING, "deactivatePod", 0),
    (PULL_IN_ORACLE, "deployment", 0),
    (PULL_IN_ORACLE, "initializeMonitoring", 0),
    (PULL_IN_ORACLE, "_callback", 0),
];

pub fn default_gas_table() -> GasTable {
    GasTable::new(REFERENCE_GAS_COSTS.iter().map(|(k, f, c)| (format!("{k}.{f}"), *c)))
}

pub type GovernanceLedger = Ledger<Governance>;

pub fn governance_ledger(gas: GasTable) -> Result<GovernanceLedger, LedgerError> {
    Ledger::new(Governance::default(), gas)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Contract {
    Indexing(DtIndexing),
    Obligations(DtObligations),
    Oracle(PullInOracle),
}

impl Contract {
    fn kind(&self) -> &'static str {
        match self {
            Contract::Indexing(_) => DT_INDEXING,
            Contract::Obligations(_) => DT_OBLIGATIONS,
            Contract::Oracle(_) => PULL_IN_ORACLE,
        }
    }
}

/// State of every deployed governance contract.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Governance {
    contracts: BTreeMap<Address, Contract>,
    /// Prior state of each contract written by the running transaction.
    undo: Option<Vec<(Address, Option<Contract>)>>,
}

fn arg<'a>(args: &'a [Value], i: usize, name: &str) -> Result<&'a Value, Revert> {
    args.get(i).ok_or_else(|| Revert(format!("missing argument {name}")))
}

fn arg_u64(args: &[Value], i: usize, name: &str) -> Result<u64, Revert> {
    arg(args, i, name)?.as_u64().ok_or_else(|| Revert(format!("argument {name} must be an unsigned integer")))
}

fn arg_str<'a>(args: &'a [Value], i: usize, name: &str) -> Result<&'a str, Revert> {
    arg(args, i, name)?.as_str().ok_or_else(|| Revert(format!("argument {name} must be a string")))
}

fn arg_as<T: DeserializeOwned>(args: &[Value], i: usize, name: &str) -> Result<T, Revert> {
    serde_json::from_value(arg(args, i, name)?.clone()).map_err(|e| Revert(format!("argument {name}: {e}")))
}

fn opt_u64(args: &[Value], i: usize, name: &str) -> Result<Option<u64>, Revert> {
    match args.get(i) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => arg_u64(args, i, name).map(Some),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("contract records always encode")
}

impl Governance {
    pub fn indexing(&self, address: &Address) -> Option<&DtIndexing> {
        match self.contracts.get(address) {
            Some(Contract::Indexing(c)) => Some(c),
            _ => None,
        }
    }

    pub fn obligations(&self, address: &Address) -> Option<&DtObligations> {
        match self.contracts.get(address) {
            Some(Contract::Obligations(c)) => Some(c),
            _ => None,
        }
    }

    pub fn oracle(&self, address: &Address) -> Option<&PullInOracle> {
        match self.contracts.get(address) {
            Some(Contract::Oracle(c)) => Some(c),
            _ => None,
        }
    }

    /// Saves the state of `address` before its first write in a transaction.
    fn touch(&mut self, address: &Address) {
        if let Some(undo) = &mut self.undo {
            if !undo.iter().any(|(a, _)| a == address) {
                undo.push((*address, self.contracts.get(address).cloned()));
            }
        }
    }

    fn insert(&mut self, address: Address, contract: Contract) {
        self.touch(&address);
        self.contracts.insert(address, contract);
    }

    fn indexing_mut(&mut self, address: &Address) -> &mut DtIndexing {
        self.touch(address);
        match self.contracts.get_mut(address) {
            Some(Contract::Indexing(c)) => c,
            _ => unreachable!("address resolved as DTindexing"),
        }
    }

    fn obligations_mut(&mut self, address: &Address) -> &mut DtObligations {
        self.touch(address);
        match self.contracts.get_mut(address) {
            Some(Contract::Obligations(c)) => c,
            _ => unreachable!("address resolved as DTobligations"),
        }
    }

    fn oracle_mut(&mut self, address: &Address) -> Result<&mut PullInOracle, Revert> {
        self.touch(address);
        match self.contracts.get_mut(address) {
            Some(Contract::Oracle(c)) => Ok(c),
            _ => Err(Revert::new("oracle not deployed")),
        }
    }

    /// Ids of every resource indexed under the pod an obligations contract serves.
    fn covered_resources(&self, obligations: &DtObligations) -> BTreeSet<u64> {
        self.indexing(&obligations.dt_indexing)
            .map(|idx| idx.resources().iter().filter(|r| r.pod_id == obligations.pod_id).map(|r| r.id).collect())
            .unwrap_or_default()
    }

    fn deploy_oracle(&mut self, ctx: &mut ExecContext, deadline: u64) -> Address {
        let address = ctx.allocate_address();
        self.insert(address, Contract::Oracle(PullInOracle::new(deadline)));
        address
    }

    fn deploy_obligations(&mut self, ctx: &mut ExecContext, owner: PublicKey, dt_indexing: Address, pod_id: u64) -> Address {
        let address = ctx.allocate_address();
        self.insert(address, Contract::Obligations(DtObligations::new(owner, dt_indexing, pod_id)));
        address
    }

    fn execute_indexing(&mut self, ctx: &mut ExecContext, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert> {
        let sender = ctx.sender();
        match function {
            "registerPod" => {
                let base_url = arg_str(args, 0, "newReference")?.to_owned();
                let pod_type = arg_str(args, 1, "podType")?;
                let pod_type = PodType::parse(pod_type).ok_or_else(|| Revert(format!("unknown podType {pod_type:?}")))?;
                let owner: PublicKey = arg_as(args, 2, "podAddress")?;
                if owner != sender {
                    return Err(Revert::new("podAddress must sign registerPod"));
                }
                if base_url.is_empty() {
                    return Err(Revert::new("emptyBaseUrl"));
                }
                let pod_id = self.indexing(&address).expect("resolved").next_pod_id();
                let obligations_address = self.deploy_obligations(ctx, owner, address, pod_id);
                self.indexing_mut(&address).push_pod(PodRecord {
                    id: pod_id,
                    owner,
                    base_url,
                    is_active: true,
                    pod_type,
                    obligations_address,
                });
                ctx.emit(address, EVENT_NEW_POD, json!({ "idPod": pod_id, "obligationAddress": obligations_address }));
                Ok(json!(pod_id))
            }
            "registerResource" => {
                let pod_id = arg_u64(args, 0, "podId")?;
                let url = arg_str(args, 1, "newReference")?.to_owned();
                let subscription = opt_u64(args, 2, "idSubscription")?.unwrap_or(0);
                let id = self.indexing_mut(&address).register_resource(&sender, pod_id, url, subscription)?;
                ctx.emit(address, EVENT_NEW_RESOURCE, json!({ "idResource": id }));
                Ok(json!(id))
            }
            "deactivateResource" => {
                let id = arg_u64(args, 0, "idResource")?;
                Ok(to_value(&self.indexing_mut(&address).deactivate_resource(&sender, id)?))
            }
            "deactivatePod" => {
                let id = arg_u64(args, 0, "podId")?;
                Ok(to_value(&self.indexing_mut(&address).deactivate_pod(&sender, id)?))
            }
            other => Err(Revert(format!("unhandled function {other}"))),
        }
    }

    fn execute_obligations(&mut self, ctx: &mut ExecContext, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert> {
        let sender = ctx.sender();
        if let Some(rule_fn) = RULE_FUNCTIONS.iter().find(|f| f.name == function) {
            let contract = self.obligations(&address).expect("resolved");
            let covered = self.covered_resources(contract);
            let (resource_id, value) = match (rule_fn.default_scope, rule_fn.op) {
                (true, obligations::RuleOp::Add) => (None, Some(arg_u64(args, 0, "value")?)),
                (true, obligations::RuleOp::Remove) => (None, None),
                (false, obligations::RuleOp::Add) => (Some(arg_u64(args, 0, "idResource")?), Some(arg_u64(args, 1, "value")?)),
                (false, obligations::RuleOp::Remove) => (Some(arg_u64(args, 0, "idResource")?), None),
            };
            let rules = self.obligations_mut(&address).apply(rule_fn, &sender, resource_id, value, &covered)?;
            return Ok(to_value(&rules));
        }
        match function {
            "monitorCompliance" => {
                let contract = self.obligations(&address).expect("resolved");
                contract.only_owner(&sender)?;
                let covered = self.covered_resources(contract);
                let mut resource_ids: Vec<u64> = match args.first() {
                    None | Some(Value::Null) => Vec::new(),
                    Some(_) => arg_as(args, 0, "resourceIds")?,
                };
                if resource_ids.is_empty() {
                    resource_ids = covered.iter().copied().collect();
                } else if resource_ids.iter().any(|r| !covered.contains(r)) {
                    return Err(Revert::new("isTheResourceCovered"));
                }
                let responders: Vec<PublicKey> = match args.get(1) {
                    None | Some(Value::Null) => Vec::new(),
                    Some(_) => arg_as(args, 1, "responders")?,
                };
                let deadline = opt_u64(args, 2, "deadline")?;
                let pod_id = contract.pod_id;
                let indexing = contract.dt_indexing;
                let oracle_address = self.indexing(&indexing).map(|i| i.oracle).ok_or_else(|| Revert::new("no DTindexing"))?;
                let block = ctx.block_index();
                let session = self.oracle_mut(&oracle_address)?.initialize_monitoring(address, resource_ids, responders, block, deadline);
                let session_id = session.session_id;
                let payload = json!({
                    "sessionId": session_id,
                    "initiator": address,
                    "podId": pod_id,
                    "resourceIds": session.resource_ids,
                    "expectedResponders": session.expected_responders,
                    "deadline": session.deadline,
                });
                ctx.emit(oracle_address, EVENT_NEW_MONITORING, payload);
                self.obligations_mut(&address).sessions.push(session_id);
                Ok(json!(session_id))
            }
            other => Err(Revert(format!("unhandled function {other}"))),
        }
    }

    fn execute_oracle(&mut self, ctx: &mut ExecContext, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert> {
        match function {
            // Only reachable as an internal call from DTobligations.monitorCompliance.
            "initializeMonitoring" => Err(Revert::new("onlyObligations")),
            "_callback" => {
                let session_id = arg_u64(args, 0, "sessionId")?;
                let evidence = arg_str(args, 1, "evidence")?.to_owned();
                let block = ctx.block_index();
                let state = self.oracle_mut(&address)?.callback(ctx.sender(), session_id, evidence, block)?;
                Ok(to_value(&state))
            }
            other => Err(Revert(format!("unhandled function {other}"))),
        }
    }

    fn find_session(&self, obligations: &DtObligations, session_id: u64) -> Result<&MonitoringSession, Revert> {
        if !obligations.sessions.contains(&session_id) {
            return Err(Revert::new("UnknownSession"));
        }
        self.indexing(&obligations.dt_indexing)
            .and_then(|i| self.oracle(&i.oracle))
            .and_then(|o| o.session(session_id))
            .ok_or_else(|| Revert::new("UnknownSession"))
    }
}

impl ContractHost for Governance {
    fn abi() -> &'static [FunctionSpec] {
        ABI
    }

    fn checkpoint(&mut self) -> Checkpoint<Self> {
        self.undo = Some(Vec::new());
        Checkpoint::Journal
    }

    fn commit(&mut self) {
        self.undo = None;
    }

    fn rollback(&mut self) {
        for (address, prior) in self.undo.take().unwrap_or_default().into_iter().rev() {
            match prior {
                Some(c) => self.contracts.insert(address, c),
                None => self.contracts.remove(&address),
            };
        }
    }

    fn kind_of(&self, address: &Address) -> Option<&'static str> {
        self.contracts.get(address).map(Contract::kind)
    }

    fn deploy(&mut self, ctx: &mut ExecContext, kind: &str, args: &[Value]) -> Result<Address, Revert> {
        match kind {
            DT_INDEXING => {
                let deadline = opt_u64(args, 0, "sessionDeadline")?.unwrap_or(DEFAULT_SESSION_DEADLINE);
                let address = ctx.allocate_address();
                let oracle = self.deploy_oracle(ctx, deadline);
                self.insert(address, Contract::Indexing(DtIndexing::new(oracle)));
                Ok(address)
            }
            DT_OBLIGATIONS => {
                let dt_indexing: Address = arg_as(args, 0, "dtInd")?;
                let owner: PublicKey = arg_as(args, 1, "podAddress")?;
                let pod_id = arg_u64(args, 2, "podId")?;
                if self.indexing(&dt_indexing).is_none() {
                    return Err(Revert::new("dtInd is not a DTindexing contract"));
                }
                Ok(self.deploy_obligations(ctx, owner, dt_indexing, pod_id))
            }
            PULL_IN_ORACLE => {
                let deadline = opt_u64(args, 0, "sessionDeadline")?.unwrap_or(DEFAULT_SESSION_DEADLINE);
                Ok(self.deploy_oracle(ctx, deadline))
            }
            other => Err(Revert(format!("unknown kind {other}"))),
        }
    }

    fn execute(&mut self, ctx: &mut ExecContext, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert> {
        match self.kind_of(&address) {
            Some(DT_INDEXING) => self.execute_indexing(ctx, address, function, args),
            Some(DT_OBLIGATIONS) => self.execute_obligations(ctx, address, function, args),
            Some(PULL_IN_ORACLE) => self.execute_oracle(ctx, address, function, args),
            _ => Err(Revert::new("no contract")),
        }
    }

    fn query(&self, block_height: u64, address: Address, function: &str, args: &[Value]) -> Result<Value, Revert> {
        match self.contracts.get(&address) {
            Some(Contract::Indexing(idx)) => match function {
                "getMedicalPods" | "getSocialPods" | "getFinancialPods" => {
                    let pod_type = PodType::ALL.into_iter().find(|t| t.search_function() == function).expect("matched");
                    Ok(to_value(&idx.search_by_type(pod_type)))
                }
                "getPodResources" => Ok(to_value(&idx.pod_resources(arg_u64(args, 0, "podId")?)?)),
                "getResource" => {
                    let id = arg_u64(args, 0, "idResource")?;
                    idx.resource(id).map(to_value).ok_or_else(|| Revert::new("UnknownId"))
                }
                "getPod" => {
                    let id = arg_u64(args, 0, "podId")?;
                    idx.pod(id).map(to_value).ok_or_else(|| Revert::new("UnknownId"))
                }
                "getOracle" => Ok(to_value(&idx.oracle)),
                other => Err(Revert(format!("unhandled function {other}"))),
            },
            Some(Contract::Obligations(ob)) => match function {
                "getObligationRules" => {
                    let id = arg_u64(args, 0, "idResource")?;
                    if !self.covered_resources(ob).contains(&id) {
                        return Err(Revert::new("isTheResourceCovered"));
                    }
                    Ok(to_value(&ObligationRules::from(ob.obligation_rules(id))))
                }
                "getDefaultObligationRules" => Ok(to_value(&ObligationRules::from(ob.default_rules()))),
                "withSpecificRules" => Ok(json!(ob.with_specific_rules(arg_u64(args, 0, "idResource")?))),
                "getMonitoringEvidence" => {
                    let session = self.find_session(ob, arg_u64(args, 0, "sessionId")?)?;
                    let mut view = session.clone();
                    view.state = session.state_at(block_height);
                    if view.state == SessionState::Open {
                        return Err(Revert::new("SessionNotFinished"));
                    }
                    Ok(to_value(&view))
                }
                "getOwner" => Ok(to_value(&ob.owner)),
                other => Err(Revert(format!("unhandled function {other}"))),
            },
            Some(Contract::Oracle(oracle)) => match function {
                "getSession" => {
                    let session = oracle.session(arg_u64(args, 0, "sessionId")?).ok_or_else(|| Revert::new("UnknownSession"))?;
                    let mut view = session.clone();
                    view.state = session.state_at(block_height);
                    Ok(to_value(&view))
                }
                other => Err(Revert(format!("unhandled function {other}"))),
            },
            None => Err(Revert::new("no contract")),
        }
    }
}
