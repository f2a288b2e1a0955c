//! Off-chain oracle components of a node.
//!
//! [`PushInOracle`] submits signed transactions on the node's behalf and
//! keeps its own nonce counter. [`PullInListener`] scans the ledger's event
//! log from a persisted cursor, answers `NewMonitoring` events for resources
//! the local enclave has a usage log for, and calls back the oracle contract.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::contracts::{calls, EVENT_NEW_MONITORING};
use crate::enclave::{Enclave, EnclaveError};
use crate::identity::{NodeIdentity, PublicKey};
use crate::ledger::{Address, Chain, Event, LedgerError, Receipt, Submitter, Target, Transaction, Value};
use crate::usage_log::{encode_logs, UsageLog};

#[derive(Debug)]
pub struct PushInOracle {
    identity: NodeIdentity,
    next_nonce: Mutex<Option<u64>>,
}

impl Clone for PushInOracle {
    fn clone(&self) -> Self {
        Self { identity: self.identity.clone(), next_nonce: Mutex::new(*self.nonce_slot()) }
    }
}

impl PushInOracle {
    pub fn new(identity: NodeIdentity) -> Self {
        Self { identity, next_nonce: Mutex::new(None) }
    }

    pub fn identity(&self) -> &NodeIdentity {
        &self.identity
    }

    fn nonce_slot(&self) -> std::sync::MutexGuard<'_, Option<u64>> {
        self.next_nonce.lock().expect("nonce lock poisoned")
    }

    /// Nonce the next submission will use, if one has been learned.
    pub fn cached_nonce(&self) -> Option<u64> {
        *self.nonce_slot()
    }

    /// Signs with the locally tracked nonce. A `BadNonce` rejection means
    /// another client used the key; the nonce is refreshed from the chain and
    /// the transaction is retried once.
    pub fn push_in_submit<C: Chain + ?Sized>(
        &self,
        chain: &mut C,
        target: Target,
        function: &str,
        args: Vec<Value>,
    ) -> Result<Receipt, LedgerError> {
        let mut slot = self.nonce_slot();
        let account = self.identity.public_key();
        let nonce = slot.unwrap_or_else(|| chain.next_nonce(&account));
        let sign = |nonce| {
            Transaction::signed(&self.identity, target.clone(), function, args.clone(), nonce)
                .map_err(|e| LedgerError::Signing(e.to_string()))
        };
        let (receipt, used) = match chain.submit(sign(nonce)?) {
            Err(LedgerError::BadNonce { .. }) => {
                let fresh = chain.next_nonce(&account);
                (chain.submit(sign(fresh)?)?, fresh)
            }
            other => (other?, nonce),
        };
        *slot = Some(used + 1);
        Ok(receipt)
    }
}

impl Submitter for PushInOracle {
    fn account(&self) -> PublicKey {
        self.identity.public_key()
    }

    fn submit_as<C: Chain + ?Sized>(
        &self,
        chain: &mut C,
        target: Target,
        function: &str,
        args: Vec<Value>,
    ) -> Result<Receipt, LedgerError> {
        self.push_in_submit(chain, target, function, args)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OracleCursor {
    pub last_seen_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BridgeError {
    #[error("enclave unavailable")]
    EnclaveUnavailable,
    #[error(transparent)]
    Enclave(#[from] EnclaveError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("event {sequence} has a malformed payload: {message}")]
    BadEvent { sequence: u64, message: String },
}

/// Where the listener obtains usage logs.
pub trait UsageLogSource {
    /// Whether this node ever held `resource_id`.
    fn holds_log(&self, resource_id: u64) -> bool;

    /// Records the monitoring request in the log, then returns a copy.
    fn export_usage_log(&mut self, resource_id: u64, session_id: u64) -> Result<UsageLog, BridgeError>;
}

impl UsageLogSource for Enclave {
    fn holds_log(&self, resource_id: u64) -> bool {
        self.audit_log(resource_id).is_some()
    }

    fn export_usage_log(&mut self, resource_id: u64, session_id: u64) -> Result<UsageLog, BridgeError> {
        Ok(self.get_usage_log(resource_id, session_id)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub session_id: u64,
    pub event_sequence: u64,
    pub receipt: Receipt,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PollReport {
    pub scanned: usize,
    pub dispatched: Vec<Dispatch>,
    /// Set when processing stopped early; the cursor stays before the failing event.
    pub stalled: Option<BridgeError>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NewMonitoring {
    session_id: u64,
    resource_ids: Vec<u64>,
    expected_responders: Vec<PublicKey>,
}

#[derive(Debug, Clone)]
pub struct PullInListener {
    push: PushInOracle,
    cursor: OracleCursor,
    /// When set, only events emitted by this oracle contract are considered.
    oracle: Option<Address>,
}

impl PullInListener {
    pub fn new(push: PushInOracle, cursor: OracleCursor, oracle: Option<Address>) -> Self {
        Self { push, cursor, oracle }
    }

    pub fn cursor(&self) -> OracleCursor {
        self.cursor
    }

    pub fn push_oracle(&self) -> &PushInOracle {
        &self.push
    }

    fn handle<C: Chain + ?Sized, L: UsageLogSource + ?Sized>(
        &self,
        chain: &mut C,
        logs: &mut L,
        event: &Event,
    ) -> Result<Option<Dispatch>, BridgeError> {
        if event.name != EVENT_NEW_MONITORING || self.oracle.is_some_and(|o| o != event.contract) {
            return Ok(None);
        }
        let request: NewMonitoring = serde_json::from_value(event.payload.clone())
            .map_err(|e| BridgeError::BadEvent { sequence: event.sequence, message: e.to_string() })?;
        let me = self.push.account();
        let held: Vec<u64> = request.resource_ids.iter().copied().filter(|r| logs.holds_log(*r)).collect();
        if held.is_empty() || !request.expected_responders.contains(&me) {
            return Ok(None);
        }
        let mut exported = Vec::with_capacity(held.len());
        for resource_id in held {
            exported.push(logs.export_usage_log(resource_id, request.session_id)?);
        }
        let evidence = String::from_utf8(encode_logs(&exported)).expect("log export is utf-8");
        let receipt = calls::callback(chain, &self.push, event.contract, request.session_id, &evidence)?;
        Ok(Some(Dispatch { session_id: request.session_id, event_sequence: event.sequence, receipt }))
    }

    /// Handles every event after the cursor, in order.
    pub fn poll_and_dispatch<C: Chain + ?Sized, L: UsageLogSource + ?Sized>(&mut self, chain: &mut C, logs: &mut L) -> PollReport {
        let mut report = PollReport::default();
        for event in chain.events_since(self.cursor.last_seen_sequence) {
            match self.handle(chain, logs, &event) {
                Ok(dispatch) => {
                    report.dispatched.extend(dispatch);
                    report.scanned += 1;
                    self.cursor.last_seen_sequence = event.sequence;
                }
                Err(e) => {
                    report.stalled = Some(e);
                    break;
                }
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{default_gas_table, governance_ledger, PodType, SessionState};
    use crate::enclave::{AttestationAuthority, SimClock};
    use crate::policy::scenario_policy;
    use std::sync::Arc;

    #[test]
    fn stale_nonce_is_retried_once() {
        let mut ledger = governance_ledger(default_gas_table()).unwrap();
        let bob = NodeIdentity::from_seed(b"bob");
        let push = PushInOracle::new(bob.clone());
        let indexing = calls::deploy_indexing(&mut ledger, &push, None).unwrap();
        assert_eq!(push.cached_nonce(), Some(1));
        // Another client spends nonce 1 behind the oracle's back.
        calls::register_pod(&mut ledger, &bob, indexing, "https://BobNode.com/", PodType::Social).unwrap();
        let r = calls::register_resource(&mut ledger, &push, indexing, 1, "https://BobNode.com/images/Mesoplodon.jpg");
        assert_eq!(r, Ok(1));
        assert_eq!(push.cached_nonce(), Some(3));
        let ghost = Address::derive(999);
        assert_eq!(calls::invoke(&mut ledger, &push, ghost, "registerPod", vec![]), Err(LedgerError::UnknownAddress(ghost)));
    }

    /// Log source whose enclave can be switched off.
    struct Flaky {
        enclave: Enclave,
        up: bool,
    }

    impl UsageLogSource for Flaky {
        fn holds_log(&self, r: u64) -> bool {
            self.enclave.holds_log(r)
        }

        fn export_usage_log(&mut self, r: u64, s: u64) -> Result<UsageLog, BridgeError> {
            if !self.up {
                return Err(BridgeError::EnclaveUnavailable);
            }
            self.enclave.export_usage_log(r, s)
        }
    }

    #[test]
    fn listener_answers_once_and_waits_for_the_enclave() {
        let mut ledger = governance_ledger(default_gas_table()).unwrap();
        let bob = NodeIdentity::from_seed(b"bob");
        let alice = NodeIdentity::from_seed(b"alice");
        let indexing = calls::deploy_indexing(&mut ledger, &bob, None).unwrap();
        let (pod, obligations) = calls::register_pod(&mut ledger, &bob, indexing, "https://b/", PodType::Social).unwrap();
        let res = calls::register_resource(&mut ledger, &bob, indexing, pod, "https://b/x").unwrap();
        let other = calls::register_resource(&mut ledger, &bob, indexing, pod, "https://b/y").unwrap();

        let mut enclave = Enclave::new(1, AttestationAuthority::from_seed(b"ca"));
        enclave.set_time_provider(Some(Arc::new(SimClock::default())));
        enclave.store_resource(res, b"img".to_vec(), scenario_policy()).unwrap();
        let mut source = Flaky { enclave, up: false };

        let mut listener = PullInListener::new(PushInOracle::new(alice.clone()), OracleCursor::default(), None);
        let s_other = calls::monitor_compliance(&mut ledger, &bob, obligations, &[other], &[alice.public_key()], None).unwrap();
        let s1 = calls::monitor_compliance(&mut ledger, &bob, obligations, &[res], &[alice.public_key()], None).unwrap();
        let s2 = calls::monitor_compliance(&mut ledger, &bob, obligations, &[res], &[alice.public_key()], None).unwrap();

        let report = listener.poll_and_dispatch(&mut ledger, &mut source);
        assert_eq!(report.stalled, Some(BridgeError::EnclaveUnavailable));
        assert!(report.dispatched.is_empty());
        let stuck_at = listener.cursor();
        assert!(stuck_at.last_seen_sequence > 0);

        source.up = true;
        let report = listener.poll_and_dispatch(&mut ledger, &mut source);
        assert_eq!(report.stalled, None);
        let sessions: Vec<u64> = report.dispatched.iter().map(|d| d.session_id).collect();
        assert_eq!(sessions, vec![s1, s2]);
        assert!(report.dispatched.iter().all(|d| d.receipt.is_ok()));
        assert_eq!(listener.cursor().last_seen_sequence, ledger.last_sequence());

        assert!(listener.poll_and_dispatch(&mut ledger, &mut source).dispatched.is_empty());
        let oracle = calls::oracle_address(&ledger, indexing).unwrap();
        let session = calls::session(&ledger, oracle, s1).unwrap();
        assert_eq!(session.state, SessionState::Complete);
        let evidence = &session.responses[&alice.public_key()];
        assert!(evidence.contains("\"monitoring_request\""));
        assert!(evidence.contains(&format!("session={s1}")));
        assert_eq!(calls::session(&ledger, oracle, s_other).unwrap().state, SessionState::Open);
    }
}
