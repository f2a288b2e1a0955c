//! Personal online datastore: resource files, metafiles, the request
//! pipeline and scheduled monitoring.
//!
//! A request runs through five stages in order and stops at the first that
//! fails: parameter extraction, attestation check, sender authentication,
//! rights evaluation, response. Every stage that runs appends one
//! [`AuditRecord`], so the point where a request stopped is observable.

mod metafiles;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

pub use metafiles::{DtConfig, DtObligationsFile, ResourceEntry, CONFIG_FILE, OBLIGATIONS_FILE, RESOURCE_DIR};

use crate::contracts::{calls, MonitoringSession, PodType, RuleScope, SessionState};
use crate::enclave::QuoteVerifier;
use crate::identity::{NodeIdentity, PublicKey};
use crate::ledger::{Address, Chain, LedgerError};
use crate::oracle_bridge::{OracleCursor, PushInOracle};
use crate::policy::{PolicyError, RuleType, UsagePolicy, UsageRule};
use crate::request::DataRequest;
use metafiles::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatastoreError {
    #[error("datastore already initialized at {0}")]
    StorageExists(PathBuf),
    #[error("path {0:?} is already used by another resource")]
    DuplicatePath(String),
    #[error("invalid resource path {0:?}")]
    InvalidPath(String),
    #[error(transparent)]
    InvalidPolicy(#[from] PolicyError),
    #[error("resource {0} is not owned by this datastore")]
    NotOwnedHere(u64),
    #[error("monitoring period must be at least one block")]
    InvalidPeriod,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("io: {0}")]
    Io(String),
    #[error("metafile: {0}")]
    Metafile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

/// What arrives over the loopback transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub body: String,
}

impl HttpRequest {
    pub fn post(request: &DataRequest) -> Self {
        Self { method: Method::Post, body: request.to_wire() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenialReason {
    Malformed,
    NotFound,
    UntrustedOrigin,
    AuthFailed,
    NoRights,
}

impl DenialReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenialReason::Malformed => "malformed",
            DenialReason::NotFound => "not_found",
            DenialReason::UntrustedOrigin => "untrusted_origin",
            DenialReason::AuthFailed => "auth_failed",
            DenialReason::NoRights => "no_rights",
        }
    }
}

impl fmt::Display for DenialReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataResponse {
    pub status: Result<(), DenialReason>,
    pub resource_id: Option<u64>,
    pub payload: Option<Vec<u8>>,
    pub policy: Option<UsagePolicy>,
}

impl DataResponse {
    fn denied(reason: DenialReason) -> Self {
        Self { status: Err(reason), resource_id: None, payload: None, policy: None }
    }

    pub fn is_granted(&self) -> bool {
        self.status.is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Extract,
    Attestation,
    Authentication,
    Rights,
    Response,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Attestation => "attestation",
            Stage::Authentication => "authentication",
            Stage::Rights => "rights",
            Stage::Response => "response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    /// Index of the request this record belongs to, counting from 1.
    pub request: u64,
    pub stage: Stage,
    pub passed: bool,
    pub detail: String,
}

/// Decides whether a consumer may obtain a resource, e.g. through a market subscription.
pub trait RightsEvaluator: Send + Sync {
    fn has_rights(&self, consumer: &PublicKey, resource_id: u64) -> bool;
}

/// Grants every authenticated consumer.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysSubscribed;

impl RightsEvaluator for AlwaysSubscribed {
    fn has_rights(&self, _consumer: &PublicKey, _resource_id: u64) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleHandle(usize);

#[derive(Debug, Clone, PartialEq, Eq)]
struct MonitoringSchedule {
    resource_id: u64,
    period: u64,
    next_due: u64,
}

pub struct Datastore {
    dir: PathBuf,
    push: PushInOracle,
    config: DtConfig,
    obligations: DtObligationsFile,
    verifier: QuoteVerifier,
    rights: Box<dyn RightsEvaluator>,
    audit: Vec<AuditRecord>,
    requests_seen: u64,
    schedules: Vec<MonitoringSchedule>,
    pending: Vec<u64>,
    evidence: BTreeMap<u64, MonitoringSession>,
}

impl fmt::Debug for Datastore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Datastore").field("dir", &self.dir).field("config", &self.config).finish_non_exhaustive()
    }
}

fn validate_path(path: &str) -> Result<(), DatastoreError> {
    let segments: Vec<&str> = path.strip_prefix('/').unwrap_or("").split('/').collect();
    let ok = path.starts_with('/') && segments.iter().all(|s| !s.is_empty() && *s != "." && *s != "..");
    if ok {
        Ok(())
    } else {
        Err(DatastoreError::InvalidPath(path.to_owned()))
    }
}

impl Datastore {
    /// Registers a new pod on chain, then writes the metafiles into `dir`.
    /// Nothing is written when the ledger step fails.
    pub fn init<C: Chain + ?Sized>(
        dir: impl Into<PathBuf>,
        identity: NodeIdentity,
        base_url: &str,
        pod_type: PodType,
        chain: &mut C,
        dt_indexing: Address,
        verifier: QuoteVerifier,
    ) -> Result<Self, DatastoreError> {
        let dir = dir.into();
        if dir.join(CONFIG_FILE).exists() {
            return Err(DatastoreError::StorageExists(dir));
        }
        let private_key =
            identity.private_hex().ok_or_else(|| DatastoreError::Ledger(LedgerError::Signing("identity has no private key".into())))?;
        let push = PushInOracle::new(identity);
        let (pod_id, obligations_address) = calls::register_pod(chain, &push, dt_indexing, base_url, pod_type)?;
        let config = DtConfig {
            datastore_id: pod_id,
            public_key: push.identity().public_key(),
            private_key,
            base_url: base_url.to_owned(),
            pod_type,
            dt_indexing,
            obligations_address,
            resources: Vec::new(),
            retrievers: BTreeMap::new(),
            oracle_cursor: 0,
        };
        fs::create_dir_all(dir.join(RESOURCE_DIR)).map_err(|e| DatastoreError::Io(format!("{}: {e}", dir.display())))?;
        let store = Self::assemble(dir, push, config, DtObligationsFile::default(), verifier);
        store.save_obligations()?;
        store.save_config()?;
        Ok(store)
    }

    /// Loads an initialized datastore from its metafiles.
    pub fn open(dir: impl Into<PathBuf>, verifier: QuoteVerifier) -> Result<Self, DatastoreError> {
        let dir = dir.into();
        let config: DtConfig = read_json(&dir.join(CONFIG_FILE))?;
        let obligations: DtObligationsFile = read_json(&dir.join(OBLIGATIONS_FILE))?;
        let identity =
            NodeIdentity::from_private_hex(&config.private_key).map_err(|e| DatastoreError::Metafile(format!("privateKey: {e}")))?;
        if identity.public_key() != config.public_key {
            return Err(DatastoreError::Metafile("privateKey does not match publicKey".into()));
        }
        Ok(Self::assemble(dir, PushInOracle::new(identity), config, obligations, verifier))
    }

    fn assemble(dir: PathBuf, push: PushInOracle, config: DtConfig, obligations: DtObligationsFile, verifier: QuoteVerifier) -> Self {
        Self {
            dir,
            push,
            config,
            obligations,
            verifier,
            rights: Box::new(AlwaysSubscribed),
            audit: Vec::new(),
            requests_seen: 0,
            schedules: Vec::new(),
            pending: Vec::new(),
            evidence: BTreeMap::new(),
        }
    }

    pub fn set_rights_evaluator(&mut self, rights: Box<dyn RightsEvaluator>) {
        self.rights = rights;
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &DtConfig {
        &self.config
    }

    pub fn obligations(&self) -> &DtObligationsFile {
        &self.obligations
    }

    pub fn identity(&self) -> &NodeIdentity {
        self.push.identity()
    }

    pub fn push_oracle(&self) -> &PushInOracle {
        &self.push
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    fn save_config(&self) -> Result<(), DatastoreError> {
        write_json(&self.dir.join(CONFIG_FILE), &self.config)
    }

    fn save_obligations(&self) -> Result<(), DatastoreError> {
        write_json(&self.dir.join(OBLIGATIONS_FILE), &self.obligations)
    }

    fn resource_file(&self, path: &str) -> PathBuf {
        self.dir.join(RESOURCE_DIR).join(path.trim_start_matches('/'))
    }

    pub fn oracle_cursor(&self) -> OracleCursor {
        OracleCursor { last_seen_sequence: self.config.oracle_cursor }
    }

    pub fn save_oracle_cursor(&mut self, cursor: OracleCursor) -> Result<(), DatastoreError> {
        if cursor.last_seen_sequence != self.config.oracle_cursor {
            self.config.oracle_cursor = self.config.oracle_cursor.max(cursor.last_seen_sequence);
            self.save_config()?;
        }
        Ok(())
    }

    /// Stores `bytes` under `relative_path`, registers the resource and pushes
    /// each rule of `policy` as a resource-specific obligation.
    pub fn upload_resource<C: Chain + ?Sized>(
        &mut self,
        chain: &mut C,
        relative_path: &str,
        bytes: &[u8],
        policy: UsagePolicy,
    ) -> Result<u64, DatastoreError> {
        validate_path(relative_path)?;
        if self.config.resource_by_path(relative_path).is_some() {
            return Err(DatastoreError::DuplicatePath(relative_path.to_owned()));
        }
        let url = self.config.url_for(relative_path);
        let registered_at = chain.block_height();
        let resource_id = calls::register_resource(chain, &self.push, self.config.dt_indexing, self.config.datastore_id, &url)?;
        for rule in policy.rules() {
            self.push_rule(chain, RuleScope::Resource(resource_id), rule)?;
        }

        let file = self.resource_file(relative_path);
        if let Some(parent) = file.parent() {
            fs::create_dir_all(parent).map_err(|e| DatastoreError::Io(format!("{}: {e}", parent.display())))?;
        }
        crate::fsutil::write_atomic(&file, bytes).map_err(|e| DatastoreError::Io(format!("{}: {e}", file.display())))?;
        if !policy.is_empty() {
            self.obligations.resources.insert(resource_id, policy);
            self.save_obligations()?;
        }
        self.config.resources.push(ResourceEntry { path: relative_path.to_owned(), resource_id, registered_at });
        self.save_config()?;
        Ok(resource_id)
    }

    fn push_rule<C: Chain + ?Sized>(&self, chain: &mut C, scope: RuleScope, rule: UsageRule) -> Result<(), DatastoreError> {
        let receipt = calls::add_rule(chain, &self.push, self.config.obligations_address, scope, rule)?;
        match receipt.revert_reason() {
            Some(r) => Err(LedgerError::Reverted(r.to_owned()).into()),
            None => Ok(()),
        }
    }

    fn check_scope(&self, scope: RuleScope) -> Result<(), DatastoreError> {
        match scope {
            RuleScope::Resource(id) if self.config.resource_by_id(id).is_none() => Err(DatastoreError::NotOwnedHere(id)),
            _ => Ok(()),
        }
    }

    /// Adds or replaces one rule on chain and in `DTobligations.json`.
    pub fn set_rule<C: Chain + ?Sized>(&mut self, chain: &mut C, scope: RuleScope, rule: UsageRule) -> Result<(), DatastoreError> {
        self.check_scope(scope)?;
        self.push_rule(chain, scope, rule)?;
        let target = match scope {
            RuleScope::Default => &mut self.obligations.default,
            RuleScope::Resource(id) => self.obligations.resources.entry(id).or_default(),
        };
        target.set(rule)?;
        self.save_obligations()
    }

    pub fn remove_rule<C: Chain + ?Sized>(&mut self, chain: &mut C, scope: RuleScope, rule_type: RuleType) -> Result<(), DatastoreError> {
        self.check_scope(scope)?;
        let receipt = calls::remove_rule(chain, &self.push, self.config.obligations_address, scope, rule_type)?;
        if let Some(r) = receipt.revert_reason() {
            return Err(LedgerError::Reverted(r.to_owned()).into());
        }
        match scope {
            RuleScope::Default => {
                self.obligations.default.clear(rule_type);
            }
            RuleScope::Resource(id) => {
                if let Some(p) = self.obligations.resources.get_mut(&id) {
                    p.clear(rule_type);
                    if p.is_empty() {
                        self.obligations.resources.remove(&id);
                    }
                }
            }
        }
        self.save_obligations()
    }

    fn record(&mut self, stage: Stage, passed: bool, detail: impl Into<String>) {
        self.audit.push(AuditRecord { request: self.requests_seen, stage, passed, detail: detail.into() });
    }

    /// Serves one request. Anything but a POST is ignored and yields `None`.
    pub fn handle_data_request(&mut self, request: &HttpRequest) -> Option<DataResponse> {
        if request.method != Method::Post {
            return None;
        }
        self.requests_seen += 1;
        Some(self.run_pipeline(&request.body))
    }

    fn run_pipeline(&mut self, body: &str) -> DataResponse {
        let request = match DataRequest::from_wire(body) {
            Ok(r) => r,
            Err(e) => {
                self.record(Stage::Extract, false, e.to_string());
                return DataResponse::denied(DenialReason::Malformed);
            }
        };
        let base = self.config.base_url.trim_end_matches('/');
        let entry = request.url.strip_prefix(base).and_then(|path| self.config.resource_by_path(path)).cloned();
        let Some(entry) = entry else {
            self.record(Stage::Extract, false, format!("no resource at {}", request.url));
            return DataResponse::denied(DenialReason::NotFound);
        };
        self.record(Stage::Extract, true, format!("resource={}", entry.resource_id));

        let attested = match &request.attestation {
            None => Err("missing quote".to_owned()),
            Some(q) => self.verifier.verify(q, &request.url).map_err(|e| e.to_string()),
        };
        if let Err(why) = attested {
            self.record(Stage::Attestation, false, why);
            return DataResponse::denied(DenialReason::UntrustedOrigin);
        }
        self.record(Stage::Attestation, true, "");

        match request.auth_token.recover(request.url.as_bytes()) {
            Ok(key) if key == request.claim => self.record(Stage::Authentication, true, key.to_hex()),
            _ => {
                self.record(Stage::Authentication, false, "claim does not match auth_token");
                return DataResponse::denied(DenialReason::AuthFailed);
            }
        }

        if !self.rights.has_rights(&request.claim, entry.resource_id) {
            self.record(Stage::Rights, false, "");
            return DataResponse::denied(DenialReason::NoRights);
        }
        self.record(Stage::Rights, true, "");

        let payload = match fs::read(self.resource_file(&entry.path)) {
            Ok(bytes) => bytes,
            Err(e) => {
                self.record(Stage::Response, false, e.to_string());
                return DataResponse::denied(DenialReason::NotFound);
            }
        };
        let policy = self.obligations.effective(entry.resource_id);
        if self.config.retrievers.entry(entry.resource_id).or_default().insert(request.claim) {
            if let Err(e) = self.save_config() {
                self.record(Stage::Response, false, e.to_string());
                return DataResponse::denied(DenialReason::NotFound);
            }
        }
        self.record(Stage::Response, true, format!("policy={policy}"));
        DataResponse { status: Ok(()), resource_id: Some(entry.resource_id), payload: Some(payload), policy: Some(policy) }
    }

    /// Runs `monitor_now` for `resource_id` every `period` blocks after `start_height`.
    pub fn schedule_monitoring(&mut self, resource_id: u64, period: u64, start_height: u64) -> Result<ScheduleHandle, DatastoreError> {
        if self.config.resource_by_id(resource_id).is_none() {
            return Err(DatastoreError::NotOwnedHere(resource_id));
        }
        if period == 0 {
            return Err(DatastoreError::InvalidPeriod);
        }
        self.schedules.push(MonitoringSchedule { resource_id, period, next_due: start_height + period });
        Ok(ScheduleHandle(self.schedules.len() - 1))
    }

    pub fn cancel_schedule(&mut self, handle: ScheduleHandle) {
        if let Some(s) = self.schedules.get_mut(handle.0) {
            s.next_due = u64::MAX;
        }
    }

    /// Starts every schedule due at `height`; returns the new session ids.
    pub fn poll_schedules<C: Chain + ?Sized>(&mut self, chain: &mut C, height: u64) -> Result<Vec<u64>, DatastoreError> {
        let mut started = Vec::new();
        for i in 0..self.schedules.len() {
            if self.schedules[i].next_due <= height {
                let resource_id = self.schedules[i].resource_id;
                self.schedules[i].next_due += self.schedules[i].period;
                started.push(self.monitor_now(chain, resource_id, None)?);
            }
        }
        Ok(started)
    }

    /// Opens a session expecting every consumer that was ever granted the resource.
    pub fn monitor_now<C: Chain + ?Sized>(
        &mut self,
        chain: &mut C,
        resource_id: u64,
        deadline: Option<u64>,
    ) -> Result<u64, DatastoreError> {
        if self.config.resource_by_id(resource_id).is_none() {
            return Err(DatastoreError::NotOwnedHere(resource_id));
        }
        let responders: Vec<PublicKey> = self.config.retrievers.get(&resource_id).map(|s| s.iter().copied().collect()).unwrap_or_default();
        let session_id =
            calls::monitor_compliance(chain, &self.push, self.config.obligations_address, &[resource_id], &responders, deadline)?;
        self.pending.push(session_id);
        Ok(session_id)
    }

    /// Moves finished sessions from the chain into the local evidence store.
    pub fn collect_evidence<C: Chain + ?Sized>(&mut self, chain: &C) -> Result<Vec<u64>, DatastoreError> {
        let mut finished = Vec::new();
        let mut still_open = Vec::new();
        for id in std::mem::take(&mut self.pending) {
            match calls::monitoring_evidence(chain, self.config.obligations_address, id) {
                Ok(session) if session.state != SessionState::Open => {
                    self.evidence.insert(id, session);
                    finished.push(id);
                }
                Ok(_) | Err(LedgerError::Reverted(_)) => still_open.push(id),
                Err(e) => {
                    still_open.push(id);
                    self.pending = still_open;
                    return Err(e.into());
                }
            }
        }
        self.pending = still_open;
        Ok(finished)
    }

    pub fn evidence(&self, session_id: u64) -> Option<&MonitoringSession> {
        self.evidence.get(&session_id)
    }

    pub fn evidence_sessions(&self) -> impl Iterator<Item = &MonitoringSession> {
        self.evidence.values()
    }

    pub fn pending_sessions(&self) -> &[u64] {
        &self.pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{default_gas_table, governance_ledger, GovernanceLedger};
    use crate::enclave::{AttestationAuthority, Enclave};
    use crate::policy::scenario_policy;

    struct Fixture {
        _dir: tempfile::TempDir,
        ledger: GovernanceLedger,
        bob: Datastore,
        ca: AttestationAuthority,
    }

    fn fixture() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = governance_ledger(default_gas_table()).unwrap();
        let operator = NodeIdentity::from_seed(b"operator");
        let indexing = calls::deploy_indexing(&mut ledger, &operator, None).unwrap();
        let ca = AttestationAuthority::from_seed(b"ca");
        let bob = Datastore::init(
            dir.path().join("bob"),
            NodeIdentity::from_seed(b"bob"),
            "https://BobNode.com/",
            PodType::Social,
            &mut ledger,
            indexing,
            ca.verifier(),
        )
        .unwrap();
        Fixture { _dir: dir, ledger, bob, ca }
    }

    #[test]
    fn init_writes_metafiles_and_refuses_reinit() {
        let mut f = fixture();
        assert!(f.bob.dir().join(CONFIG_FILE).exists());
        assert_eq!(f.bob.config().datastore_id, 1);
        let owner = f.ledger.call(f.bob.config().obligations_address, "getOwner", &[]).unwrap();
        assert_eq!(owner, serde_json::json!(f.bob.identity().public_key()));
        let again = Datastore::init(
            f.bob.dir().to_path_buf(),
            NodeIdentity::from_seed(b"bob"),
            "https://BobNode.com/",
            PodType::Social,
            &mut f.ledger,
            f.bob.config().dt_indexing,
            f.ca.verifier(),
        );
        assert!(matches!(again, Err(DatastoreError::StorageExists(_))));
        let reopened = Datastore::open(f.bob.dir().to_path_buf(), f.ca.verifier()).unwrap();
        assert_eq!(reopened.config(), f.bob.config());
    }

    #[test]
    fn upload_registers_and_pushes_rules() {
        let mut f = fixture();
        let before = f.ledger.receipts().len();
        let id = f.bob.upload_resource(&mut f.ledger, "/images/Mesoplodon.jpg", b"whale", scenario_policy()).unwrap();
        assert_eq!(id, 1);
        assert_eq!(f.ledger.receipts().len() - before, 5);
        let rules = calls::obligation_rules(&f.ledger, f.bob.config().obligations_address, 1).unwrap();
        assert_eq!(UsagePolicy::try_from(rules).unwrap(), scenario_policy());

        let events = f.ledger.events().len();
        let dup = f.bob.upload_resource(&mut f.ledger, "/images/Mesoplodon.jpg", b"x", UsagePolicy::empty());
        assert_eq!(dup, Err(DatastoreError::DuplicatePath("/images/Mesoplodon.jpg".into())));
        assert_eq!(f.ledger.events().len(), events);

        let before = f.ledger.receipts().len();
        f.bob.upload_resource(&mut f.ledger, "/notes.txt", b"n", UsagePolicy::empty()).unwrap();
        assert_eq!(f.ledger.receipts().len() - before, 1);
        assert!(f.bob.upload_resource(&mut f.ledger, "../etc", b"n", UsagePolicy::empty()).is_err());
    }

    #[test]
    fn pipeline_grants_and_records_retriever() {
        let mut f = fixture();
        f.bob.upload_resource(&mut f.ledger, "/images/Mesoplodon.jpg", b"whale", scenario_policy()).unwrap();
        let alice = NodeIdentity::from_seed(b"alice");
        let mut enclave = Enclave::new(3, f.ca.clone());
        let req = enclave.build_data_request(&alice, "https://BobNode.com/images/Mesoplodon.jpg").unwrap();
        let resp = f.bob.handle_data_request(&HttpRequest::post(&req)).unwrap();
        assert!(resp.is_granted());
        assert_eq!(resp.payload.as_deref(), Some(&b"whale"[..]));
        assert_eq!(resp.policy, Some(scenario_policy()));
        assert!(f.bob.config().retrievers[&1].contains(&alice.public_key()));
        assert_eq!(f.bob.handle_data_request(&HttpRequest { method: Method::Get, body: req.to_wire() }), None);
    }

    #[test]
    fn pipeline_denials_stop_at_their_stage() {
        let mut f = fixture();
        f.bob.upload_resource(&mut f.ledger, "/images/Mesoplodon.jpg", b"whale", scenario_policy()).unwrap();
        let alice = NodeIdentity::from_seed(b"alice");
        let url = "https://BobNode.com/images/Mesoplodon.jpg";
        let mut enclave = Enclave::new(3, f.ca.clone());

        let mut req = enclave.build_data_request(&alice, url).unwrap();
        req.claim = NodeIdentity::from_seed(b"eve").public_key();
        let resp = f.bob.handle_data_request(&HttpRequest::post(&req)).unwrap();
        assert_eq!(resp.status, Err(DenialReason::AuthFailed));

        let mut req = enclave.build_data_request(&alice, url).unwrap();
        req.attestation = None;
        let resp = f.bob.handle_data_request(&HttpRequest::post(&req)).unwrap();
        assert_eq!(resp.status, Err(DenialReason::UntrustedOrigin));
        let last = f.bob.audit().last().unwrap();
        assert_eq!((last.stage, last.passed), (Stage::Attestation, false));
        assert!(!f.bob.audit().iter().any(|a| a.request == last.request && a.stage == Stage::Authentication));

        let resp = f.bob.handle_data_request(&HttpRequest { method: Method::Post, body: "url=x".into() }).unwrap();
        assert_eq!(resp.status, Err(DenialReason::Malformed));
        let req = enclave.build_data_request(&alice, "https://BobNode.com/missing").unwrap();
        assert_eq!(f.bob.handle_data_request(&HttpRequest::post(&req)).unwrap().status, Err(DenialReason::NotFound));

        struct Nobody;
        impl RightsEvaluator for Nobody {
            fn has_rights(&self, _: &PublicKey, _: u64) -> bool {
                false
            }
        }
        f.bob.set_rights_evaluator(Box::new(Nobody));
        let req = enclave.build_data_request(&alice, url).unwrap();
        assert_eq!(f.bob.handle_data_request(&HttpRequest::post(&req)).unwrap().status, Err(DenialReason::NoRights));
        assert!(f.bob.config().retrievers.is_empty());
    }

    #[test]
    fn schedule_arithmetic_and_responders() {
        let mut f = fixture();
        let id = f.bob.upload_resource(&mut f.ledger, "/images/Mesoplodon.jpg", b"whale", scenario_policy()).unwrap();
        assert_eq!(f.bob.schedule_monitoring(99, 5, 0), Err(DatastoreError::NotOwnedHere(99)));
        f.bob.schedule_monitoring(id, 5, 0).unwrap();
        let mut sessions = Vec::new();
        for h in 1..=12 {
            sessions.extend(f.bob.poll_schedules(&mut f.ledger, h).unwrap());
        }
        assert_eq!(sessions.len(), 2);
        assert_eq!(f.bob.collect_evidence(&f.ledger).unwrap(), sessions);
        assert!(f.bob.evidence(sessions[0]).unwrap().responses.is_empty());

        let alice = NodeIdentity::from_seed(b"alice");
        let mut enclave = Enclave::new(3, f.ca.clone());
        let req = enclave.build_data_request(&alice, "https://BobNode.com/images/Mesoplodon.jpg").unwrap();
        f.bob.handle_data_request(&HttpRequest::post(&req)).unwrap();
        let s = f.bob.monitor_now(&mut f.ledger, id, None).unwrap();
        let oracle = calls::oracle_address(&f.ledger, f.bob.config().dt_indexing).unwrap();
        assert_eq!(calls::session(&f.ledger, oracle, s).unwrap().expected_responders, vec![alice.public_key()]);
        assert!(f.bob.collect_evidence(&f.ledger).unwrap().is_empty());
        assert_eq!(f.bob.pending_sessions(), &[s]);
    }

    #[test]
    fn rules_mirror_chain_and_file() {
        let mut f = fixture();
        let id = f.bob.upload_resource(&mut f.ledger, "/a", b"a", UsagePolicy::empty()).unwrap();
        f.bob.set_rule(&mut f.ledger, RuleScope::Default, UsageRule::AccessCounter { max_accesses: 3 }).unwrap();
        f.bob.set_rule(&mut f.ledger, RuleScope::Resource(id), UsageRule::Temporal { max_retention: 60 }).unwrap();
        let on_chain = calls::obligation_rules(&f.ledger, f.bob.config().obligations_address, id).unwrap();
        assert_eq!(UsagePolicy::try_from(on_chain).unwrap(), f.bob.obligations().effective(id));
        f.bob.remove_rule(&mut f.ledger, RuleScope::Resource(id), RuleType::Temporal).unwrap();
        assert_eq!(f.bob.obligations().effective(id).access_counter(), Some(3));
        let stored: DtObligationsFile = read_json(&f.bob.dir().join(OBLIGATIONS_FILE)).unwrap();
        assert_eq!(&stored, f.bob.obligations());
        assert!(matches!(
            f.bob.remove_rule(&mut f.ledger, RuleScope::Default, RuleType::Domain),
            Err(DatastoreError::Ledger(LedgerError::Reverted(r))) if r == "NoSuchRule"
        ));
        assert_eq!(
            f.bob.set_rule(&mut f.ledger, RuleScope::Resource(42), UsageRule::AccessCounter { max_accesses: 1 }),
            Err(DatastoreError::NotOwnedHere(42))
        );
    }
}
