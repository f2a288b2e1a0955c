//! Simulated trusted execution environment of a consumer node.
//!
//! Only the ecall methods on [`Enclave`] touch plaintext. Payloads leave the
//! enclave solely as the return value of [`Enclave::access_protected_resource`].
//! Sealed records live in a host-visible [`SealedStore`]; every ecall reads
//! them back through authenticated decryption, so host tampering surfaces as
//! [`EnclaveError::Integrity`] on the next operation touching the record.
//!
//! Access checks run in a fixed order: geographical, domain, access counter.
//! Each attempt appends one usage-log record whose `detail` names the checks
//! that were evaluated (`checked=geographical>domain`) and the inputs they saw.

mod attestation;
mod enforcement;
mod ocall;
mod sealing;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub use attestation::{
    request_hash, trusted_app_measurement, AttestationAuthority, AttestationError, AttestationQuote, QuoteVerifier, QUOTE_LEN, SALT_LEN,
};
pub use enforcement::{enforce_access_counter, enforce_domain, enforce_geographical, retention_expired, CounterDecision, Decision};
pub use ocall::{GeoLocationProvider, SimClock, SimLocation, TrustedTimeProvider};
pub use sealing::{Remaining, SealError, SealedObject, SealedStore, IMAGE_MAGIC, IMAGE_VERSION};

use crate::identity::{Digest, IdentityError, NodeIdentity};
use crate::policy::{DomainCode, RuleType, UsagePolicy};
use crate::request::DataRequest;
use crate::usage_log::{LogAction, LogError, UsageLog};
use sealing::{ObjectState, SealingKey};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppDescriptor {
    pub app_id: String,
    pub domain: DomainCode,
}

/// Applications installed on the node, each with exactly one domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AppRegistry {
    apps: BTreeMap<String, DomainCode>,
}

impl AppRegistry {
    /// Registers `app_id`; re-registering with a different domain is refused.
    pub fn register(&mut self, app_id: impl Into<String>, domain: DomainCode) -> Result<(), EnclaveError> {
        let app_id = app_id.into();
        match self.apps.get(&app_id) {
            Some(d) if *d != domain => Err(EnclaveError::AppConflict(app_id)),
            _ => {
                self.apps.insert(app_id, domain);
                Ok(())
            }
        }
    }

    pub fn identify(&self, app_id: &str) -> Result<AppDescriptor, EnclaveError> {
        self.apps
            .get(app_id)
            .map(|d| AppDescriptor { app_id: app_id.to_owned(), domain: *d })
            .ok_or_else(|| EnclaveError::UnknownApp(app_id.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnclaveError {
    #[error("application {0:?} is not registered")]
    UnknownApp(String),
    #[error("application {0:?} is already registered with another domain")]
    AppConflict(String),
    #[error("resource {0} is not held by this enclave")]
    UnknownResource(u64),
    #[error("resource {0} is already stored")]
    AlreadyStored(u64),
    #[error("sealed record for resource {0} failed its integrity check")]
    Integrity(u64),
    #[error("ocall provider {0} unavailable")]
    ProviderUnavailable(&'static str),
    #[error("request url is empty")]
    EmptyUrl,
    #[error("signing failed: {0}")]
    Signing(#[from] IdentityError),
    #[error("sealed storage: {0}")]
    Storage(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

impl From<SealError> for EnclaveError {
    fn from(e: SealError) -> Self {
        match e {
            SealError::Integrity(id) => EnclaveError::Integrity(id),
            other => EnclaveError::Storage(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessOutcome {
    Granted {
        payload: Vec<u8>,
        /// Opens left after this one; `Limited(0)` means the object was deleted.
        remaining: Remaining,
    },
    Denied(RuleType),
}

impl AccessOutcome {
    pub fn is_granted(&self) -> bool {
        matches!(self, AccessOutcome::Granted { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepReport {
    /// Resources carrying a temporal rule, in id order.
    pub checked: Vec<u64>,
    pub deleted: Vec<u64>,
    /// Records that failed authentication and were left untouched.
    pub corrupted: Vec<u64>,
}

/// Non-secret metadata of a stored object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectInfo {
    pub resource_id: u64,
    pub policy: UsagePolicy,
    pub retrieved_at: u64,
    pub remaining: Remaining,
}

pub struct Enclave {
    measurement: Digest,
    rng: ChaCha20Rng,
    key: SealingKey,
    store: SealedStore,
    logs: BTreeMap<u64, UsageLog>,
    apps: AppRegistry,
    authority: AttestationAuthority,
    geo: Option<Arc<dyn GeoLocationProvider>>,
    time: Option<Arc<dyn TrustedTimeProvider>>,
    storage_path: Option<PathBuf>,
}

impl std::fmt::Debug for Enclave {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Enclave")
            .field("measurement", &hex::encode(self.measurement))
            .field("objects", &self.store.ids())
            .field("logs", &self.logs.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Enclave {
    /// An enclave running the trusted application. `seed` drives its key,
    /// nonce and salt generation so simulations replay identically.
    pub fn new(seed: u64, authority: AttestationAuthority) -> Self {
        Self::with_measurement(seed, authority, trusted_app_measurement())
    }

    pub fn with_measurement(seed: u64, authority: AttestationAuthority, measurement: Digest) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let key = SealingKey::generate(&mut rng);
        Self {
            measurement,
            rng,
            key,
            store: SealedStore::default(),
            logs: BTreeMap::new(),
            apps: AppRegistry::default(),
            authority,
            geo: None,
            time: None,
            storage_path: None,
        }
    }

    pub fn measurement(&self) -> Digest {
        self.measurement
    }

    pub fn set_geo_provider(&mut self, provider: Option<Arc<dyn GeoLocationProvider>>) {
        self.geo = provider;
    }

    pub fn set_time_provider(&mut self, provider: Option<Arc<dyn TrustedTimeProvider>>) {
        self.time = provider;
    }

    pub fn apps(&self) -> &AppRegistry {
        &self.apps
    }

    pub fn apps_mut(&mut self) -> &mut AppRegistry {
        &mut self.apps
    }

    fn now(&self) -> Result<u64, EnclaveError> {
        self.time.as_ref().and_then(|t| t.get_trusted_time()).ok_or(EnclaveError::ProviderUnavailable("get_trusted_time"))
    }

    fn location(&self) -> Option<crate::policy::CountryCode> {
        self.geo.as_ref().and_then(|g| g.get_geo_location())
    }

    fn log_mut(&mut self, resource_id: u64) -> &mut UsageLog {
        self.logs.entry(resource_id).or_insert_with(|| UsageLog::new(resource_id))
    }

    fn unseal(&self, resource_id: u64) -> Result<ObjectState, EnclaveError> {
        let sealed = self.store.get(resource_id).ok_or(EnclaveError::UnknownResource(resource_id))?;
        Ok(self.key.unseal(sealed)?)
    }

    fn seal(&mut self, resource_id: u64, state: &ObjectState) {
        let sealed = self.key.seal(&mut self.rng, resource_id, state);
        self.store.insert(sealed);
    }

    /// Formats a data request: the auth token signs the url with the node key
    /// and a fresh quote binds this enclave's measurement to the request.
    pub fn build_data_request(&mut self, identity: &NodeIdentity, url: &str) -> Result<DataRequest, EnclaveError> {
        if url.is_empty() {
            return Err(EnclaveError::EmptyUrl);
        }
        let auth_token = identity.sign(url.as_bytes())?;
        let mut salt = [0u8; SALT_LEN];
        self.rng.fill_bytes(&mut salt);
        let quote = self.authority.issue(self.measurement, identity.public_key(), request_hash(&salt, url), salt);
        Ok(DataRequest { url: url.to_owned(), auth_token, claim: identity.public_key(), attestation: Some(quote) })
    }

    /// Seals a retrieved resource with its policy and logs the retrieval.
    pub fn store_resource(&mut self, resource_id: u64, payload: Vec<u8>, policy: UsagePolicy) -> Result<(), EnclaveError> {
        if self.store.contains(resource_id) {
            return Err(EnclaveError::AlreadyStored(resource_id));
        }
        let now = self.now()?;
        let remaining = Remaining::from_policy(&policy);
        let state = ObjectState { payload, policy, retrieved_at: now, remaining };
        self.log_mut(resource_id).record(now, LogAction::Retrieved, format!("remaining={remaining}"))?;
        self.seal(resource_id, &state);
        self.persist()
    }

    /// Runs the enforcement chain for `app_id` opening `resource_id`.
    pub fn access_protected_resource(&mut self, app_id: &str, resource_id: u64) -> Result<AccessOutcome, EnclaveError> {
        let app = self.apps.identify(app_id)?;
        let mut state = self.unseal(resource_id)?;
        let now = self.now()?;

        let mut checked = vec![RuleType::Geographical.as_str()];
        let mut detail = vec![format!("app={}", app.app_id)];
        let location = state.policy.geographical().map(|_| self.location());
        if let Some(loc) = location {
            detail.push(format!("loc={}", loc.map_or_else(|| "unavailable".to_owned(), |c| c.to_string())));
        }
        let denial = 'checks: {
            if enforce_geographical(&state.policy, location.flatten()) == Decision::Fail {
                break 'checks Some(RuleType::Geographical);
            }
            checked.push(RuleType::Domain.as_str());
            detail.push(format!("domain={}", app.domain));
            if enforce_domain(&state.policy, app.domain) == Decision::Fail {
                break 'checks Some(RuleType::Domain);
            }
            checked.push(RuleType::AccessCounter.as_str());
            None
        };

        let prefix = |checked: &[&str], detail: &[String]| format!("checked={};{}", checked.join(">"), detail.join(";"));
        if let Some(rule) = denial {
            let text = format!("rule={};{}", rule.as_str(), prefix(&checked, &detail));
            self.log_mut(resource_id).record(now, LogAction::AccessDenied, text)?;
            return Ok(AccessOutcome::Denied(rule));
        }

        let (remaining, delete) = match enforce_access_counter(state.remaining) {
            CounterDecision::Pass(r) => (r, false),
            CounterDecision::PassAndDelete => (Remaining::Limited(0), true),
            CounterDecision::Fail => {
                let text = format!("rule={};{}", RuleType::AccessCounter.as_str(), prefix(&checked, &detail));
                self.log_mut(resource_id).record(now, LogAction::AccessDenied, text)?;
                return Ok(AccessOutcome::Denied(RuleType::AccessCounter));
            }
        };
        detail.push(format!("remaining={remaining}"));
        let text = prefix(&checked, &detail);
        self.log_mut(resource_id).record(now, LogAction::AccessGranted, text)?;
        let payload = std::mem::take(&mut state.payload);
        if delete {
            self.store.remove(resource_id);
            self.log_mut(resource_id).record(now, LogAction::DeletedExhausted, "remaining=0")?;
        } else if remaining != state.remaining {
            state.remaining = remaining;
            state.payload = payload.clone();
            self.seal(resource_id, &state);
        }
        self.persist()?;
        Ok(AccessOutcome::Granted { payload, remaining })
    }

    /// Deletes every object whose retention period has elapsed.
    pub fn enforce_temporal_sweep(&mut self) -> Result<SweepReport, EnclaveError> {
        let now = self.now()?;
        let mut report = SweepReport::default();
        for id in self.store.ids() {
            let state = match self.unseal(id) {
                Ok(s) => s,
                Err(_) => {
                    report.corrupted.push(id);
                    continue;
                }
            };
            let Some(max) = state.policy.temporal() else { continue };
            let age = now.saturating_sub(state.retrieved_at);
            report.checked.push(id);
            self.log_mut(id).record(now, LogAction::TemporalCheck, format!("age={age};max={max}"))?;
            if retention_expired(&state.policy, state.retrieved_at, now) {
                self.store.remove(id);
                self.log_mut(id).record(now, LogAction::DeletedExpired, format!("age={age};max={max}"))?;
                report.deleted.push(id);
            }
        }
        self.persist()?;
        Ok(report)
    }

    /// Monitoring export: records the request, then returns a copy of the log.
    pub fn get_usage_log(&mut self, resource_id: u64, session_id: u64) -> Result<UsageLog, EnclaveError> {
        if !self.logs.contains_key(&resource_id) {
            return Err(EnclaveError::UnknownResource(resource_id));
        }
        let now = self.now()?;
        let log = self.log_mut(resource_id);
        log.record(now, LogAction::MonitoringRequest, format!("session={session_id}"))?;
        Ok(log.clone())
    }

    /// Read-only view of a log for local inspection; appends nothing.
    pub fn audit_log(&self, resource_id: u64) -> Option<&UsageLog> {
        self.logs.get(&resource_id)
    }

    pub fn held_resources(&self) -> Vec<u64> {
        self.store.ids()
    }

    /// Resources with a usage log, held now or in the past.
    pub fn logged_resources(&self) -> Vec<u64> {
        self.logs.keys().copied().collect()
    }

    pub fn inspect(&self, resource_id: u64) -> Result<ObjectInfo, EnclaveError> {
        let s = self.unseal(resource_id)?;
        Ok(ObjectInfo { resource_id, policy: s.policy, retrieved_at: s.retrieved_at, remaining: s.remaining })
    }

    /// Host-side handle on the sealed records, for fault injection.
    pub fn host_store_mut(&mut self) -> &mut SealedStore {
        &mut self.store
    }

    pub fn host_store(&self) -> &SealedStore {
        &self.store
    }

    pub fn storage_image(&self) -> Vec<u8> {
        self.store.to_image()
    }

    /// Simulated restart: a new sealing key is drawn and every readable
    /// object is resealed under it. Returns the ids that could not be read.
    pub fn reboot(&mut self) -> Result<Vec<u64>, EnclaveError> {
        let mut readable = Vec::new();
        let mut corrupted = Vec::new();
        for id in self.store.ids() {
            match self.unseal(id) {
                Ok(s) => readable.push((id, s)),
                Err(_) => corrupted.push(id),
            }
        }
        self.key = SealingKey::generate(&mut self.rng);
        for (id, s) in readable {
            self.seal(id, &s);
        }
        self.persist()?;
        Ok(corrupted)
    }

    /// Mirrors the sealed store to `path` after every change.
    pub fn attach_storage(&mut self, path: impl Into<PathBuf>) -> Result<(), EnclaveError> {
        self.storage_path = Some(path.into());
        self.persist()
    }

    /// Replaces the in-memory records with the image at the attached path.
    /// Every record is authenticated eagerly; unreadable ones are reported
    /// and kept, so later operations on them fail with an integrity error.
    pub fn reload_storage(&mut self) -> Result<Vec<u64>, EnclaveError> {
        let path = self.storage_path.clone().ok_or_else(|| EnclaveError::Storage("no storage attached".into()))?;
        let bytes = fs::read(&path).map_err(|e| EnclaveError::Storage(format!("{}: {e}", path.display())))?;
        self.store = SealedStore::from_image(&bytes)?;
        Ok(self.store.ids().into_iter().filter(|id| self.unseal(*id).is_err()).collect())
    }

    fn persist(&self) -> Result<(), EnclaveError> {
        match &self.storage_path {
            None => Ok(()),
            Some(path) => crate::fsutil::write_atomic(path, &self.store.to_image())
                .map_err(|e| EnclaveError::Storage(format!("{}: {e}", path.display()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{scenario_policy, CountryCode, UsageRule};

    struct Fixture {
        enclave: Enclave,
        clock: SimClock,
        location: SimLocation,
    }

    fn fixture() -> Fixture {
        let clock = SimClock::starting_at(1_000);
        let location = SimLocation::at(CountryCode::IRELAND);
        let mut enclave = Enclave::new(7, AttestationAuthority::from_seed(b"ca"));
        enclave.set_time_provider(Some(Arc::new(clock.clone())));
        enclave.set_geo_provider(Some(Arc::new(location.clone())));
        enclave.apps_mut().register("ZooResearch", DomainCode::Research).unwrap();
        enclave.apps_mut().register("Socialgram", DomainCode::Social).unwrap();
        Fixture { enclave, clock, location }
    }

    #[test]
    fn store_initializes_counter_and_rejects_duplicates() {
        let mut f = fixture();
        f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()).unwrap();
        let info = f.enclave.inspect(1).unwrap();
        assert_eq!(info.remaining, Remaining::Limited(100));
        assert_eq!(info.retrieved_at, 1_000);
        assert_eq!(f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()), Err(EnclaveError::AlreadyStored(1)));
        f.enclave.store_resource(2, b"x".to_vec(), UsagePolicy::empty()).unwrap();
        assert_eq!(f.enclave.inspect(2).unwrap().remaining, Remaining::Unlimited);
    }

    #[test]
    fn scenario_grant_then_domain_denial() {
        let mut f = fixture();
        f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()).unwrap();
        let out = f.enclave.access_protected_resource("ZooResearch", 1).unwrap();
        assert_eq!(out, AccessOutcome::Granted { payload: b"img".to_vec(), remaining: Remaining::Limited(99) });
        let out = f.enclave.access_protected_resource("Socialgram", 1).unwrap();
        assert_eq!(out, AccessOutcome::Denied(RuleType::Domain));
        assert_eq!(f.enclave.inspect(1).unwrap().remaining, Remaining::Limited(99));
        let log = f.enclave.audit_log(1).unwrap();
        let denied = log.entries().last().unwrap();
        assert_eq!(denied.detail_field("rule"), Some("domain"));
        assert_eq!(denied.detail_field("checked"), Some("geographical>domain"));
        assert_eq!(denied.detail_field("remaining"), None);
        assert_eq!(f.enclave.access_protected_resource("Nope", 1), Err(EnclaveError::UnknownApp("Nope".into())));
        assert_eq!(f.enclave.access_protected_resource("ZooResearch", 9), Err(EnclaveError::UnknownResource(9)));
    }

    #[test]
    fn last_grant_deletes_object() {
        let mut f = fixture();
        let policy = UsagePolicy::empty().with(UsageRule::AccessCounter { max_accesses: 1 }).unwrap();
        f.enclave.store_resource(1, b"img".to_vec(), policy).unwrap();
        let out = f.enclave.access_protected_resource("Socialgram", 1).unwrap();
        assert_eq!(out, AccessOutcome::Granted { payload: b"img".to_vec(), remaining: Remaining::Limited(0) });
        assert!(f.enclave.held_resources().is_empty());
        let log = f.enclave.audit_log(1).unwrap();
        assert_eq!(log.entries().last().unwrap().action, LogAction::DeletedExhausted);
        assert_eq!(f.enclave.access_protected_resource("Socialgram", 1), Err(EnclaveError::UnknownResource(1)));
    }

    #[test]
    fn geography_fails_closed_and_short_circuits() {
        let mut f = fixture();
        f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()).unwrap();
        f.location.set(Some(CountryCode::UNITED_STATES));
        assert_eq!(f.enclave.access_protected_resource("ZooResearch", 1).unwrap(), AccessOutcome::Denied(RuleType::Geographical));
        f.enclave.set_geo_provider(None);
        assert_eq!(f.enclave.access_protected_resource("Socialgram", 1).unwrap(), AccessOutcome::Denied(RuleType::Geographical));
        let last = f.enclave.audit_log(1).unwrap().entries().last().unwrap().clone();
        assert_eq!(last.detail_field("loc"), Some("unavailable"));
        assert_eq!(last.detail_field("checked"), Some("geographical"));
        assert_eq!(last.detail_field("domain"), None);
        assert_eq!(f.enclave.inspect(1).unwrap().remaining, Remaining::Limited(100));
    }

    #[test]
    fn sweep_deletes_only_expired() {
        let mut f = fixture();
        let day = 86_400;
        let short = UsagePolicy::empty().with(UsageRule::Temporal { max_retention: day }).unwrap();
        f.enclave.store_resource(1, b"a".to_vec(), scenario_policy()).unwrap();
        f.enclave.store_resource(2, b"b".to_vec(), short).unwrap();
        f.enclave.store_resource(3, b"c".to_vec(), scenario_policy()).unwrap();
        f.enclave.store_resource(4, b"d".to_vec(), UsagePolicy::empty()).unwrap();
        let r = f.enclave.enforce_temporal_sweep().unwrap();
        assert_eq!((r.checked.len(), r.deleted.len()), (3, 0));
        f.clock.advance(day + 1);
        let r = f.enclave.enforce_temporal_sweep().unwrap();
        assert_eq!(r.checked, vec![1, 2, 3]);
        assert_eq!(r.deleted, vec![2]);
        assert_eq!(f.enclave.held_resources(), vec![1, 3, 4]);
        assert_eq!(f.enclave.audit_log(2).unwrap().count(LogAction::TemporalCheck), 2);
    }

    #[test]
    fn usage_log_export_records_request_first() {
        let mut f = fixture();
        f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()).unwrap();
        f.enclave.access_protected_resource("ZooResearch", 1).unwrap();
        f.enclave.access_protected_resource("ZooResearch", 1).unwrap();
        f.enclave.access_protected_resource("Socialgram", 1).unwrap();
        let log = f.enclave.get_usage_log(1, 4).unwrap();
        let actions: Vec<LogAction> = log.entries().iter().map(|e| e.action).collect();
        use LogAction::*;
        assert_eq!(actions, vec![Retrieved, AccessGranted, AccessGranted, AccessDenied, MonitoringRequest]);
        assert_eq!(log.entries().last().unwrap().detail_field("session"), Some("4"));
        assert_eq!(f.enclave.get_usage_log(8, 1), Err(EnclaveError::UnknownResource(8)));
    }

    #[test]
    fn tampering_is_detected_on_next_access() {
        let mut f = fixture();
        f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()).unwrap();
        f.enclave.host_store_mut().get_mut(1).unwrap().flip_bit(77);
        assert_eq!(f.enclave.access_protected_resource("ZooResearch", 1), Err(EnclaveError::Integrity(1)));
        assert_eq!(f.enclave.inspect(1), Err(EnclaveError::Integrity(1)));
        assert_eq!(f.enclave.enforce_temporal_sweep().unwrap().corrupted, vec![1]);
    }

    #[test]
    fn reboot_reseals_and_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sealed.bin");
        let mut f = fixture();
        f.enclave.attach_storage(&path).unwrap();
        f.enclave.store_resource(1, b"payload-bytes".to_vec(), scenario_policy()).unwrap();
        let before = f.enclave.host_store().get(1).unwrap().clone();
        assert_eq!(f.enclave.reboot().unwrap(), Vec::<u64>::new());
        assert_ne!(f.enclave.host_store().get(1).unwrap().ciphertext, before.ciphertext);
        assert_eq!(f.enclave.reload_storage().unwrap(), Vec::<u64>::new());
        assert!(f.enclave.access_protected_resource("ZooResearch", 1).unwrap().is_granted());

        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x10;
        fs::write(&path, bytes).unwrap();
        assert_eq!(f.enclave.reload_storage().unwrap(), vec![1]);
        assert_eq!(f.enclave.access_protected_resource("ZooResearch", 1), Err(EnclaveError::Integrity(1)));
    }

    #[test]
    fn requests_carry_fresh_quotes() {
        let mut f = fixture();
        let alice = NodeIdentity::from_seed(b"alice");
        let url = "https://BobNode.com/images/Mesoplodon.jpg";
        let a = f.enclave.build_data_request(&alice, url).unwrap();
        let b = f.enclave.build_data_request(&alice, url).unwrap();
        assert_eq!(a.claim, alice.public_key());
        assert_eq!(a.auth_token.recover(url.as_bytes()).unwrap(), alice.public_key());
        assert_ne!(a.attestation, b.attestation);
        let verifier = AttestationAuthority::from_seed(b"ca").verifier();
        assert_eq!(verifier.verify(a.attestation.as_ref().unwrap(), url), Ok(()));
        assert_eq!(f.enclave.build_data_request(&alice, ""), Err(EnclaveError::EmptyUrl));
    }

    #[test]
    fn missing_clock_is_an_error_without_side_effects() {
        let mut f = fixture();
        f.enclave.store_resource(1, b"img".to_vec(), scenario_policy()).unwrap();
        f.enclave.set_time_provider(None);
        assert_eq!(f.enclave.access_protected_resource("ZooResearch", 1), Err(EnclaveError::ProviderUnavailable("get_trusted_time")));
        assert_eq!(f.enclave.audit_log(1).unwrap().entries().len(), 1);
    }
}
