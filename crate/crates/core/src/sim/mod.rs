//! Deterministic multi-node simulation.
//!
//! A [`Network`] owns one ledger, one simulated clock and a set of nodes,
//! each made of a datastore, an enclave, a location provider and a pull-in
//! listener. Script steps run one at a time; after each step every online
//! node runs its background tasks (scheduled monitoring, event listener,
//! evidence collection) in configuration order. Nothing reads the wall
//! clock, so a config and script always produce the same transcript.
//!
//! Transcript records are single lines: a 4-digit script line number
//! (`0000` for setup), an event name, then `key=value` fields.

pub mod config;
pub mod report;
pub mod script;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use config::{AppConfig, NetworkConfig, NodeConfig, ResourceConfig};
pub use report::{compliance_report, held_remaining, replay_log, ComplianceReport, ResponderReport, Violation, ViolationKind};
pub use script::{parse_duration, Assertion, Expected, ResourceName, RuleTarget, ScenarioScript, ScriptLine, SessionRef, Step};

use crate::contracts::{calls, governance_ledger, GovernanceLedger, RuleScope, SessionState};
use crate::datastore::{Datastore, DatastoreError, HttpRequest};
use crate::enclave::{AccessOutcome, AttestationAuthority, Enclave, EnclaveError, Remaining, SimClock, SimLocation};
use crate::identity::{sha256, NodeIdentity, PublicKey};
use crate::ledger::{Address, LedgerError, TxStatus};
use crate::oracle_bridge::PullInListener;
use crate::policy::{CountryCode, DomainCode, UsagePolicy};
use crate::usage_log::encode_logs;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("setup of node {node}: {message}")]
    Setup { node: String, message: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("session {0} is still open")]
    SessionNotFinished(u64),
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("io: {0}")]
    Io(String),
}

/// Result of the most recent fetch or open, for `expect last`.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Outcome {
    Granted,
    Denied(String),
    Error(String),
}

impl Outcome {
    fn describe(&self) -> String {
        match self {
            Outcome::Granted => "granted".into(),
            Outcome::Denied(r) => format!("denied {r}"),
            Outcome::Error(k) => format!("error {k}"),
        }
    }
}

/// Variant name of an error, e.g. `UnknownResource`.
fn error_kind(e: &impl Debug) -> String {
    let s = format!("{e:?}");
    s.split(['(', ' ', '{']).next().unwrap_or_default().to_owned()
}

fn seed_u64(parts: &str) -> u64 {
    let d = sha256(parts.as_bytes());
    u64::from_be_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

fn state_name(s: SessionState) -> &'static str {
    match s {
        SessionState::Open => "open",
        SessionState::Complete => "complete",
        SessionState::TimedOut => "timed_out",
    }
}

pub struct Node {
    name: String,
    datastore: Datastore,
    enclave: Enclave,
    location: SimLocation,
    listener: PullInListener,
    online: bool,
}

impl Node {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn identity(&self) -> &NodeIdentity {
        self.datastore.identity()
    }

    pub fn datastore(&self) -> &Datastore {
        &self.datastore
    }

    pub fn enclave(&self) -> &Enclave {
        &self.enclave
    }

    pub fn enclave_mut(&mut self) -> &mut Enclave {
        &mut self.enclave
    }

    pub fn location(&self) -> &SimLocation {
        &self.location
    }

    pub fn is_online(&self) -> bool {
        self.online
    }

    fn resource_id(&self, path: &str) -> Option<u64> {
        self.datastore.config().resource_by_path(path).map(|r| r.resource_id)
    }
}

/// Transcript and failed assertions of a scenario run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioRun {
    pub transcript: Vec<String>,
    pub failures: Vec<String>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(!self.passed())
    }

    pub fn transcript_text(&self) -> String {
        self.transcript.iter().map(|l| format!("{l}\n")).collect()
    }
}

pub struct Network {
    config: NetworkConfig,
    ledger: GovernanceLedger,
    clock: SimClock,
    indexing: Address,
    oracle: Address,
    nodes: Vec<Node>,
    names: BTreeMap<PublicKey, String>,
    transcript: Vec<String>,
    receipts_seen: usize,
    last_outcome: Option<Outcome>,
    last_session: Option<u64>,
    root: PathBuf,
    _tempdir: Option<tempfile::TempDir>,
}

const OPERATOR: &str = "operator";

impl Network {
    /// Builds the network in a fresh temporary directory.
    pub fn spawn(config: NetworkConfig) -> Result<Self, SimError> {
        let dir = tempfile::tempdir().map_err(|e| SimError::Io(e.to_string()))?;
        let root = dir.path().to_path_buf();
        let mut net = Self::spawn_in(config, root)?;
        net._tempdir = Some(dir);
        Ok(net)
    }

    /// Builds the network with node directories under `root`.
    pub fn spawn_in(config: NetworkConfig, root: impl Into<PathBuf>) -> Result<Self, SimError> {
        let root = root.into();
        let mut ledger = governance_ledger(config.gas_table()?)?;
        let operator = NodeIdentity::from_seed(format!("regov/{OPERATOR}/{}", config.seed).as_bytes());
        let indexing = calls::deploy_indexing(&mut ledger, &operator, config.session_deadline)?;
        let oracle = calls::oracle_address(&ledger, indexing)?;
        let authority = AttestationAuthority::from_seed(format!("regov/authority/{}", config.seed).as_bytes());
        let clock = SimClock::starting_at(config.clock_start);

        let mut net = Self {
            config: config.clone(),
            ledger,
            clock,
            indexing,
            oracle,
            nodes: Vec::new(),
            names: BTreeMap::from([(operator.public_key(), OPERATOR.to_owned())]),
            transcript: Vec::new(),
            receipts_seen: 0,
            last_outcome: None,
            last_session: None,
            root,
            _tempdir: None,
        };
        net.emit(0, "deploy", format!("contract=DTindexing address={indexing} oracle={oracle}"));
        net.flush_gas(0);
        for node in &config.nodes {
            net.add_node(node, &authority).map_err(|message| SimError::Setup { node: node.name.clone(), message })?;
        }
        Ok(net)
    }

    fn add_node(&mut self, cfg: &NodeConfig, authority: &AttestationAuthority) -> Result<(), String> {
        let identity = NodeIdentity::from_seed(cfg.name.as_bytes());
        self.names.insert(identity.public_key(), cfg.name.clone());
        let dir = self.root.join(&cfg.name);
        let mut datastore =
            Datastore::init(dir.join("pod"), identity, &cfg.url(), cfg.pod_type(), &mut self.ledger, self.indexing, authority.verifier())
                .map_err(|e| e.to_string())?;
        let c = datastore.config();
        let fields = format!(
            "node={} id={} obligations={} type={} url={}",
            cfg.name,
            c.datastore_id,
            c.obligations_address,
            cfg.pod_type(),
            c.base_url
        );
        self.emit(0, "pod", fields);
        self.flush_gas(0);

        for r in &cfg.resources {
            let payload = self.config.resource_payload(r).map_err(|e| e.to_string())?;
            let policy = self.config.resource_policy(r).map_err(|e| e.to_string())?;
            let id = datastore.upload_resource(&mut self.ledger, &r.path, &payload, policy).map_err(|e| e.to_string())?;
            self.emit(0, "upload", format!("node={} path={} resource={id} policy={}", cfg.name, r.path, policy_json(&policy)));
            self.flush_gas(0);
            if self.config.monitoring_period > 0 {
                datastore.schedule_monitoring(id, self.config.monitoring_period, self.ledger.block_height()).map_err(|e| e.to_string())?;
            }
        }

        let mut enclave = Enclave::new(seed_u64(&format!("{}/enclave/{}", self.config.seed, cfg.name)), authority.clone());
        for app in &cfg.apps {
            let domain = DomainCode::from_name(&app.domain).expect("checked at load");
            enclave.apps_mut().register(app.id.clone(), domain).map_err(|e| e.to_string())?;
        }
        let location = SimLocation::default();
        location.set(cfg.country());
        enclave.set_geo_provider(Some(Arc::new(location.clone())));
        enclave.set_time_provider(Some(Arc::new(self.clock.clone())));
        enclave.attach_storage(dir.join("enclave.sealed")).map_err(|e| e.to_string())?;

        let listener = PullInListener::new(datastore.push_oracle().clone(), datastore.oracle_cursor(), Some(self.oracle));
        self.nodes.push(Node { name: cfg.name.clone(), datastore, enclave, location, listener, online: true });
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn ledger(&self) -> &GovernanceLedger {
        &self.ledger
    }

    /// Direct chain access, e.g. to submit transactions no node would send.
    pub fn ledger_mut(&mut self) -> &mut GovernanceLedger {
        &mut self.ledger
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn indexing(&self) -> Address {
        self.indexing
    }

    pub fn oracle(&self) -> Address {
        self.oracle
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_mut(&mut self, name: &str) -> Option<&mut Node> {
        self.nodes.iter_mut().find(|n| n.name == name)
    }

    /// Every record emitted since spawn.
    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    pub fn last_session(&self) -> Option<u64> {
        self.last_session
    }

    pub fn name_of(&self, key: &PublicKey) -> String {
        self.names.get(key).cloned().unwrap_or_else(|| key.to_hex()[..16].to_owned())
    }

    fn index(&self, name: &str) -> Result<usize, SimError> {
        self.nodes.iter().position(|n| n.name == name).ok_or_else(|| SimError::UnknownNode(name.to_owned()))
    }

    pub fn resource_id(&self, resource: &ResourceName) -> Option<u64> {
        self.node(&resource.owner)?.resource_id(&resource.path)
    }

    fn emit(&mut self, line: usize, event: &str, fields: String) {
        self.transcript.push(format!("{line:04} {event} {fields}").trim_end().to_owned());
    }

    fn flush_gas(&mut self, line: usize) {
        let fresh: Vec<String> = self.ledger.receipts()[self.receipts_seen..]
            .iter()
            .map(|r| {
                let status = match &r.status {
                    TxStatus::Ok => "ok".to_owned(),
                    TxStatus::Reverted(reason) => format!("reverted:{reason}"),
                };
                format!("sender={} call={}.{} gas={} status={status}", self.name_of(&r.sender), r.kind, r.function, r.gas_charged)
            })
            .collect();
        self.receipts_seen = self.ledger.receipts().len();
        for f in fresh {
            self.emit(line, "gas", f);
        }
    }

    /// Line-delimited usage log of `resource_id` as held by `node`.
    pub fn log_dump(&self, node: &str, resource_id: u64) -> Result<Option<String>, SimError> {
        let n = self.node(node).ok_or_else(|| SimError::UnknownNode(node.to_owned()))?;
        Ok(n.enclave.audit_log(resource_id).map(|l| String::from_utf8(encode_logs([l])).expect("logs are utf-8")))
    }

    pub fn gas_report(&self) -> String {
        self.ledger.gas_report()
    }

    /// Runs every step, then returns the full transcript and all failed assertions.
    pub fn run_scenario(&mut self, script: &ScenarioScript) -> ScenarioRun {
        let mut failures = Vec::new();
        for line in &script.steps {
            match &line.step {
                Step::Expect(a) => {
                    let (ok, actual) = self.check(a);
                    let what = line.text.strip_prefix("expect").unwrap_or(&line.text).trim_start();
                    if ok {
                        self.emit(line.line, "expect", format!("ok {what}"));
                    } else {
                        self.emit(line.line, "expect", format!("FAILED {what} actual={actual}"));
                        failures.push(format!("line {}: {} (actual {actual})", line.line, line.text));
                    }
                }
                Step::Repeat { times, step } => {
                    for _ in 0..*times {
                        self.run_step(line.line, step);
                    }
                }
                step => self.run_step(line.line, step),
            }
        }
        ScenarioRun { transcript: self.transcript.clone(), failures }
    }

    fn run_step(&mut self, line: usize, step: &Step) {
        if let Err(e) = self.execute(line, step) {
            self.emit(line, "error", format!("{e}"));
        }
        self.flush_gas(line);
        if self.config.clock_step > 0 {
            self.clock.advance(self.config.clock_step);
        }
        self.run_tasks(line);
    }

    fn execute(&mut self, line: usize, step: &Step) -> Result<(), SimError> {
        match step {
            Step::Fetch { consumer, owner, path } => self.fetch(line, consumer, owner, path),
            Step::Open { consumer, app, resource } => self.open(line, consumer, app, resource),
            Step::Advance { seconds } => {
                let now = self.clock.advance(*seconds);
                self.emit(line, "advance", format!("by={seconds} now={now}"));
                Ok(())
            }
            Step::Sweep { node } => self.sweep(line, node),
            Step::Monitor { owner, path, deadline } => {
                let i = self.index(owner)?;
                let Some(id) = self.nodes[i].resource_id(path) else {
                    self.emit(line, "monitor", format!("owner={owner} path={path} status=error error=NotOwnedHere"));
                    return Ok(());
                };
                let node = &mut self.nodes[i];
                match node.datastore.monitor_now(&mut self.ledger, id, *deadline) {
                    Ok(session) => self.record_monitor(line, owner, id, session, false),
                    Err(e) => self.emit(line, "monitor", format!("owner={owner} resource={id} status=error error={}", error_kind(&e))),
                }
                Ok(())
            }
            Step::SetRule { owner, target, rule } => {
                let result = self
                    .rule_scope(owner, target)
                    .and_then(|(i, scope)| self.nodes[i].datastore.set_rule(&mut self.ledger, scope, *rule).map(|_| scope));
                let what = format!("owner={owner} target={} rule={}={}", target_name(target), rule.rule_type(), rule.parameter());
                self.record_rule_change(line, "set-rule", what, result);
                Ok(())
            }
            Step::RemoveRule { owner, target, rule_type } => {
                let result = self
                    .rule_scope(owner, target)
                    .and_then(|(i, scope)| self.nodes[i].datastore.remove_rule(&mut self.ledger, scope, *rule_type).map(|_| scope));
                let what = format!("owner={owner} target={} rule={rule_type}", target_name(target));
                self.record_rule_change(line, "remove-rule", what, result);
                Ok(())
            }
            Step::Move { node, country } => {
                let i = self.index(node)?;
                self.nodes[i].location.set(country.map(CountryCode));
                let shown = country.map_or_else(|| "none".to_owned(), |c| CountryCode(c).to_string());
                self.emit(line, "move", format!("node={node} country={shown}"));
                Ok(())
            }
            Step::Tick { blocks } => {
                for _ in 0..*blocks {
                    self.ledger.mine_empty_block();
                    self.run_tasks(line);
                }
                self.emit(line, "tick", format!("blocks={blocks} height={}", self.ledger.block_height()));
                Ok(())
            }
            Step::Offline { node } | Step::Online { node } => {
                let up = matches!(step, Step::Online { .. });
                let i = self.index(node)?;
                self.nodes[i].online = up;
                self.emit(line, if up { "online" } else { "offline" }, format!("node={node}"));
                Ok(())
            }
            Step::Repeat { times, step } => {
                for _ in 0..*times {
                    self.execute(line, step)?;
                }
                Ok(())
            }
            Step::Expect(_) => Ok(()),
        }
    }

    fn rule_scope(&self, owner: &str, target: &RuleTarget) -> Result<(usize, RuleScope), DatastoreError> {
        let i = self.index(owner).map_err(|e| DatastoreError::Metafile(e.to_string()))?;
        let scope = match target {
            RuleTarget::Default => RuleScope::Default,
            RuleTarget::Path(p) => match self.nodes[i].resource_id(p) {
                Some(id) => RuleScope::Resource(id),
                None => return Err(DatastoreError::InvalidPath(p.clone())),
            },
        };
        Ok((i, scope))
    }

    fn record_rule_change(&mut self, line: usize, event: &str, what: String, result: Result<RuleScope, DatastoreError>) {
        let status = match result {
            Ok(_) => "status=ok".to_owned(),
            Err(DatastoreError::Ledger(LedgerError::Reverted(r))) => format!("status=reverted reason={r}"),
            Err(e) => format!("status=error error={}", error_kind(&e)),
        };
        self.emit(line, event, format!("{what} {status}"));
    }

    fn record_monitor(&mut self, line: usize, owner: &str, resource: u64, session: u64, scheduled: bool) {
        self.last_session = Some(session);
        let expected = calls::session(&self.ledger, self.oracle, session)
            .map(|s| s.expected_responders.iter().map(|k| self.name_of(k)).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        let expected = if expected.is_empty() { "none".to_owned() } else { expected };
        let origin = if scheduled { " scheduled=yes" } else { "" };
        self.emit(line, "monitor", format!("owner={owner} resource={resource} session={session} expected={expected}{origin}"));
    }

    fn fetch(&mut self, line: usize, consumer: &str, owner: &str, path: &str) -> Result<(), SimError> {
        let (c, o) = (self.index(consumer)?, self.index(owner)?);
        let head = format!("consumer={consumer} owner={owner} path={path}");
        let outcome = 'fetch: {
            if !self.nodes[c].online || !self.nodes[o].online {
                break 'fetch Outcome::Error("Unreachable".into());
            }
            let url = self.nodes[o].datastore.config().url_for(path);
            let identity = self.nodes[c].identity().clone();
            let request = match self.nodes[c].enclave.build_data_request(&identity, &url) {
                Ok(r) => r,
                Err(e) => break 'fetch Outcome::Error(error_kind(&e)),
            };
            let response = self.nodes[o].datastore.handle_data_request(&HttpRequest::post(&request)).expect("POST is answered");
            let (Some(id), Some(payload), Some(policy), Ok(())) =
                (response.resource_id, response.payload, response.policy, response.status)
            else {
                break 'fetch Outcome::Denied(response.status.err().map_or("unknown", |r| r.as_str()).to_owned());
            };
            match self.nodes[c].enclave.store_resource(id, payload, policy) {
                Ok(()) => {
                    self.emit(line, "fetch", format!("{head} status=granted resource={id} policy={}", policy_json(&policy)));
                    break 'fetch Outcome::Granted;
                }
                Err(e) => Outcome::Error(error_kind(&e)),
            }
        };
        match &outcome {
            Outcome::Granted => {}
            Outcome::Denied(r) => self.emit(line, "fetch", format!("{head} status=denied reason={r}")),
            Outcome::Error(k) => self.emit(line, "fetch", format!("{head} status=error error={k}")),
        }
        self.last_outcome = Some(outcome);
        Ok(())
    }

    fn open(&mut self, line: usize, consumer: &str, app: &str, resource: &ResourceName) -> Result<(), SimError> {
        let c = self.index(consumer)?;
        let Some(id) = self.resource_id(resource) else {
            self.emit(line, "open", format!("consumer={consumer} app={app} resource={resource} status=error error=UnknownPath"));
            self.last_outcome = Some(Outcome::Error("UnknownPath".into()));
            return Ok(());
        };
        let head = format!("consumer={consumer} app={app} resource={id}");
        let outcome = if self.nodes[c].online {
            self.nodes[c].enclave.access_protected_resource(app, id)
        } else {
            Err(EnclaveError::ProviderUnavailable("node offline"))
        };
        let outcome = match outcome {
            Ok(AccessOutcome::Granted { remaining, .. }) => {
                self.emit(line, "open", format!("{head} status=granted remaining={remaining}"));
                if remaining == Remaining::Limited(0) {
                    self.emit(line, "deleted", format!("node={consumer} resource={id} reason=exhausted"));
                }
                Outcome::Granted
            }
            Ok(AccessOutcome::Denied(rule)) => {
                self.emit(line, "open", format!("{head} status=denied rule={rule}"));
                Outcome::Denied(rule.as_str().to_owned())
            }
            Err(e) => {
                self.emit(line, "open", format!("{head} status=error error={}", error_kind(&e)));
                Outcome::Error(error_kind(&e))
            }
        };
        self.last_outcome = Some(outcome);
        Ok(())
    }

    fn sweep(&mut self, line: usize, node: &str) -> Result<(), SimError> {
        let i = self.index(node)?;
        match self.nodes[i].enclave.enforce_temporal_sweep() {
            Ok(report) => {
                let fields = format!("node={node} checked={} deleted={}", report.checked.len(), report.deleted.len());
                self.emit(line, "sweep", fields);
                for id in report.deleted {
                    self.emit(line, "deleted", format!("node={node} resource={id} reason=expired"));
                }
                for id in report.corrupted {
                    self.emit(line, "corrupted", format!("node={node} resource={id}"));
                }
            }
            Err(e) => self.emit(line, "sweep", format!("node={node} status=error error={}", error_kind(&e))),
        }
        Ok(())
    }

    /// One round of background work for every online node.
    fn run_tasks(&mut self, line: usize) {
        let height = self.ledger.block_height();
        for i in 0..self.nodes.len() {
            if !self.nodes[i].online {
                continue;
            }
            let node = &mut self.nodes[i];
            let started = node.datastore.poll_schedules(&mut self.ledger, height);
            let owner = node.name.clone();
            match started {
                Ok(sessions) => {
                    for s in sessions {
                        let resource = calls::session(&self.ledger, self.oracle, s).map_or(0, |s| s.resource_ids[0]);
                        self.record_monitor(line, &owner, resource, s, true);
                    }
                }
                Err(e) => self.emit(line, "schedule", format!("owner={owner} status=error error={}", error_kind(&e))),
            }
            self.flush_gas(line);
        }
        for i in 0..self.nodes.len() {
            if !self.nodes[i].online {
                continue;
            }
            let node = &mut self.nodes[i];
            let report = node.listener.poll_and_dispatch(&mut self.ledger, &mut node.enclave);
            let cursor = node.listener.cursor();
            let saved = node.datastore.save_oracle_cursor(cursor);
            let name = node.name.clone();
            for d in report.dispatched {
                let status = match d.receipt.revert_reason() {
                    None => "ok".to_owned(),
                    Some(r) => format!("reverted:{r}"),
                };
                self.emit(line, "evidence", format!("node={name} session={} status={status}", d.session_id));
            }
            if let Some(e) = report.stalled {
                self.emit(line, "stall", format!("node={name} error={e}"));
            }
            if let Err(e) = saved {
                self.emit(line, "stall", format!("node={name} error={e}"));
            }
            self.flush_gas(line);
        }
        for i in 0..self.nodes.len() {
            if !self.nodes[i].online {
                continue;
            }
            let finished = match self.nodes[i].datastore.collect_evidence(&self.ledger) {
                Ok(f) => f,
                Err(e) => {
                    let name = self.nodes[i].name.clone();
                    self.emit(line, "collect", format!("owner={name} status=error error={}", error_kind(&e)));
                    continue;
                }
            };
            for s in finished {
                let session = self.nodes[i].datastore.evidence(s).expect("just collected").clone();
                let missing: Vec<String> = session.non_responders().iter().map(|k| self.name_of(k)).collect();
                let missing = if missing.is_empty() { "none".to_owned() } else { missing.join(",") };
                let fields = format!(
                    "owner={} session={s} state={} responses={} missing={missing}",
                    self.nodes[i].name,
                    state_name(session.state),
                    session.responses.len()
                );
                self.emit(line, "session-closed", fields);
            }
        }
    }

    /// Decodes a finished session's evidence and replays every log against
    /// the rules currently on chain.
    pub fn compliance_report(&self, session_id: u64) -> Result<ComplianceReport, SimError> {
        report::compliance_report(&self.ledger, self.oracle, session_id, |k| self.name_of(k))
    }

    fn session_id(&self, r: SessionRef) -> Option<u64> {
        match r {
            SessionRef::Last => self.last_session,
            SessionRef::Id(id) => Some(id),
        }
    }

    /// Evaluates an assertion; returns whether it held and the observed value.
    fn check(&self, a: &Assertion) -> (bool, String) {
        let resource_of = |consumer: &str, resource: &ResourceName| -> Result<(&Node, u64), String> {
            let node = self.node(consumer).ok_or_else(|| format!("unknown node {consumer}"))?;
            let id = self.resource_id(resource).ok_or_else(|| format!("unknown resource {resource}"))?;
            Ok((node, id))
        };
        let session_of = |r: SessionRef| self.session_id(r).ok_or_else(|| "no session yet".to_owned());
        let observed: Result<(bool, String), String> = (|| match a {
            Assertion::Last(expected) => {
                let got = self.last_outcome.as_ref().map_or("nothing".to_owned(), Outcome::describe);
                let want = match expected {
                    Expected::Granted => Outcome::Granted,
                    Expected::Denied(r) => Outcome::Denied(r.clone()),
                    Expected::Error(k) => Outcome::Error(k.clone()),
                };
                Ok((self.last_outcome.as_ref() == Some(&want), got))
            }
            Assertion::Remaining { consumer, resource, remaining } => {
                let (node, id) = resource_of(consumer, resource)?;
                let got = match node.enclave.inspect(id) {
                    Ok(info) => Some(info.remaining.to_string()),
                    Err(EnclaveError::UnknownResource(_)) => None,
                    Err(e) => return Err(e.to_string()),
                };
                Ok((&got == remaining, got.unwrap_or_else(|| "absent".into())))
            }
            Assertion::Held { consumer, resource, held } => {
                let (node, id) = resource_of(consumer, resource)?;
                let got = node.enclave.held_resources().contains(&id);
                Ok((got == *held, if got { "yes" } else { "no" }.into()))
            }
            Assertion::Count { consumer, resource, action, count } => {
                let (node, id) = resource_of(consumer, resource)?;
                let got = node.enclave.audit_log(id).map_or(0, |l| l.count(*action));
                Ok((got == *count, got.to_string()))
            }
            Assertion::SessionState { session, state } => {
                let s = calls::session(&self.ledger, self.oracle, session_of(*session)?).map_err(|e| e.to_string())?;
                let got = state_name(s.state_at(self.ledger.block_height()));
                Ok((got == state, got.to_owned()))
            }
            Assertion::Responses { session, count } => {
                let s = calls::session(&self.ledger, self.oracle, session_of(*session)?).map_err(|e| e.to_string())?;
                Ok((s.responses.len() == *count, s.responses.len().to_string()))
            }
            Assertion::Violations { session, count } => {
                let report = self.compliance_report(session_of(*session)?).map_err(|e| e.to_string())?;
                Ok((report.violation_count() == *count, report.violation_count().to_string()))
            }
            Assertion::NonResponders { session, nodes } => {
                let report = self.compliance_report(session_of(*session)?).map_err(|e| e.to_string())?;
                let mut got = report.non_responders.clone();
                let mut want = nodes.clone();
                got.sort();
                want.sort();
                let shown = if got.is_empty() { "none".to_owned() } else { got.join(",") };
                Ok((got == want, shown))
            }
        })();
        observed.unwrap_or_else(|e| (false, e.replace(' ', "_")))
    }
}

fn target_name(t: &RuleTarget) -> &str {
    match t {
        RuleTarget::Default => "default",
        RuleTarget::Path(p) => p,
    }
}

fn policy_json(p: &UsagePolicy) -> String {
    serde_json::to_string(p).expect("policies encode")
}

/// Loads a config and script from disk and runs them in a temporary directory.
pub fn run_files(config: &Path, script: &Path) -> Result<(Network, ScenarioRun), SimError> {
    let cfg = NetworkConfig::load(config)?;
    let text = std::fs::read_to_string(script).map_err(|e| SimError::Io(format!("{}: {e}", script.display())))?;
    let script = ScenarioScript::parse(&text, Some(&cfg))?;
    let mut net = Network::spawn(cfg)?;
    let run = net.run_scenario(&script);
    Ok((net, run))
}
