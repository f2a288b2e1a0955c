//! Off-chain evaluation of monitoring evidence.

use std::collections::BTreeMap;
use std::fmt;

use super::SimError;
use crate::contracts::{calls, SessionState};
use crate::enclave::Remaining;
use crate::identity::PublicKey;
use crate::ledger::{Address, Chain, LedgerError};
use crate::policy::{CountryCode, UsagePolicy};
use crate::usage_log::{decode_logs, LogAction, UsageLog, UsageLogEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// More grants in one retrieval than the counter allows.
    CounterExceeded,
    /// Object used or kept after its retention period.
    RetentionExceeded,
    DomainMismatch,
    LocationOutside,
    /// Grant recorded while no copy was held.
    AccessWithoutCopy,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::CounterExceeded => "counter_exceeded",
            ViolationKind::RetentionExceeded => "retention_exceeded",
            ViolationKind::DomainMismatch => "domain_mismatch",
            ViolationKind::LocationOutside => "location_outside",
            ViolationKind::AccessWithoutCopy => "access_without_copy",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub resource_id: u64,
    pub kind: ViolationKind,
    pub timestamp: u64,
    pub detail: String,
}

/// Copy of a resource as reconstructed from its log.
struct HeldCopy {
    retrieved_at: u64,
    grants: u64,
    counter_flagged: bool,
    retention_flagged: bool,
}

/// Replays `log` against `policy` and returns every breach it shows.
pub fn replay_log(policy: &UsagePolicy, log: &UsageLog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut copy: Option<HeldCopy> = None;
    let flag = |out: &mut Vec<Violation>, e: &UsageLogEntry, kind, detail: String| {
        out.push(Violation { resource_id: log.resource_id(), kind, timestamp: e.timestamp, detail });
    };
    let entries = log.entries();
    for (i, e) in entries.iter().enumerate() {
        match e.action {
            LogAction::Retrieved => {
                copy = Some(HeldCopy { retrieved_at: e.timestamp, grants: 0, counter_flagged: false, retention_flagged: false })
            }
            LogAction::DeletedExpired | LogAction::DeletedExhausted => copy = None,
            LogAction::AccessGranted => {
                let Some(c) = copy.as_mut() else {
                    flag(&mut out, e, ViolationKind::AccessWithoutCopy, e.detail.clone());
                    continue;
                };
                c.grants += 1;
                if let Some(max) = policy.access_counter() {
                    if c.grants > max && !c.counter_flagged {
                        c.counter_flagged = true;
                        flag(&mut out, e, ViolationKind::CounterExceeded, format!("grants={};max={max}", c.grants));
                    }
                }
                if let Some(max) = policy.temporal() {
                    let age = e.timestamp.saturating_sub(c.retrieved_at);
                    if age > max && !c.retention_flagged {
                        c.retention_flagged = true;
                        flag(&mut out, e, ViolationKind::RetentionExceeded, format!("age={age};max={max}"));
                    }
                }
                if let Some(domain) = policy.domain() {
                    let used = e.detail_field("domain");
                    if used != Some(domain.name()) {
                        let detail = format!("domain={};required={domain}", used.unwrap_or("unrecorded"));
                        flag(&mut out, e, ViolationKind::DomainMismatch, detail);
                    }
                }
                if let Some(region) = policy.geographical() {
                    let loc = e.detail_field("loc").and_then(|l| l.parse::<u16>().ok()).map(CountryCode);
                    if !loc.is_some_and(|c| region.contains(c)) {
                        let detail = format!("loc={};region={}", e.detail_field("loc").unwrap_or("unrecorded"), region.0);
                        flag(&mut out, e, ViolationKind::LocationOutside, detail);
                    }
                }
            }
            LogAction::TemporalCheck => {
                let (Some(c), Some(max)) = (copy.as_mut(), policy.temporal()) else { continue };
                let age = e.timestamp.saturating_sub(c.retrieved_at);
                let deleted_next = entries.get(i + 1).is_some_and(|n| n.action == LogAction::DeletedExpired);
                if age > max && !deleted_next && !c.retention_flagged {
                    c.retention_flagged = true;
                    flag(&mut out, e, ViolationKind::RetentionExceeded, format!("age={age};max={max};kept"));
                }
            }
            LogAction::AccessDenied | LogAction::MonitoringRequest => {}
        }
    }
    out
}

/// What a log says about the copy the consumer holds now.
pub fn held_remaining(log: &UsageLog) -> Option<Remaining> {
    let mut remaining = None;
    for e in log.entries() {
        match e.action {
            LogAction::Retrieved | LogAction::AccessGranted => {
                remaining = match e.detail_field("remaining") {
                    Some("unlimited") => Some(Remaining::Unlimited),
                    Some(n) => n.parse().ok().map(Remaining::Limited),
                    None => remaining,
                }
            }
            LogAction::DeletedExpired | LogAction::DeletedExhausted => remaining = None,
            _ => {}
        }
    }
    remaining
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponderReport {
    pub responder: String,
    pub logs: Vec<UsageLog>,
    pub violations: Vec<Violation>,
    /// Set when the evidence did not decode.
    pub undecodable: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplianceReport {
    pub session_id: u64,
    pub state: SessionState,
    pub resource_ids: Vec<u64>,
    pub responders: Vec<ResponderReport>,
    pub non_responders: Vec<String>,
}

impl ComplianceReport {
    pub fn violation_count(&self) -> usize {
        self.responders.iter().map(|r| r.violations.len()).sum()
    }

    pub fn is_compliant(&self) -> bool {
        self.violation_count() == 0 && self.responders.iter().all(|r| r.undecodable.is_none())
    }

    /// One record per line, in the transcript style.
    pub fn to_lines(&self) -> Vec<String> {
        let state = match self.state {
            SessionState::Open => "open",
            SessionState::Complete => "complete",
            SessionState::TimedOut => "timed_out",
        };
        let ids: Vec<String> = self.resource_ids.iter().map(u64::to_string).collect();
        let mut lines = vec![format!(
            "session={} state={state} resources={} responders={} violations={}",
            self.session_id,
            ids.join(","),
            self.responders.len(),
            self.violation_count()
        )];
        for r in &self.responders {
            let entries: usize = r.logs.iter().map(|l| l.entries().len()).sum();
            lines.push(format!("responder={} logs={} entries={} violations={}", r.responder, r.logs.len(), entries, r.violations.len()));
            if let Some(e) = &r.undecodable {
                lines.push(format!("responder={} undecodable={e}", r.responder));
            }
            for v in &r.violations {
                lines.push(format!(
                    "violation responder={} resource={} kind={} ts={} {}",
                    r.responder, v.resource_id, v.kind, v.timestamp, v.detail
                ));
            }
        }
        for n in &self.non_responders {
            lines.push(format!("non_responder={n}"));
        }
        lines
    }
}

/// Decodes the evidence of a finished session and replays every log
/// against the rules currently on chain for its resource.
pub fn compliance_report<C: Chain + ?Sized>(
    chain: &C,
    oracle: Address,
    session_id: u64,
    name_of: impl Fn(&PublicKey) -> String,
) -> Result<ComplianceReport, SimError> {
    let session = match calls::session(chain, oracle, session_id) {
        Ok(s) => s,
        Err(LedgerError::Reverted(_)) => return Err(SimError::UnknownSession(session_id)),
        Err(e) => return Err(e.into()),
    };
    let evidence = match calls::monitoring_evidence(chain, session.initiator, session_id) {
        Ok(s) => s,
        Err(LedgerError::Reverted(r)) if r.contains("SessionNotFinished") => return Err(SimError::SessionNotFinished(session_id)),
        Err(e) => return Err(e.into()),
    };
    let mut policies: BTreeMap<u64, UsagePolicy> = BTreeMap::new();
    let mut policy_of = |rid: u64| -> Result<UsagePolicy, SimError> {
        if let Some(p) = policies.get(&rid) {
            return Ok(*p);
        }
        let rules = calls::obligation_rules(chain, session.initiator, rid)?;
        let p = UsagePolicy::try_from(rules).map_err(|e| LedgerError::Reverted(e.to_string()))?;
        policies.insert(rid, p);
        Ok(p)
    };
    let mut responders = Vec::new();
    for (key, text) in &evidence.responses {
        let mut r = ResponderReport { responder: name_of(key), logs: Vec::new(), violations: Vec::new(), undecodable: None };
        match decode_logs(text.as_bytes()) {
            Ok(logs) => {
                for log in &logs {
                    r.violations.extend(replay_log(&policy_of(log.resource_id())?, log));
                }
                r.logs = logs;
            }
            Err(e) => r.undecodable = Some(e.to_string()),
        }
        responders.push(r);
    }
    Ok(ComplianceReport {
        session_id,
        state: evidence.state,
        resource_ids: evidence.resource_ids.clone(),
        responders,
        non_responders: evidence.non_responders().iter().map(&name_of).collect(),
    })
}
