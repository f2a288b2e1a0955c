//! Append-only usage logs and their line-delimited export format.
//!
//! One JSON record per line, e.g.
//! `{"ts":0,"resource":1,"action":"access_granted","detail":"app=ZooResearch;..."}`.
//! The same record schema is used for enclave exports and monitoring evidence.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogAction {
    Retrieved,
    AccessGranted,
    AccessDenied,
    TemporalCheck,
    DeletedExpired,
    DeletedExhausted,
    MonitoringRequest,
}

impl LogAction {
    pub fn as_str(self) -> &'static str {
        match self {
            LogAction::Retrieved => "retrieved",
            LogAction::AccessGranted => "access_granted",
            LogAction::AccessDenied => "access_denied",
            LogAction::TemporalCheck => "temporal_check",
            LogAction::DeletedExpired => "deleted_expired",
            LogAction::DeletedExhausted => "deleted_exhausted",
            LogAction::MonitoringRequest => "monitoring_request",
        }
    }
}

impl fmt::Display for LogAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLogEntry {
    #[serde(rename = "ts")]
    pub timestamp: u64,
    #[serde(rename = "resource")]
    pub resource_id: u64,
    pub action: LogAction,
    /// `key=value` pairs separated by `;`.
    pub detail: String,
}

impl UsageLogEntry {
    pub fn detail_field(&self, key: &str) -> Option<&str> {
        self.detail.split(';').find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogError {
    #[error("log entry at t={got} precedes last entry at t={last}")]
    TimeWentBackwards { last: u64, got: u64 },
    #[error("log entry for resource {got} appended to log of resource {expected}")]
    WrongResource { expected: u64, got: u64 },
    #[error("malformed log record on line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageLog {
    resource_id: u64,
    entries: Vec<UsageLogEntry>,
}

impl UsageLog {
    pub fn new(resource_id: u64) -> Self {
        Self { resource_id, entries: Vec::new() }
    }

    pub fn resource_id(&self) -> u64 {
        self.resource_id
    }

    pub fn entries(&self) -> &[UsageLogEntry] {
        &self.entries
    }

    pub fn append(&mut self, entry: UsageLogEntry) -> Result<(), LogError> {
        if entry.resource_id != self.resource_id {
            return Err(LogError::WrongResource { expected: self.resource_id, got: entry.resource_id });
        }
        if let Some(last) = self.entries.last() {
            if entry.timestamp < last.timestamp {
                return Err(LogError::TimeWentBackwards { last: last.timestamp, got: entry.timestamp });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn record(&mut self, timestamp: u64, action: LogAction, detail: impl Into<String>) -> Result<(), LogError> {
        self.append(UsageLogEntry { timestamp, resource_id: self.resource_id, action, detail: detail.into() })
    }

    pub fn count(&self, action: LogAction) -> usize {
        self.entries.iter().filter(|e| e.action == action).count()
    }
}

pub fn encode_logs<'a, I: IntoIterator<Item = &'a UsageLog>>(logs: I) -> Vec<u8> {
    let mut out = Vec::new();
    for log in logs {
        for entry in &log.entries {
            serde_json::to_writer(&mut out, entry).expect("log records always encode");
            out.push(b'\n');
        }
    }
    out
}

/// Splits an export back into per-resource logs, ordered by first appearance.
pub fn decode_logs(bytes: &[u8]) -> Result<Vec<UsageLog>, LogError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LogError::Malformed { line: 0, message: e.to_string() })?;
    let mut logs: Vec<UsageLog> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let entry: UsageLogEntry = serde_json::from_str(line).map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
        match logs.iter_mut().find(|l| l.resource_id == entry.resource_id) {
            Some(log) => log.append(entry)?,
            None => {
                let mut log = UsageLog::new(entry.resource_id);
                log.append(entry)?;
                logs.push(log);
            }
        }
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_only_with_monotone_time() {
        let mut log = UsageLog::new(1);
        log.record(5, LogAction::Retrieved, "").unwrap();
        log.record(5, LogAction::AccessGranted, "app=a").unwrap();
        assert_eq!(log.record(4, LogAction::AccessGranted, ""), Err(LogError::TimeWentBackwards { last: 5, got: 4 }));
        assert_eq!(log.entries().len(), 2);
    }

    #[test]
    fn encode_decode() {
        let mut a = UsageLog::new(1);
        a.record(0, LogAction::Retrieved, "").unwrap();
        a.record(3, LogAction::AccessDenied, "rule=domain;app=Socialgram").unwrap();
        let mut b = UsageLog::new(7);
        b.record(1, LogAction::MonitoringRequest, "session=2").unwrap();
        let bytes = encode_logs([&a, &b]);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap().lines().next().unwrap(),
            r#"{"ts":0,"resource":1,"action":"retrieved","detail":""}"#
        );
        assert_eq!(decode_logs(&bytes).unwrap(), vec![a.clone(), b]);
        assert_eq!(a.entries()[1].detail_field("rule"), Some("domain"));
        assert_eq!(a.entries()[1].detail_field("ap"), None);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(matches!(decode_logs(b"{\"ts\":1}\n"), Err(LogError::Malformed { line: 1, .. })));
    }
}
