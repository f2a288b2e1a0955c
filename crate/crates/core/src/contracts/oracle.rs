//! PullInOracle: on-chain half of the pull-in oracle. Opens monitoring
//! sessions on behalf of DTobligations contracts and aggregates the usage-log
//! evidence consumer nodes send back through `_callback`.

use std::collections::BTreeMap;

use super::records::{MonitoringSession, SessionState};
use crate::identity::PublicKey;
use crate::ledger::{Address, Revert};

pub const DEFAULT_SESSION_DEADLINE: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PullInOracle {
    sessions: BTreeMap<u64, MonitoringSession>,
    session_counter: u64,
    pub(super) default_deadline: u64,
}

impl PullInOracle {
    pub(super) fn new(default_deadline: u64) -> Self {
        Self { sessions: BTreeMap::new(), session_counter: 0, default_deadline }
    }

    pub fn session(&self, id: u64) -> Option<&MonitoringSession> {
        self.sessions.get(&id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &MonitoringSession> {
        self.sessions.values()
    }

    pub(super) fn initialize_monitoring(
        &mut self,
        initiator: Address,
        resource_ids: Vec<u64>,
        expected_responders: Vec<PublicKey>,
        opened_at: u64,
        deadline: Option<u64>,
    ) -> &MonitoringSession {
        self.session_counter += 1;
        let mut responders = Vec::with_capacity(expected_responders.len());
        for key in expected_responders {
            if !responders.contains(&key) {
                responders.push(key);
            }
        }
        let state = if responders.is_empty() { SessionState::Complete } else { SessionState::Open };
        let session = MonitoringSession {
            session_id: self.session_counter,
            resource_ids,
            initiator,
            expected_responders: responders,
            responses: BTreeMap::new(),
            state,
            opened_at,
            deadline: deadline.unwrap_or(self.default_deadline),
        };
        self.sessions.entry(session.session_id).or_insert(session)
    }

    pub(super) fn callback(
        &mut self,
        responder: PublicKey,
        session_id: u64,
        evidence: String,
        block_index: u64,
    ) -> Result<SessionState, Revert> {
        let session = self.sessions.get_mut(&session_id).ok_or_else(|| Revert::new("UnknownSession"))?;
        if session.state_at(block_index) != SessionState::Open {
            return Err(Revert::new("SessionClosed"));
        }
        if !session.expected_responders.contains(&responder) {
            return Err(Revert::new("UnexpectedResponder"));
        }
        if session.responses.contains_key(&responder) {
            return Err(Revert::new("DuplicateResponse"));
        }
        session.responses.insert(responder, evidence);
        if session.responses.len() == session.expected_responders.len() {
            session.state = SessionState::Complete;
        }
        Ok(session.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::NodeIdentity;

    fn key(s: &str) -> PublicKey {
        NodeIdentity::from_seed(s.as_bytes()).public_key()
    }

    #[test]
    fn three_responders_complete() {
        let mut o = PullInOracle::new(DEFAULT_SESSION_DEADLINE);
        let keys = [key("a"), key("b"), key("c")];
        let id = o.initialize_monitoring(Address::derive(0), vec![1], keys.to_vec(), 5, None).session_id;
        for (i, k) in keys.iter().enumerate() {
            let state = o.callback(*k, id, format!("log{i}"), 6).unwrap();
            let expected = if i == 2 { SessionState::Complete } else { SessionState::Open };
            assert_eq!(state, expected);
        }
        assert_eq!(o.session(id).unwrap().responses.len(), 3);
        assert_eq!(o.callback(keys[0], id, "late".into(), 7), Err(Revert::new("SessionClosed")));
    }

    #[test]
    fn empty_session_is_complete_at_once() {
        let mut o = PullInOracle::new(DEFAULT_SESSION_DEADLINE);
        let s = o.initialize_monitoring(Address::derive(0), vec![1], vec![], 0, None);
        assert_eq!(s.state, SessionState::Complete);
        assert!(s.responses.is_empty());
    }

    #[test]
    fn duplicate_keeps_first_evidence() {
        let mut o = PullInOracle::new(DEFAULT_SESSION_DEADLINE);
        let id = o.initialize_monitoring(Address::derive(0), vec![1], vec![key("a"), key("b")], 0, None).session_id;
        o.callback(key("a"), id, "first".into(), 1).unwrap();
        assert_eq!(o.callback(key("a"), id, "second".into(), 1), Err(Revert::new("DuplicateResponse")));
        assert_eq!(o.session(id).unwrap().responses[&key("a")], "first");
    }

    #[test]
    fn rejects_strangers_unknown_sessions_and_late_answers() {
        let mut o = PullInOracle::new(3);
        let id = o.initialize_monitoring(Address::derive(0), vec![1], vec![key("a")], 10, None).session_id;
        assert_eq!(o.callback(key("z"), id, String::new(), 11), Err(Revert::new("UnexpectedResponder")));
        assert_eq!(o.callback(key("a"), 99, String::new(), 11), Err(Revert::new("UnknownSession")));
        assert_eq!(o.session(id).unwrap().state_at(13), SessionState::Open);
        assert_eq!(o.session(id).unwrap().state_at(14), SessionState::TimedOut);
        assert_eq!(o.callback(key("a"), id, String::new(), 14), Err(Revert::new("SessionClosed")));
    }

    #[test]
    fn distinct_session_ids() {
        let mut o = PullInOracle::new(DEFAULT_SESSION_DEADLINE);
        let a = o.initialize_monitoring(Address::derive(0), vec![1], vec![key("a")], 0, None).session_id;
        let b = o.initialize_monitoring(Address::derive(0), vec![1], vec![key("a")], 0, None).session_id;
        assert_eq!((a, b), (1, 2));
    }
}
