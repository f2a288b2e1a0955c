//! Line-based scenario scripts.
//!
//! One step per line; `#` starts a comment. Resources are named
//! `<owner>:<path>`, sessions by number or `last`.
//!
//! ```text
//! fetch <consumer> <owner> <path>
//! open <consumer> <app> <owner>:<path>
//! advance <duration>                  # 90, 90s, 15m, 2h, 20d
//! sweep <node>
//! monitor <owner> <path> [deadline=<blocks>]
//! set-rule <owner> default|<path> <rule> <value>
//! remove-rule <owner> default|<path> <rule>
//! move <node> <country>|none
//! tick [<blocks>]
//! offline <node>
//! online <node>
//! repeat <n> <step>
//! expect last granted | last denied <reason> | last error <kind>
//! expect remaining <consumer> <owner>:<path> <n>|unlimited|absent
//! expect held <consumer> <owner>:<path> yes|no
//! expect count <consumer> <owner>:<path> <log action> <n>
//! expect session <id> open|complete|timed_out
//! expect responses <id> <n>
//! expect violations <id> <n>
//! expect non-responders <id> none|<node>[,<node>...]
//! ```
//!
//! Rule values: temporal takes a duration, domain a name or code, the
//! counter and geographical rules a number.

use std::collections::BTreeSet;
use std::fmt;

use super::config::NetworkConfig;
use super::SimError;
use crate::policy::{DomainCode, RuleType, UsageRule, SECONDS_PER_DAY};
use crate::usage_log::LogAction;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceName {
    pub owner: String,
    pub path: String,
}

impl fmt::Display for ResourceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.owner, self.path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionRef {
    Last,
    Id(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleTarget {
    Default,
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Granted,
    Denied(String),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assertion {
    Last(Expected),
    /// `None` means the object is not held.
    Remaining {
        consumer: String,
        resource: ResourceName,
        remaining: Option<String>,
    },
    Held {
        consumer: String,
        resource: ResourceName,
        held: bool,
    },
    Count {
        consumer: String,
        resource: ResourceName,
        action: LogAction,
        count: usize,
    },
    SessionState {
        session: SessionRef,
        state: String,
    },
    Responses {
        session: SessionRef,
        count: usize,
    },
    Violations {
        session: SessionRef,
        count: usize,
    },
    NonResponders {
        session: SessionRef,
        nodes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Fetch { consumer: String, owner: String, path: String },
    Open { consumer: String, app: String, resource: ResourceName },
    Advance { seconds: u64 },
    Sweep { node: String },
    Monitor { owner: String, path: String, deadline: Option<u64> },
    SetRule { owner: String, target: RuleTarget, rule: UsageRule },
    RemoveRule { owner: String, target: RuleTarget, rule_type: RuleType },
    Move { node: String, country: Option<u16> },
    Tick { blocks: u64 },
    Offline { node: String },
    Online { node: String },
    Repeat { times: u64, step: Box<Step> },
    Expect(Assertion),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub text: String,
    pub step: Step,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioScript {
    pub steps: Vec<ScriptLine>,
}

/// `90`, `90s`, `15m`, `2h`, `20d`.
pub fn parse_duration(s: &str) -> Option<u64> {
    let (digits, unit) = match s.find(|c: char| !c.is_ascii_digit()) {
        Some(i) => s.split_at(i),
        None => (s, "s"),
    };
    let n: u64 = digits.parse().ok()?;
    let scale = match unit {
        "s" => 1,
        "m" => 60,
        "h" => 3_600,
        "d" => SECONDS_PER_DAY,
        _ => return None,
    };
    n.checked_mul(scale)
}

fn parse_action(s: &str) -> Option<LogAction> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).ok()
}

fn parse_resource(s: &str) -> Result<ResourceName, String> {
    match s.split_once(':') {
        Some((owner, path)) if !owner.is_empty() && path.starts_with('/') => {
            Ok(ResourceName { owner: owner.to_owned(), path: path.to_owned() })
        }
        _ => Err(format!("expected <owner>:<path>, got {s:?}")),
    }
}

fn parse_session(s: &str) -> Result<SessionRef, String> {
    match s {
        "last" => Ok(SessionRef::Last),
        _ => s.parse().map(SessionRef::Id).map_err(|_| format!("bad session {s:?}")),
    }
}

fn number<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("expected a number, got {s:?}"))
}

fn parse_rule(rule: &str, value: &str) -> Result<UsageRule, String> {
    let rule_type = RuleType::parse(rule).ok_or_else(|| format!("unknown rule {rule:?}"))?;
    let parameter = match rule_type {
        RuleType::Temporal => parse_duration(value).ok_or_else(|| format!("bad duration {value:?}"))?,
        RuleType::Domain => match DomainCode::from_name(value) {
            Some(d) => u64::from(d.code()),
            None => number(value)?,
        },
        RuleType::AccessCounter | RuleType::Geographical => number(value)?,
    };
    UsageRule::from_parameter(rule_type, parameter).map_err(|e| e.to_string())
}

fn parse_target(s: &str) -> RuleTarget {
    if s == "default" {
        RuleTarget::Default
    } else {
        RuleTarget::Path(s.to_owned())
    }
}

fn arity(words: &[&str], n: usize) -> Result<(), String> {
    if words.len() == n {
        Ok(())
    } else {
        Err(format!("{} expects {} argument(s), got {}", words[0], n - 1, words.len() - 1))
    }
}

fn parse_expect(words: &[&str]) -> Result<Assertion, String> {
    let kind = words.get(1).copied().unwrap_or("");
    let w = &words[1..];
    Ok(match kind {
        "last" => Assertion::Last(match w.get(1).copied() {
            Some("granted") if w.len() == 2 => Expected::Granted,
            Some("denied") if w.len() == 3 => Expected::Denied(w[2].to_owned()),
            Some("error") if w.len() == 3 => Expected::Error(w[2].to_owned()),
            _ => return Err("expect last granted | denied <reason> | error <kind>".into()),
        }),
        "remaining" => {
            arity(w, 4)?;
            let remaining = match w[3] {
                "absent" => None,
                "unlimited" => Some("unlimited".to_owned()),
                n => Some(number::<u64>(n)?.to_string()),
            };
            Assertion::Remaining { consumer: w[1].to_owned(), resource: parse_resource(w[2])?, remaining }
        }
        "held" => {
            arity(w, 4)?;
            let held = match w[3] {
                "yes" => true,
                "no" => false,
                other => return Err(format!("expected yes or no, got {other:?}")),
            };
            Assertion::Held { consumer: w[1].to_owned(), resource: parse_resource(w[2])?, held }
        }
        "count" => {
            arity(w, 5)?;
            let action = parse_action(w[3]).ok_or_else(|| format!("unknown log action {:?}", w[3]))?;
            Assertion::Count { consumer: w[1].to_owned(), resource: parse_resource(w[2])?, action, count: number(w[4])? }
        }
        "session" => {
            arity(w, 3)?;
            if !["open", "complete", "timed_out"].contains(&w[2]) {
                return Err(format!("unknown session state {:?}", w[2]));
            }
            Assertion::SessionState { session: parse_session(w[1])?, state: w[2].to_owned() }
        }
        "responses" => {
            arity(w, 3)?;
            Assertion::Responses { session: parse_session(w[1])?, count: number(w[2])? }
        }
        "violations" => {
            arity(w, 3)?;
            Assertion::Violations { session: parse_session(w[1])?, count: number(w[2])? }
        }
        "non-responders" => {
            arity(w, 3)?;
            let nodes = match w[2] {
                "none" => Vec::new(),
                list => list.split(',').map(str::to_owned).collect(),
            };
            Assertion::NonResponders { session: parse_session(w[1])?, nodes }
        }
        other => return Err(format!("unknown assertion {other:?}")),
    })
}

fn parse_step(words: &[&str]) -> Result<Step, String> {
    let owned = |i: usize| words[i].to_owned();
    Ok(match words[0] {
        "fetch" => {
            arity(words, 4)?;
            Step::Fetch { consumer: owned(1), owner: owned(2), path: owned(3) }
        }
        "open" => {
            arity(words, 4)?;
            Step::Open { consumer: owned(1), app: owned(2), resource: parse_resource(words[3])? }
        }
        "advance" => {
            arity(words, 2)?;
            Step::Advance { seconds: parse_duration(words[1]).ok_or_else(|| format!("bad duration {:?}", words[1]))? }
        }
        "sweep" => {
            arity(words, 2)?;
            Step::Sweep { node: owned(1) }
        }
        "monitor" => {
            let deadline = match words.get(3) {
                None => None,
                Some(w) => Some(number(w.strip_prefix("deadline=").ok_or("expected deadline=<blocks>")?)?),
            };
            if words.len() > 4 || words.len() < 3 {
                return Err("monitor <owner> <path> [deadline=<blocks>]".into());
            }
            Step::Monitor { owner: owned(1), path: owned(2), deadline }
        }
        "set-rule" => {
            arity(words, 5)?;
            Step::SetRule { owner: owned(1), target: parse_target(words[2]), rule: parse_rule(words[3], words[4])? }
        }
        "remove-rule" => {
            arity(words, 4)?;
            let rule_type = RuleType::parse(words[3]).ok_or_else(|| format!("unknown rule {:?}", words[3]))?;
            Step::RemoveRule { owner: owned(1), target: parse_target(words[2]), rule_type }
        }
        "move" => {
            arity(words, 3)?;
            let country = match words[2] {
                "none" => None,
                c => Some(number(c)?),
            };
            Step::Move { node: owned(1), country }
        }
        "tick" => match words.len() {
            1 => Step::Tick { blocks: 1 },
            2 => Step::Tick { blocks: number(words[1])? },
            _ => return Err("tick [<blocks>]".into()),
        },
        "offline" => {
            arity(words, 2)?;
            Step::Offline { node: owned(1) }
        }
        "online" => {
            arity(words, 2)?;
            Step::Online { node: owned(1) }
        }
        "repeat" => {
            if words.len() < 3 {
                return Err("repeat <n> <step>".into());
            }
            let inner = parse_step(&words[2..])?;
            if matches!(inner, Step::Repeat { .. } | Step::Expect(_)) {
                return Err("repeat takes a plain step".into());
            }
            Step::Repeat { times: number(words[1])?, step: Box::new(inner) }
        }
        "expect" => Step::Expect(parse_expect(words)?),
        other => return Err(format!("unknown step {other:?}")),
    })
}

impl Step {
    fn nodes(&self) -> Vec<&str> {
        match self {
            Step::Fetch { consumer, owner, .. } => vec![consumer, owner],
            Step::Open { consumer, resource, .. } => vec![consumer, &resource.owner],
            Step::Sweep { node } | Step::Move { node, .. } | Step::Offline { node } | Step::Online { node } => vec![node],
            Step::Monitor { owner, .. } | Step::SetRule { owner, .. } | Step::RemoveRule { owner, .. } => vec![owner],
            Step::Repeat { step, .. } => step.nodes(),
            Step::Expect(a) => match a {
                Assertion::Remaining { consumer, resource, .. }
                | Assertion::Held { consumer, resource, .. }
                | Assertion::Count { consumer, resource, .. } => vec![consumer, &resource.owner],
                Assertion::NonResponders { nodes, .. } => nodes.iter().map(String::as_str).collect(),
                _ => vec![],
            },
            Step::Advance { .. } | Step::Tick { .. } => vec![],
        }
    }
}

impl ScenarioScript {
    /// Parses `text`, checking node names against `config` when given.
    pub fn parse(text: &str, config: Option<&NetworkConfig>) -> Result<Self, SimError> {
        let known: Option<BTreeSet<&str>> = config.map(|c| c.nodes.iter().map(|n| n.name.as_str()).collect());
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            let step = parse_step(&words).map_err(|message| SimError::Script { line, message })?;
            if let Some(known) = &known {
                if let Some(n) = step.nodes().into_iter().find(|n| !known.contains(n)) {
                    return Err(SimError::Script { line, message: format!("unknown node {n:?}") });
                }
            }
            steps.push(ScriptLine { line, text: content.to_owned(), step });
        }
        Ok(Self { steps })
    }
}
