//! Text encoding of a policy object.
//!
//! ```json
//! {"temporal":1728000,"accessCounter":100,"domain":1,"country":150}
//! ```
//!
//! Keys are optional and always written in this order so that encodings are
//! byte-comparable.

use serde::{Deserialize, Serialize};

use super::{DomainCode, PolicyError, RegionCode, RuleType, UsagePolicy, UsageRule};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub(super) struct RawPolicy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    temporal: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    access_counter: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    country: Option<u64>,
}

impl TryFrom<RawPolicy> for UsagePolicy {
    type Error = PolicyError;

    fn try_from(raw: RawPolicy) -> Result<Self, Self::Error> {
        let mut policy = UsagePolicy::empty();
        let fields = [
            (RuleType::Temporal, raw.temporal),
            (RuleType::AccessCounter, raw.access_counter),
            (RuleType::Domain, raw.domain),
            (RuleType::Geographical, raw.country),
        ];
        for (rule_type, value) in fields {
            if let Some(v) = value {
                policy.set(UsageRule::from_parameter(rule_type, v)?)?;
            }
        }
        Ok(policy)
    }
}

impl From<UsagePolicy> for RawPolicy {
    fn from(p: UsagePolicy) -> Self {
        RawPolicy {
            temporal: p.temporal,
            access_counter: p.access_counter,
            domain: p.domain.map(|d: DomainCode| d.code().into()),
            country: p.geographical.map(|r: RegionCode| r.0.into()),
        }
    }
}

impl Serialize for UsagePolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawPolicy::from(*self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UsagePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawPolicy::deserialize(deserializer)?;
        UsagePolicy::try_from(raw).map_err(serde::de::Error::custom)
    }
}

pub fn serialize_policy(policy: &UsagePolicy) -> Vec<u8> {
    serde_json::to_vec(&RawPolicy::from(*policy)).expect("policy encoding is infallible")
}

pub fn parse_policy(bytes: &[u8]) -> Result<UsagePolicy, PolicyError> {
    let raw: RawPolicy = serde_json::from_slice(bytes)
        .map_err(|e| PolicyError::MalformedMetafile { offset: byte_offset(bytes, e.line(), e.column()), message: e.to_string() })?;
    UsagePolicy::try_from(raw)
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start: usize = bytes.split_inclusive(|b| *b == b'\n').take(line.saturating_sub(1)).map(<[u8]>::len).sum();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::scenario_policy;
    use proptest::prelude::*;

    #[test]
    fn scenario_encoding_is_fixed() {
        let bytes = serialize_policy(&scenario_policy());
        assert_eq!(std::str::from_utf8(&bytes).unwrap(), r#"{"temporal":1728000,"accessCounter":100,"domain":1,"country":150}"#);
        assert_eq!(parse_policy(&bytes).unwrap(), scenario_policy());
    }

    #[test]
    fn empty_policy_round_trips() {
        let bytes = serialize_policy(&UsagePolicy::empty());
        assert_eq!(bytes, b"{}");
        assert_eq!(parse_policy(&bytes).unwrap(), UsagePolicy::empty());
    }

    #[test]
    fn malformed_reports_offset() {
        match parse_policy(b"{\"temporal\": 10,\n \"accessCounter\": x}") {
            Err(PolicyError::MalformedMetafile { offset, .. }) => assert_eq!(offset, 35),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_policy(b"{\"colour\":1}"), Err(PolicyError::MalformedMetafile { .. })));
        assert!(matches!(parse_policy(b"{\"temporal\":-5}"), Err(PolicyError::MalformedMetafile { .. })));
    }

    #[test]
    fn semantic_errors_surface_at_parse() {
        assert_eq!(parse_policy(br#"{"temporal":0}"#), Err(PolicyError::NonPositiveDuration));
        assert_eq!(parse_policy(br#"{"accessCounter":0}"#), Err(PolicyError::ZeroAccessCount));
        assert_eq!(parse_policy(br#"{"domain":42}"#), Err(PolicyError::UnknownDomainCode(42)));
        assert_eq!(parse_policy(br#"{"country":4}"#), Err(PolicyError::UnknownRegionCode(4)));
    }

    pub(crate) fn arb_policy() -> impl Strategy<Value = UsagePolicy> {
        let regions = prop::sample::select(vec![150u16, 21, 372, 840, 276, 392]);
        (
            prop::option::of(1u64..=u64::from(u32::MAX)),
            prop::option::of(1u64..1_000_000),
            prop::option::of(prop::sample::select(DomainCode::ALL.to_vec())),
            prop::option::of(regions),
        )
            .prop_map(|(t, c, d, g)| {
                let mut p = UsagePolicy::empty();
                if let Some(t) = t {
                    p.set(UsageRule::Temporal { max_retention: t }).unwrap();
                }
                if let Some(c) = c {
                    p.set(UsageRule::AccessCounter { max_accesses: c }).unwrap();
                }
                if let Some(d) = d {
                    p.set(UsageRule::Domain(d)).unwrap();
                }
                if let Some(g) = g {
                    p.set(UsageRule::Geographical(RegionCode(g))).unwrap();
                }
                p
            })
    }

    // Independent copy of the territory registry: two regions plus every listed country.
    const KNOWN_TERRITORIES: &[u64] = &[
        150, 21, 40, 56, 100, 191, 196, 203, 208, 233, 246, 250, 276, 300, 348, 372, 380, 428, 440, 442, 470, 528, 616, 620, 642, 703, 705,
        724, 752, 352, 438, 578, 756, 826, 124, 840, 36, 76, 356, 392,
    ];

    proptest! {
        #[test]
        fn round_trip(p in arb_policy()) {
            prop_assert_eq!(parse_policy(&serialize_policy(&p)).unwrap(), p);
        }

        #[test]
        fn validate_matches_bounds(kind in 0usize..4, value in 0u64..2000) {
            let rule_type = RuleType::ALL[kind];
            let expected_ok = match rule_type {
                RuleType::Temporal | RuleType::AccessCounter => value >= 1,
                RuleType::Domain => (1..=3).contains(&value),
                RuleType::Geographical => KNOWN_TERRITORIES.contains(&value),
            };
            prop_assert_eq!(UsageRule::from_parameter(rule_type, value).is_ok(), expected_ok);
        }
    }
}
