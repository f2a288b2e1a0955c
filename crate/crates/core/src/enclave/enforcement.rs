//! Pure enforcement decisions. An absent rule always passes.

use super::sealing::Remaining;
use crate::policy::{CountryCode, DomainCode, UsagePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterDecision {
    /// Grant; carries the new remaining count.
    Pass(Remaining),
    /// Grant the final access, then delete the object.
    PassAndDelete,
    Fail,
}

/// `location` is `None` when the location ocall failed; a geographical rule
/// then fails closed.
pub fn enforce_geographical(policy: &UsagePolicy, location: Option<CountryCode>) -> Decision {
    match policy.geographical() {
        None => Decision::Pass,
        Some(region) => match location {
            Some(country) if region.contains(country) => Decision::Pass,
            _ => Decision::Fail,
        },
    }
}

pub fn enforce_domain(policy: &UsagePolicy, app_domain: DomainCode) -> Decision {
    match policy.domain() {
        Some(required) if required != app_domain => Decision::Fail,
        _ => Decision::Pass,
    }
}

pub fn enforce_access_counter(remaining: Remaining) -> CounterDecision {
    match remaining {
        Remaining::Unlimited => CounterDecision::Pass(Remaining::Unlimited),
        Remaining::Limited(0) => CounterDecision::Fail,
        Remaining::Limited(1) => CounterDecision::PassAndDelete,
        Remaining::Limited(n) => CounterDecision::Pass(Remaining::Limited(n - 1)),
    }
}

/// Whether an object retrieved at `retrieved_at` has outlived its temporal rule at `now`.
pub fn retention_expired(policy: &UsagePolicy, retrieved_at: u64, now: u64) -> bool {
    policy.temporal().is_some_and(|max| now.saturating_sub(retrieved_at) > max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{scenario_policy, RegionCode, UsageRule};

    #[test]
    fn geographical_examples() {
        let p = scenario_policy();
        assert_eq!(enforce_geographical(&p, Some(CountryCode::IRELAND)), Decision::Pass);
        assert_eq!(enforce_geographical(&p, Some(CountryCode::UNITED_STATES)), Decision::Fail);
        assert_eq!(enforce_geographical(&p, None), Decision::Fail);
        assert_eq!(enforce_geographical(&UsagePolicy::empty(), None), Decision::Pass);
        let us_only = UsagePolicy::empty().with(UsageRule::Geographical(RegionCode::NORTHERN_AMERICA)).unwrap();
        assert_eq!(enforce_geographical(&us_only, Some(CountryCode::UNITED_STATES)), Decision::Pass);
    }

    #[test]
    fn domain_examples() {
        let p = scenario_policy();
        assert_eq!(enforce_domain(&p, DomainCode::Research), Decision::Pass);
        assert_eq!(enforce_domain(&p, DomainCode::Social), Decision::Fail);
        assert_eq!(enforce_domain(&UsagePolicy::empty(), DomainCode::Financial), Decision::Pass);
    }

    #[test]
    fn counter_examples() {
        assert_eq!(enforce_access_counter(Remaining::Limited(100)), CounterDecision::Pass(Remaining::Limited(99)));
        assert_eq!(enforce_access_counter(Remaining::Limited(1)), CounterDecision::PassAndDelete);
        assert_eq!(enforce_access_counter(Remaining::Unlimited), CounterDecision::Pass(Remaining::Unlimited));
        assert_eq!(enforce_access_counter(Remaining::Limited(0)), CounterDecision::Fail);
    }

    #[test]
    fn retention_is_strict() {
        let p = scenario_policy();
        let max = 20 * 86_400;
        assert!(!retention_expired(&p, 100, 100 + max));
        assert!(retention_expired(&p, 100, 100 + max + 1));
        assert!(!retention_expired(&UsagePolicy::empty(), 0, u64::MAX));
    }
}
