//! Untrusted context providers the enclave reaches through ocalls.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::policy::CountryCode;

pub trait GeoLocationProvider: Send + Sync + fmt::Debug {
    /// `None` when the device cannot report its location.
    fn get_geo_location(&self) -> Option<CountryCode>;
}

pub trait TrustedTimeProvider: Send + Sync + fmt::Debug {
    /// Logical seconds since the simulation epoch.
    fn get_trusted_time(&self) -> Option<u64>;
}

/// Shared simulated clock. Clones observe the same time.
#[derive(Debug, Clone, Default)]
pub struct SimClock(Arc<AtomicU64>);

impl SimClock {
    pub fn starting_at(t: u64) -> Self {
        Self(Arc::new(AtomicU64::new(t)))
    }

    pub fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    pub fn advance(&self, seconds: u64) -> u64 {
        self.0.fetch_add(seconds, Ordering::SeqCst) + seconds
    }

    /// Moves the clock forward to `t`; never backwards.
    pub fn set(&self, t: u64) {
        self.0.fetch_max(t, Ordering::SeqCst);
    }
}

impl TrustedTimeProvider for SimClock {
    fn get_trusted_time(&self) -> Option<u64> {
        Some(self.now())
    }
}

/// Settable device location; `None` simulates a failing location service.
#[derive(Debug, Clone, Default)]
pub struct SimLocation(Arc<Mutex<Option<CountryCode>>>);

impl SimLocation {
    pub fn at(country: CountryCode) -> Self {
        Self(Arc::new(Mutex::new(Some(country))))
    }

    pub fn set(&self, country: Option<CountryCode>) {
        *self.0.lock().expect("location lock poisoned") = country;
    }

    pub fn current(&self) -> Option<CountryCode> {
        *self.0.lock().expect("location lock poisoned")
    }
}

impl GeoLocationProvider for SimLocation {
    fn get_geo_location(&self) -> Option<CountryCode> {
        self.current()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_is_shared_and_monotone() {
        let c = SimClock::starting_at(10);
        let view = c.clone();
        assert_eq!(c.advance(20 * 86_400), 10 + 1_728_000);
        assert_eq!(view.get_trusted_time(), Some(1_728_010));
        c.set(5);
        assert_eq!(view.now(), 1_728_010);
    }

    #[test]
    fn location_can_disappear() {
        let l = SimLocation::at(CountryCode::IRELAND);
        assert_eq!(l.get_geo_location(), Some(CountryCode(372)));
        l.set(None);
        assert_eq!(l.get_geo_location(), None);
    }
}
