//! Simulated time, kept as an integer count of picoseconds so that clock
//! arithmetic and latency totals are exact.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PS_PER_S: f64 = 1e12;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    /// Rounds to the nearest picosecond. Negative or non-finite durations
    /// are rejected.
    pub fn from_secs(secs: f64) -> Result<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return Err(Error::invalid(format!(
                "duration must be finite and >= 0, got {secs}"
            )));
        }
        let ps = (secs * PS_PER_S).round();
        if ps > u64::MAX as f64 {
            return Err(Error::invalid(format!(
                "duration {secs} s overflows the clock"
            )));
        }
        Ok(SimTime(ps as u64))
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / PS_PER_S
    }

    pub fn checked_sub(self, earlier: SimTime) -> Option<SimTime> {
        self.0.checked_sub(earlier.0).map(SimTime)
    }

    pub fn saturating_mul(self, n: u64) -> SimTime {
        SimTime(self.0.saturating_mul(n))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("simulated clock overflow"))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} s", self.as_secs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_common_durations() {
        assert_eq!(SimTime::from_secs(6e-9).unwrap().as_ps(), 6_000);
        assert_eq!(SimTime::from_secs(20e-9).unwrap().as_ps(), 20_000);
        assert_eq!(
            SimTime::from_secs(1000.0).unwrap().as_ps(),
            1_000_000_000_000_000
        );
        assert_eq!(
            SimTime::from_secs(999.99).unwrap().as_ps(),
            999_990_000_000_000
        );
        assert_eq!(SimTime::from_secs(1000.0).unwrap().as_secs(), 1000.0);
    }

    #[test]
    fn rejects_negative() {
        assert!(SimTime::from_secs(-1e-12).is_err());
        assert!(SimTime::from_secs(f64::NAN).is_err());
    }
}
