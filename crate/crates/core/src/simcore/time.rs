use core::fmt;
use core::ops::{Add, AddAssign, Sub};

/// Simulated time as an integer count of microseconds.
///
/// Integer microseconds keep event ordering exact: every delay in the
/// configuration space (tens of milliseconds up to seconds) is representable
/// without float drift.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime {
    micros: u64,
}

impl SimTime {
    pub const ZERO: SimTime = SimTime { micros: 0 };
    pub const MAX: SimTime = SimTime { micros: u64::MAX };

    pub const fn from_micros(micros: u64) -> Self {
        SimTime { micros }
    }

    pub const fn from_millis(millis: u64) -> Self {
        SimTime {
            micros: millis * 1_000,
        }
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime {
            micros: secs * 1_000_000,
        }
    }

    pub const fn as_micros(self) -> u64 {
        self.micros
    }

    pub const fn as_millis(self) -> u64 {
        self.micros / 1_000
    }

    pub fn as_secs_f64(self) -> f64 {
        self.micros as f64 / 1e6
    }

    pub const fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime {
            micros: self.micros.saturating_sub(other.micros),
        }
    }

    pub const fn checked_sub(self, other: SimTime) -> Option<SimTime> {
        match self.micros.checked_sub(other.micros) {
            Some(m) => Some(SimTime { micros: m }),
            None => None,
        }
    }

    pub fn mul_u64(self, factor: u64) -> SimTime {
        SimTime {
            micros: self.micros * factor,
        }
    }

    pub fn div_u64(self, divisor: u64) -> SimTime {
        SimTime {
            micros: self.micros / divisor,
        }
    }

    pub fn max(self, other: SimTime) -> SimTime {
        if self.micros >= other.micros {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: SimTime) -> SimTime {
        if self.micros <= other.micros {
            self
        } else {
            other
        }
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime {
            micros: self.micros + rhs.micros,
        }
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.micros += rhs.micros;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime {
            micros: self.micros - rhs.micros,
        }
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.micros)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.micros / 1_000_000, self.micros % 1_000_000)
    }
}

/// Serialization time of `wire_bytes` on a link of `rate_bits_per_s`,
/// rounded up to the next microsecond.
pub fn serialization_time(wire_bytes: u64, rate_bits_per_s: u64) -> SimTime {
    let bits = wire_bytes * 8;
    let micros = (bits * 1_000_000).div_ceil(rate_bits_per_s);
    SimTime::from_micros(micros)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(SimTime::from_millis(250).as_micros(), 250_000);
        assert_eq!(SimTime::from_secs(3).as_millis(), 3_000);
        assert_eq!(SimTime::from_micros(1_500_000).as_secs_f64(), 1.5);
    }

    #[test]
    fn serialization_rounds_up() {
        // 1500 bytes at 100 Mbps = 120us exactly
        assert_eq!(
            serialization_time(1500, 100_000_000),
            SimTime::from_micros(120)
        );
        // 1 byte at 1 Gbps rounds up to 1us
        assert_eq!(serialization_time(1, 1_000_000_000), SimTime::from_micros(1));
    }

    #[test]
    fn saturating_and_checked_sub() {
        let a = SimTime::from_micros(5);
        let b = SimTime::from_micros(9);
        assert_eq!(a.saturating_sub(b), SimTime::ZERO);
        assert_eq!(b.checked_sub(a), Some(SimTime::from_micros(4)));
        assert_eq!(a.checked_sub(b), None);
    }
}
