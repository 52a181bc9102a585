//! Energy accounting over simulation results: rate-dependent NIC power, a
//! fixed device baseline, and sleep outside the busy window. Evaluates the
//! fast-transfer-then-sleep tradeoff.
//!
//! Everything here is pure post-processing over an immutable event log /
//! busy-interval map; one run can feed many profiles.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::simcore::{NodeId, SimTime};

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum PowerError {
    ZeroRate,
    /// The transfer (or busy period) does not fit in the observation window.
    DoesNotFit,
    /// compare_rates requires rate_low < rate_high.
    BadRates,
    MissingProfile(NodeId),
    InvalidProfile(&'static str),
}

impl fmt::Display for PowerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerError::ZeroRate => write!(f, "rate must be positive"),
            PowerError::DoesNotFit => write!(f, "activity exceeds the observation window"),
            PowerError::BadRates => write!(f, "rate_low must be less than rate_high"),
            PowerError::MissingProfile(n) => write!(f, "no power profile for node {}", n.0),
            PowerError::InvalidProfile(why) => write!(f, "invalid power profile: {why}"),
        }
    }
}

/// Device power model: fixed baseline plus a NIC step ladder over link
/// rates, a sleep wattage, and the observation window energy is accounted
/// over.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    pub p_fixed_w: f64,
    pub p_sleep_w: f64,
    /// (rate bits/s, watts) steps, ascending in rate, non-decreasing in
    /// watts. A requested rate maps to the first step at or above it.
    pub nic_ladder: Vec<(u64, f64)>,
    pub observation_window: SimTime,
}

impl PowerProfile {
    pub fn validate(&self) -> Result<(), PowerError> {
        if !(self.p_fixed_w >= 0.0) || !(self.p_sleep_w >= 0.0) {
            return Err(PowerError::InvalidProfile("negative wattage"));
        }
        let mut prev: Option<(u64, f64)> = None;
        for &(rate, watts) in &self.nic_ladder {
            if rate == 0 {
                return Err(PowerError::InvalidProfile("zero-rate ladder step"));
            }
            if !(watts >= 0.0) {
                return Err(PowerError::InvalidProfile("negative wattage"));
            }
            if let Some((pr, pw)) = prev {
                if rate <= pr {
                    return Err(PowerError::InvalidProfile("ladder rates not ascending"));
                }
                if watts < pw {
                    return Err(PowerError::InvalidProfile(
                        "nic power must be non-decreasing in rate",
                    ));
                }
            }
            prev = Some((rate, watts));
        }
        let min_nic = self.nic_ladder.first().map_or(0.0, |&(_, w)| w);
        if self.p_sleep_w > self.p_fixed_w + min_nic {
            return Err(PowerError::InvalidProfile(
                "sleep power exceeds minimum active power",
            ));
        }
        Ok(())
    }

    /// NIC wattage for a link rate: first ladder step at or above the rate,
    /// or the top step when the rate exceeds the ladder.
    pub fn p_nic_w(&self, rate_bits_per_s: u64) -> f64 {
        for &(step_rate, watts) in &self.nic_ladder {
            if rate_bits_per_s <= step_rate {
                return watts;
            }
        }
        self.nic_ladder.last().map_or(0.0, |&(_, w)| w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub transfer_time_s: f64,
    pub active_energy_j: f64,
    pub sleep_energy_j: f64,
    pub total_j: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RateWinner {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateComparison {
    pub low: EnergyReport,
    pub high: EnergyReport,
    pub t_low_s: f64,
    pub p_low_w: f64,
    pub t_high_s: f64,
    pub p_high_w: f64,
    pub winner: RateWinner,
    /// E_high / E_low.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FleetEnergyReport {
    pub per_node: Vec<(NodeId, EnergyReport)>,
    pub total_j: f64,
}

/// Transfer duration at `rate`, rounded up to whole microseconds — the same
/// rounding the simulator's serialization uses.
fn transfer_micros(bytes: u64, rate_bits_per_s: u64) -> u128 {
    (bytes as u128 * 8 * 1_000_000).div_ceil(rate_bits_per_s as u128)
}

fn report(active_micros: u64, active_power_w: f64, profile: &PowerProfile) -> EnergyReport {
    let t_s = active_micros as f64 / 1e6;
    let sleep_s = (profile.observation_window.as_micros() - active_micros) as f64 / 1e6;
    let active_energy_j = t_s * active_power_w;
    let sleep_energy_j = sleep_s * profile.p_sleep_w;
    EnergyReport {
        transfer_time_s: t_s,
        active_energy_j,
        sleep_energy_j,
        total_j: active_energy_j + sleep_energy_j,
    }
}

/// Energy to move `bytes` at `rate`, then sleep for the rest of the
/// observation window.
pub fn energy_for_transfer(
    bytes: u64,
    rate_bits_per_s: u64,
    profile: &PowerProfile,
) -> Result<EnergyReport, PowerError> {
    if rate_bits_per_s == 0 {
        return Err(PowerError::ZeroRate);
    }
    profile.validate()?;
    let t = transfer_micros(bytes, rate_bits_per_s);
    if t > profile.observation_window.as_micros() as u128 {
        return Err(PowerError::DoesNotFit);
    }
    let p = profile.p_fixed_w + profile.p_nic_w(rate_bits_per_s);
    Ok(report(t as u64, p, profile))
}

/// Same transfer at two rates: slower-but-cheaper versus faster-then-sleep.
/// Ties go to the high rate (extra sleep headroom).
pub fn compare_rates(
    bytes: u64,
    rate_low: u64,
    rate_high: u64,
    profile: &PowerProfile,
) -> Result<RateComparison, PowerError> {
    if rate_low >= rate_high {
        return Err(PowerError::BadRates);
    }
    let low = energy_for_transfer(bytes, rate_low, profile)?;
    let high = energy_for_transfer(bytes, rate_high, profile)?;
    let winner = if low.total_j < high.total_j {
        RateWinner::Low
    } else {
        RateWinner::High
    };
    Ok(RateComparison {
        low,
        high,
        t_low_s: low.transfer_time_s,
        p_low_w: profile.p_fixed_w + profile.p_nic_w(rate_low),
        t_high_s: high.transfer_time_s,
        p_high_w: profile.p_fixed_w + profile.p_nic_w(rate_high),
        winner,
        ratio: high.total_j / low.total_j,
    })
}

/// Fleet energy: each device is active (baseline + NIC at its link rate)
/// during its busy intervals and asleep otherwise. Intervals beyond the
/// observation window are clipped.
pub fn energy_for_scenario(
    busy: &BTreeMap<NodeId, Vec<(SimTime, SimTime)>>,
    rates: &BTreeMap<NodeId, u64>,
    profiles: &BTreeMap<NodeId, PowerProfile>,
) -> Result<FleetEnergyReport, PowerError> {
    let mut per_node = Vec::new();
    let mut total_j = 0.0;
    for (&node, profile) in profiles {
        profile.validate()?;
        let window = profile.observation_window;
        let mut active_micros = 0u64;
        if let Some(intervals) = busy.get(&node) {
            for &(start, end) in intervals {
                let start = start.min(window);
                let end = end.min(window);
                active_micros += end.as_micros() - start.as_micros();
            }
        }
        let rate = rates.get(&node).copied().unwrap_or(0);
        let p = profile.p_fixed_w + profile.p_nic_w(rate);
        let rep = report(active_micros, p, profile);
        total_j += rep.total_j;
        per_node.push((node, rep));
    }
    for node in busy.keys() {
        if !profiles.contains_key(node) {
            return Err(PowerError::MissingProfile(*node));
        }
    }
    Ok(FleetEnergyReport { per_node, total_j })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(p_fixed: f64, p_sleep: f64, ladder: &[(u64, f64)], window_s: u64) -> PowerProfile {
        PowerProfile {
            p_fixed_w: p_fixed,
            p_sleep_w: p_sleep,
            nic_ladder: ladder.to_vec(),
            observation_window: SimTime::from_secs(window_s),
        }
    }

    #[test]
    fn zero_sleep_energy_is_linear_in_time() {
        let p = profile(3.0, 0.0, &[(1_000_000, 2.0)], 1000);
        let one = energy_for_transfer(1_250_000, 1_000_000, &p).unwrap();
        let two = energy_for_transfer(2_500_000, 1_000_000, &p).unwrap();
        assert_eq!(one.transfer_time_s, 10.0);
        assert_eq!(one.total_j, 10.0 * 5.0);
        assert_eq!(two.total_j, 2.0 * one.total_j);
    }

    #[test]
    fn slow_cheap_versus_fast_expensive() {
        // T_l = 100 s at 10 W vs T_h = 20 s at 30 W, 100 s window, 1 W sleep.
        let p = profile(0.0, 1.0, &[(1_000_000, 10.0), (5_000_000, 30.0)], 100);
        let cmp = compare_rates(12_500_000, 1_000_000, 5_000_000, &p).unwrap();
        assert_eq!(cmp.t_low_s, 100.0);
        assert_eq!(cmp.t_high_s, 20.0);
        assert_eq!(cmp.low.total_j, 1000.0);
        assert_eq!(cmp.high.total_j, 600.0 + 80.0);
        assert_eq!(cmp.winner, RateWinner::High);
        assert_eq!(cmp.ratio, 680.0 / 1000.0);
    }

    #[test]
    fn window_equal_to_transfer_leaves_no_sleep() {
        let p = profile(2.0, 1.0, &[(1_000_000, 1.0)], 10);
        let rep = energy_for_transfer(1_250_000, 1_000_000, &p).unwrap();
        assert_eq!(rep.transfer_time_s, 10.0);
        assert_eq!(rep.sleep_energy_j, 0.0);
        assert_eq!(rep.total_j, rep.active_energy_j);
    }

    #[test]
    fn transfer_must_fit_in_window() {
        let p = profile(2.0, 1.0, &[(1_000_000, 1.0)], 9);
        assert_eq!(
            energy_for_transfer(1_250_000, 1_000_000, &p),
            Err(PowerError::DoesNotFit)
        );
    }

    #[test]
    fn equal_power_means_fast_always_wins() {
        let p = profile(5.0, 0.0, &[(1_000_000, 4.0), (10_000_000, 4.0)], 1000);
        let cmp = compare_rates(1_250_000, 1_000_000, 10_000_000, &p).unwrap();
        assert_eq!(cmp.winner, RateWinner::High);
        assert!(cmp.ratio < 1.0);
    }

    #[test]
    fn exact_breakeven_ties_toward_high_rate() {
        // P_h/P_l = 10 = T_l/T_h with zero sleep power: equal active energy.
        let p = profile(0.0, 0.0, &[(1_000_000, 3.0), (10_000_000, 30.0)], 1000);
        let cmp = compare_rates(1_250_000, 1_000_000, 10_000_000, &p).unwrap();
        assert_eq!(cmp.low.total_j, cmp.high.total_j);
        assert_eq!(cmp.winner, RateWinner::High);
    }

    #[test]
    fn ladder_must_be_non_decreasing() {
        let p = profile(5.0, 0.0, &[(1_000_000, 4.0), (10_000_000, 3.0)], 10);
        assert!(p.validate().is_err());
        let p = profile(5.0, 0.0, &[(10_000_000, 4.0), (1_000_000, 5.0)], 10);
        assert!(p.validate().is_err());
    }

    #[test]
    fn sleep_power_cannot_exceed_minimum_active_power() {
        let p = profile(1.0, 3.5, &[(1_000_000, 2.0)], 10);
        assert!(p.validate().is_err());
    }

    #[test]
    fn scenario_energy_requires_profiles_and_sleeps_idle_nodes() {
        let mut busy = BTreeMap::new();
        busy.insert(
            NodeId(0),
            alloc::vec![(SimTime::from_secs(1), SimTime::from_secs(3))],
        );
        let mut rates = BTreeMap::new();
        rates.insert(NodeId(0), 1_000_000);
        rates.insert(NodeId(1), 1_000_000);
        let mut profiles = BTreeMap::new();
        profiles.insert(NodeId(0), profile(2.0, 1.0, &[(1_000_000, 3.0)], 10));
        profiles.insert(NodeId(1), profile(2.0, 1.0, &[(1_000_000, 3.0)], 10));
        let fleet = energy_for_scenario(&busy, &rates, &profiles).unwrap();
        // node 0: 2 s active at 5 W + 8 s asleep at 1 W; node 1: 10 s asleep.
        assert_eq!(fleet.per_node[0].1.total_j, 2.0 * 5.0 + 8.0 * 1.0);
        assert_eq!(fleet.per_node[1].1.total_j, 10.0 * 1.0);
        assert_eq!(fleet.total_j, 18.0 + 10.0);

        busy.insert(NodeId(2), alloc::vec![]);
        assert_eq!(
            energy_for_scenario(&busy, &rates, &profiles),
            Err(PowerError::MissingProfile(NodeId(2)))
        );
    }
}
