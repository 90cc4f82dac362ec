use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TransportError;
use crate::units::{parse_scaled, Micros};

/// Clock frequency held in integer kHz (MHz with three decimals).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClockRate {
    khz: u64,
}

impl ClockRate {
    pub fn from_khz(khz: u64) -> Result<Self, TransportError> {
        if khz == 0 {
            return Err(TransportError::InvalidModel(
                "clock must be positive".into(),
            ));
        }
        Ok(ClockRate { khz })
    }

    pub fn from_mhz(mhz: u64) -> Result<Self, TransportError> {
        Self::from_khz(mhz * 1000)
    }

    pub fn khz(self) -> u64 {
        self.khz
    }

    /// Nearest whole cycle, halves rounded up.
    pub fn cycles_from_ps(self, ps: u64) -> u64 {
        let num = u128::from(ps) * u128::from(self.khz);
        ((num + 500_000_000) / 1_000_000_000) as u64
    }

    /// Nearest whole nanosecond, halves rounded up.
    pub fn ns_from_cycles(self, cycles: u64) -> u64 {
        let num = u128::from(cycles) * 1_000_000;
        let khz = u128::from(self.khz);
        ((2 * num + khz) / (2 * khz)) as u64
    }
}

impl FromStr for ClockRate {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let khz = parse_scaled(s, 3).map_err(|e| TransportError::InvalidModel(e.to_string()))?;
        Self::from_khz(khz)
    }
}

impl fmt::Display for ClockRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.khz.is_multiple_of(1000) {
            write!(f, "{}", self.khz / 1000)
        } else {
            let frac = format!("{:03}", self.khz % 1000);
            write!(f, "{}.{}", self.khz / 1000, frac.trim_end_matches('0'))
        }
    }
}

impl Serialize for ClockRate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockRate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string(),
            Raw::Float(f) => f.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Pipeline stages in datapath order, bottom up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    UdpIp,
    Rtps,
    Ros2,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::UdpIp, Stage::Rtps, Stage::Ros2];

    pub fn label(self) -> &'static str {
        match self {
            Stage::UdpIp => "udpip",
            Stage::Rtps => "rtps",
            Stage::Ros2 => "ros2",
        }
    }
}

/// Fixed per-stage latencies of one direction through the datapath, plus
/// the clock the stages run at.
///
/// Latencies are kept in picoseconds so that halving a round-trip table row
/// stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLatencyModel {
    one_way_ps: [u64; 3],
    clock: ClockRate,
}

impl StageLatencyModel {
    /// From per-direction latencies, in `udpip, rtps, ros2` order.
    pub fn per_direction(stages: [Micros; 3], clock: ClockRate) -> Self {
        StageLatencyModel {
            one_way_ps: stages.map(|m| m.as_ns() * 1000),
            clock,
        }
    }

    /// From round-trip stage rows (`udpip, rtps, ros2`), assuming both
    /// directions are symmetric: each stage costs half its row per direction.
    pub fn from_round_trip(rows: [Micros; 3], clock: ClockRate) -> Self {
        StageLatencyModel {
            one_way_ps: rows.map(|m| m.as_ns() * 500),
            clock,
        }
    }

    pub fn zero(clock: ClockRate) -> Self {
        StageLatencyModel {
            one_way_ps: [0; 3],
            clock,
        }
    }

    pub fn clock(&self) -> ClockRate {
        self.clock
    }

    fn index(stage: Stage) -> usize {
        match stage {
            Stage::UdpIp => 0,
            Stage::Rtps => 1,
            Stage::Ros2 => 2,
        }
    }

    pub fn stage_ps(&self, stage: Stage) -> u64 {
        self.one_way_ps[Self::index(stage)]
    }

    pub fn stage_cycles(&self, stage: Stage) -> u64 {
        self.clock.cycles_from_ps(self.stage_ps(stage))
    }

    /// Sum of the independently rounded stage cycle counts.
    pub fn one_way_cycles(&self) -> u64 {
        Stage::ALL.iter().map(|s| self.stage_cycles(*s)).sum()
    }

    pub fn one_way_ns(&self) -> u64 {
        self.clock.ns_from_cycles(self.one_way_cycles())
    }

    pub fn round_trip_ns(&self) -> u64 {
        2 * self.one_way_ns()
    }
}
