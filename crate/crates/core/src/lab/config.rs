use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabError;
use crate::transport::{ClockRate, Locator, StageLatencyModel};
use crate::units::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    #[default]
    Udp,
    Virtual,
}

impl std::str::FromStr for TransportKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "udp" => Ok(TransportKind::Udp),
            "virtual" => Ok(TransportKind::Virtual),
            other => Err(LabError::InvalidConfig(format!(
                "unknown transport {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for TransportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransportKind::Udp => "udp",
            TransportKind::Virtual => "virtual",
        })
    }
}

/// Benchmark settings. Loadable from a TOML file where every key is
/// optional:
///
/// ```toml
/// sample_count = 1000000
/// warmup_count = 10000
/// payload_padding = 0
/// transport = "udp"            # or "virtual"
/// stages = ["0.7", "2.3", "2"] # round-trip µs per layer: udpip, rtps, ros2
/// clock_mhz = "156"
/// histogram_bucket_ns = 100
/// timeout_ms = 1000
/// max_consecutive_timeouts = 100
/// bind = "127.0.0.1:7411"     # initiator socket
/// peer = "127.0.0.1:7410"     # echo socket
/// host_id = 1
/// seed = 0
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sample_count: u64,
    pub warmup_count: u64,
    pub payload_padding: usize,
    pub transport: TransportKind,
    /// Round-trip latency per layer in `udpip, rtps, ros2` order; the
    /// virtual pipeline charges half of each per direction.
    pub stages: [Micros; 3],
    pub clock_mhz: ClockRate,
    pub histogram_bucket_ns: u64,
    pub timeout_ms: u64,
    pub max_consecutive_timeouts: u32,
    pub bind: Locator,
    pub peer: Locator,
    pub host_id: u32,
    /// Initial virtual time for the virtual transport.
    pub seed: u64,
}

pub const DEFAULT_ECHO_PORT: u16 = 7410;
pub const DEFAULT_PING_PORT: u16 = 7411;

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sample_count: 1_000_000,
            warmup_count: 10_000,
            payload_padding: 0,
            transport: TransportKind::Udp,
            stages: [
                Micros::from_ns(700),
                Micros::from_ns(2300),
                Micros::from_ns(2000),
            ],
            clock_mhz: ClockRate::from_mhz(156).expect("nonzero"),
            histogram_bucket_ns: 100,
            timeout_ms: 1000,
            max_consecutive_timeouts: 100,
            bind: Locator::udpv4([127, 0, 0, 1], DEFAULT_PING_PORT),
            peer: Locator::udpv4([127, 0, 0, 1], DEFAULT_ECHO_PORT),
            host_id: 1,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let c: BenchConfig =
            toml::from_str(text).map_err(|e| LabError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.sample_count == 0 {
            return Err(LabError::InvalidConfig(
                "sample_count must be at least 1".into(),
            ));
        }
        if self.histogram_bucket_ns == 0 {
            return Err(LabError::InvalidConfig(
                "histogram_bucket_ns must be positive".into(),
            ));
        }
        if self.max_consecutive_timeouts == 0 {
            return Err(LabError::InvalidConfig(
                "max_consecutive_timeouts must be positive".into(),
            ));
        }
        if crate::cdr::PingPayload::serialized_len(self.payload_padding) > 60_000 {
            return Err(LabError::InvalidConfig("payload_padding too large".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> StageLatencyModel {
        StageLatencyModel::from_round_trip(self.stages, self.clock_mhz)
    }

    pub fn timeout(&self) -> std::time::Duration {
        std::time::Duration::from_millis(self.timeout_ms)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = BenchConfig::default();
        assert_eq!(c.sample_count, 1_000_000);
        assert_eq!(c.warmup_count, 10_000);
        assert_eq!(c.histogram_bucket_ns, 100);
        assert_eq!(c.model().round_trip_ns(), 5000);
        assert_eq!(BenchConfig::parse("").unwrap(), c);
    }

    #[test]
    fn file_overrides() {
        let c = BenchConfig::parse(
            r#"
            sample_count = 10
            transport = "virtual"
            stages = ["0", "0", 1]
            clock_mhz = 100
            peer = "10.1.2.3:9000"
            "#,
        )
        .unwrap();
        assert_eq!(c.sample_count, 10);
        assert_eq!(c.transport, TransportKind::Virtual);
        assert_eq!(c.stages[2], Micros::from_whole(1));
        assert_eq!(c.peer, Locator::udpv4([10, 1, 2, 3], 9000));
        assert_eq!(BenchConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(BenchConfig::parse("sample_count = 0").is_err());
        assert!(BenchConfig::parse("transport = \"tcp\"").is_err());
        assert!(BenchConfig::parse("clock_mhz = 0").is_err());
        assert!(BenchConfig::parse("stages = [\"-1\", \"0\", \"0\"]").is_err());
        assert!(BenchConfig::parse("nonsense = 1").is_err());
    }
}
