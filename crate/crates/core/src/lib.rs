//! A software model of a ROS 2 publish/subscribe datapath, from CDR
//! payloads through RTPS messages to a UDP or simulated transport, plus a
//! ping-pong round-trip latency laboratory built on top of it.
//!
//! Layers, bottom up:
//!
//! - [`transport`]: real UDP sockets and a deterministic virtual loopback
//!   whose per-stage latencies come from a [`StageLatencyModel`].
//! - [`rtps`]: RTPS message encoding and best-effort writer/reader endpoints.
//! - [`cdr`]: CDR encapsulation and the ping payload.
//! - [`ros2`]: nodes, publishers and subscriptions with static discovery.
//! - [`lab`]: the measurement harness, statistics and reports.

pub mod cdr;
pub mod lab;
pub mod ros2;
pub mod rtps;
pub mod transport;
pub mod units;

pub use cdr::{CdrError, CdrReader, CdrWriter, Endianness, PingPayload};
pub use lab::{BenchConfig, LabError, LatencyStats, Report, ReportFormat, SampleSet};
pub use ros2::{Node, PeerConfig, Qos, Ros2Error};
pub use rtps::{BestEffortReader, BestEffortWriter, Guid, GuidPrefix, RtpsError, RtpsMessage};
pub use transport::{
    virtual_loopback, ClockRate, Locator, StageLatencyModel, Transport, TransportError,
    UdpTransport,
};
pub use units::Micros;
