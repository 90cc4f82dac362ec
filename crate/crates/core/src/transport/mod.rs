//! Datagram transports: real UDP sockets and a virtual-clock loopback that
//! delivers every datagram after a fixed, cycle-quantized pipeline latency.

mod model;
mod udp;
mod virtual_net;

use std::fmt;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{ClockRate, Stage, StageLatencyModel};
pub use udp::UdpTransport;
pub use virtual_net::{virtual_loopback, TraceRecord, VirtualClock, VirtualEndpoint};

/// Largest UDP payload over IPv4.
pub const MAX_DATAGRAM: usize = 65507;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cannot bind {locator}: {source}")]
    BindFailed {
        locator: Locator,
        source: std::io::Error,
    },
    #[error("send to {dest} failed: {source}")]
    SendFailed {
        dest: Locator,
        source: std::io::Error,
    },
    #[error("receive failed: {0}")]
    RecvFailed(std::io::Error),
    #[error("datagram of {0} bytes exceeds {MAX_DATAGRAM}")]
    DatagramTooLarge(usize),
    #[error("transport closed")]
    Closed,
    #[error("invalid latency model: {0}")]
    InvalidModel(String),
    #[error("invalid locator {0:?}")]
    InvalidLocator(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocatorKind {
    UdpV4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Locator {
    pub kind: LocatorKind,
    pub address: [u8; 4],
    pub port: u16,
}

impl Locator {
    /// # Panics
    /// If `port` is zero.
    pub fn udpv4(address: [u8; 4], port: u16) -> Self {
        assert!(port > 0, "locator port must be nonzero");
        Locator {
            kind: LocatorKind::UdpV4,
            address,
            port,
        }
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::V4(SocketAddrV4::new(Ipv4Addr::from(self.address), self.port))
    }
}

impl TryFrom<SocketAddr> for Locator {
    type Error = TransportError;

    fn try_from(addr: SocketAddr) -> Result<Self, Self::Error> {
        match addr {
            SocketAddr::V4(v4) if v4.port() > 0 => Ok(Locator::udpv4(v4.ip().octets(), v4.port())),
            other => Err(TransportError::InvalidLocator(other.to_string())),
        }
    }
}

impl FromStr for Locator {
    type Err = TransportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let addr: SocketAddrV4 = s
            .trim()
            .parse()
            .map_err(|_| TransportError::InvalidLocator(s.to_string()))?;
        Locator::try_from(SocketAddr::V4(addr))
    }
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.socket_addr().fmt(f)
    }
}

impl Serialize for Locator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Locator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub source: Locator,
    pub bytes: Vec<u8>,
}

/// A single-owner datagram endpoint with its own notion of time.
pub trait Transport: Send {
    fn local_locator(&self) -> Locator;

    fn send(&mut self, dest: &Locator, datagram: &[u8]) -> Result<(), TransportError>;

    /// Waits up to `max_wait` for one datagram. `Ok(None)` on timeout.
    fn recv(&mut self, max_wait: Duration) -> Result<Option<Datagram>, TransportError>;

    /// Monotonic nanoseconds used for latency measurement.
    fn now_ns(&self) -> u64;

    /// Source timestamp for outgoing INFO_TS, nanoseconds since the epoch
    /// of this transport's clock.
    fn timestamp_ns(&self) -> u64 {
        self.now_ns()
    }

    fn close(&mut self);

    fn is_closed(&self) -> bool;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn local_locator(&self) -> Locator {
        (**self).local_locator()
    }

    fn send(&mut self, dest: &Locator, datagram: &[u8]) -> Result<(), TransportError> {
        (**self).send(dest, datagram)
    }

    fn recv(&mut self, max_wait: Duration) -> Result<Option<Datagram>, TransportError> {
        (**self).recv(max_wait)
    }

    fn now_ns(&self) -> u64 {
        (**self).now_ns()
    }

    fn timestamp_ns(&self) -> u64 {
        (**self).timestamp_ns()
    }

    fn close(&mut self) {
        (**self).close()
    }

    fn is_closed(&self) -> bool {
        (**self).is_closed()
    }
}

pub(crate) fn check_size(datagram: &[u8]) -> Result<(), TransportError> {
    if datagram.len() > MAX_DATAGRAM {
        Err(TransportError::DatagramTooLarge(datagram.len()))
    } else {
        Ok(())
    }
}
