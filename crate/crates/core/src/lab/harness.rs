//! Ping-pong RTT measurement.
//!
//! The initiator publishes a [`PingPayload`] on `/ping` carrying its own
//! monotonic send time; the echo side republishes the payload bytes
//! unchanged on `/pong`. RTT is receive time minus the embedded send time on
//! the initiator's clock, so no clock synchronization is involved.

use std::convert::Infallible;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{BenchConfig, TransportKind};
use super::LabError;
use crate::cdr::PingPayload;
use crate::ros2::{LayerProfile, Node, PeerConfig, PublisherHandle, Qos, SubscriptionHandle};
use crate::rtps::{EntityId, Guid, GuidPrefix, Sample};
use crate::transport::{virtual_loopback, Locator, Transport, UdpTransport};

pub const PING_TOPIC: &str = "/ping";
pub const PONG_TOPIC: &str = "/pong";
pub const INITIATOR_PARTICIPANT: u32 = 1;
pub const ECHO_PARTICIPANT: u32 = 2;

// Entity keys follow creation order on each node.
const INITIATOR_PING_WRITER_KEY: u32 = 1;
const ECHO_PONG_WRITER_KEY: u32 = 2;

pub fn initiator_writer_guid(host_id: u32) -> Guid {
    Guid::new(
        GuidPrefix::new(host_id, INITIATOR_PARTICIPANT, 0),
        EntityId::user_writer(INITIATOR_PING_WRITER_KEY),
    )
}

pub fn echo_writer_guid(host_id: u32) -> Guid {
    Guid::new(
        GuidPrefix::new(host_id, ECHO_PARTICIPANT, 0),
        EntityId::user_writer(ECHO_PONG_WRITER_KEY),
    )
}

/// Static peers for the initiator: publish `/ping` to `peer`, accept `/pong`
/// from the echo node's writer.
pub fn initiator_peers(host_id: u32, peer: Locator, padding: usize) -> PeerConfig {
    let mut c = PeerConfig::new("pingpong_initiator", host_id, INITIATOR_PARTICIPANT);
    c.padding = padding;
    c.topic_mut(PING_TOPIC).destinations = vec![peer];
    c.topic_mut(PONG_TOPIC).matched_writers = vec![echo_writer_guid(host_id)];
    c
}

pub fn echo_peers(host_id: u32, peer: Locator) -> PeerConfig {
    let mut c = PeerConfig::new("pingpong_echo", host_id, ECHO_PARTICIPANT);
    c.topic_mut(PING_TOPIC).matched_writers = vec![initiator_writer_guid(host_id)];
    c.topic_mut(PONG_TOPIC).destinations = vec![peer];
    c
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoStats {
    pub echoed: u64,
    pub malformed_payloads: u64,
    pub malformed_datagrams: u64,
    pub send_errors: u64,
}

/// The "pong" side.
pub struct EchoServer<T: Transport> {
    node: Node<T>,
    pong: PublisherHandle,
    inbox: Receiver<Sample>,
    stats: EchoStats,
}

impl<T: Transport> EchoServer<T> {
    pub fn new(transport: T, host_id: u32, peer: Locator) -> Result<Self, LabError> {
        let mut node = Node::new(echo_peers(host_id, peer), transport)?;
        let (tx, inbox) = mpsc::channel();
        node.create_subscription(PING_TOPIC, Qos::BestEffort, move |s| {
            let _ = tx.send(s.clone());
        })?;
        let pong = node.create_publisher(PONG_TOPIC, Qos::BestEffort)?;
        Ok(EchoServer {
            node,
            pong,
            inbox,
            stats: EchoStats::default(),
        })
    }

    pub fn node(&self) -> &Node<T> {
        &self.node
    }

    pub fn stats(&self) -> EchoStats {
        EchoStats {
            malformed_datagrams: self.node.diagnostics().malformed_datagrams,
            ..self.stats
        }
    }

    /// Serves whatever arrives within `max_wait`. Returns the number echoed.
    pub fn poll(&mut self, max_wait: Duration) -> usize {
        self.node.spin_once(max_wait);
        let mut echoed = 0;
        while let Ok(sample) = self.inbox.try_recv() {
            if PingPayload::deserialize(&sample.payload).is_err() {
                self.stats.malformed_payloads += 1;
                continue;
            }
            match self.node.publish_serialized(self.pong, &sample.payload) {
                Ok(()) => {
                    self.stats.echoed += 1;
                    echoed += 1;
                }
                Err(_) => self.stats.send_errors += 1,
            }
        }
        echoed
    }

    pub fn serve_until(&mut self, stop: &AtomicBool) {
        while !stop.load(Ordering::Relaxed) {
            self.poll(Duration::from_millis(50));
        }
    }
}

/// Serves echoes until the process is terminated.
///
/// The config describes the pair from the initiator's point of view, so the
/// same file works on both sides: the echo listens on `peer` and sends pongs
/// to `bind`.
pub fn run_echo(config: &BenchConfig) -> Result<Infallible, LabError> {
    let transport = UdpTransport::open(config.peer)?;
    let mut echo = EchoServer::new(transport, config.host_id, config.bind)?;
    loop {
        echo.poll(Duration::from_secs(1));
    }
}

/// RTT samples plus everything needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub config: BenchConfig,
    /// Measured RTTs in nanoseconds, in send order.
    pub samples: Vec<u64>,
    pub started_unix_ns: u64,
    pub finished_unix_ns: u64,
    /// Warmup exchanges completed and excluded.
    pub warmup_discarded: u64,
    /// Measured exchanges that timed out.
    pub dropped: u64,
    /// Pongs that arrived for an earlier, already timed-out ping.
    pub stale: u64,
    /// Gaps seen by the initiator's reader.
    pub lost: u64,
    pub layers: LayerProfile,
}

fn unix_ns() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0)
}

struct Initiator<T: Transport> {
    node: Node<T>,
    ping: PublisherHandle,
    pong: SubscriptionHandle,
    inbox: Receiver<Sample>,
    padding: usize,
}

impl<T: Transport> Initiator<T> {
    fn new(transport: T, config: &BenchConfig, peer: Locator) -> Result<Self, LabError> {
        let mut node = Node::new(
            initiator_peers(config.host_id, peer, config.payload_padding),
            transport,
        )?;
        let ping = node.create_publisher(PING_TOPIC, Qos::BestEffort)?;
        let (tx, inbox) = mpsc::channel();
        let pong = node.create_subscription(PONG_TOPIC, Qos::BestEffort, move |s| {
            let _ = tx.send(s.clone());
        })?;
        Ok(Initiator {
            node,
            ping,
            pong,
            inbox,
            padding: config.payload_padding,
        })
    }

    /// One exchange. `Ok(None)` on timeout.
    fn exchange(
        &mut self,
        seq: u64,
        timeout: Duration,
        stale: &mut u64,
        mut drive_peer: impl FnMut(),
    ) -> Result<Option<u64>, LabError> {
        let send_ns = self.node.now_ns();
        let mut payload = PingPayload::new(seq, send_ns, 0);
        payload.padding.resize(self.padding, 0);
        self.node.publish(self.ping, &payload)?;
        drive_peer();

        let deadline = send_ns.saturating_add(timeout.as_nanos() as u64);
        loop {
            let now = self.node.now_ns();
            if now >= deadline {
                return Ok(None);
            }
            self.node.spin_once(Duration::from_nanos(deadline - now));
            let received_ns = self.node.now_ns();
            let mut rtt = None;
            while let Ok(sample) = self.inbox.try_recv() {
                match PingPayload::deserialize(&sample.payload) {
                    Ok(p) if p.sequence == seq && rtt.is_none() => {
                        rtt = Some(received_ns.saturating_sub(p.send_timestamp_ns));
                    }
                    _ => *stale += 1,
                }
            }
            if rtt.is_some() {
                return Ok(rtt);
            }
        }
    }

    fn run(
        mut self,
        config: &BenchConfig,
        mut drive_peer: impl FnMut(),
    ) -> Result<SampleSet, LabError> {
        config.validate()?;
        let started_unix_ns = unix_ns();
        let timeout = config.timeout();
        let total = config.warmup_count + config.sample_count;
        let mut samples = Vec::with_capacity(config.sample_count as usize);
        let (mut dropped, mut stale, mut warmup_discarded) = (0u64, 0u64, 0u64);
        let mut consecutive = 0u32;

        for i in 0..total {
            if i == config.warmup_count {
                self.node.reset_profile();
            }
            let rtt = self.exchange(i + 1, timeout, &mut stale, &mut drive_peer)?;
            let warm = i < config.warmup_count;
            match rtt {
                Some(v) => {
                    consecutive = 0;
                    if warm {
                        warmup_discarded += 1;
                    } else {
                        samples.push(v);
                    }
                }
                None => {
                    consecutive += 1;
                    if !warm {
                        dropped += 1;
                    }
                    if consecutive >= config.max_consecutive_timeouts {
                        return Err(LabError::PeerUnreachable {
                            consecutive,
                            timeout_ms: config.timeout_ms,
                        });
                    }
                }
            }
        }

        Ok(SampleSet {
            config: config.clone(),
            samples,
            started_unix_ns,
            finished_unix_ns: unix_ns(),
            warmup_discarded,
            dropped,
            stale,
            lost: self.node.subscription(self.pong).diagnostics().lost,
            layers: self.node.profile(),
        })
    }
}

/// Runs the configured benchmark. The virtual transport hosts both sides on
/// this thread; UDP expects an echo server at `config.peer`.
pub fn run_pingpong(config: &BenchConfig) -> Result<SampleSet, LabError> {
    config.validate()?;
    match config.transport {
        TransportKind::Virtual => {
            let (a, b) = virtual_loopback(&config.model(), config.seed)?;
            let (a_loc, b_loc) = (a.local_locator(), b.local_locator());
            let mut echo = EchoServer::new(b, config.host_id, a_loc)?;
            let initiator = Initiator::new(a, config, b_loc)?;
            let timeout = config.timeout();
            initiator.run(config, || {
                echo.poll(timeout);
            })
        }
        TransportKind::Udp => {
            let transport = UdpTransport::open(config.bind)?;
            run_pingpong_with(transport, config, config.peer)
        }
    }
}

/// Initiator side over a caller-supplied transport, against an echo peer
/// served elsewhere.
pub fn run_pingpong_with<T: Transport>(
    transport: T,
    config: &BenchConfig,
    peer: Locator,
) -> Result<SampleSet, LabError> {
    Initiator::new(transport, config, peer)?.run(config, || {})
}
