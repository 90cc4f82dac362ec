//! Node / publisher / subscription layer on top of the RTPS endpoints.
//!
//! There is no executor: [`Node::spin_once`] pulls datagrams from the
//! transport and runs subscription callbacks inline. Endpoint matching is
//! static, taken from a [`PeerConfig`].

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cdr::{Endianness, PingPayload};
use crate::rtps::{
    decode_message, encode_message_into, BestEffortReader, BestEffortWriter, EntityId, Guid,
    GuidPrefix, ReaderDiagnostics, RtpsError, RtpsHeader, Sample,
};
use crate::transport::{Locator, Transport, TransportError};

#[derive(Debug, Error)]
pub enum Ros2Error {
    #[error("topic name is empty")]
    EmptyTopic,
    #[error("invalid topic name {0:?}")]
    InvalidTopic(String),
    #[error("invalid node name {0:?}")]
    InvalidNodeName(String),
    #[error("a {direction} for topic {topic:?} already exists on this node")]
    DuplicateEntity {
        topic: String,
        direction: &'static str,
    },
    #[error("only best-effort QoS is supported")]
    UnsupportedQos,
    #[error("no destination locators configured for topic {0:?}")]
    NoDestinations(String),
    #[error("transport closed")]
    TransportClosed,
    #[error(transparent)]
    Transport(TransportError),
    #[error(transparent)]
    Rtps(#[from] RtpsError),
    #[error("peer config: {0}")]
    Config(String),
}

impl From<TransportError> for Ros2Error {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Closed => Ros2Error::TransportClosed,
            other => Ros2Error::Transport(other),
        }
    }
}

/// Maps a ROS topic to its DDS topic name: `/ping` -> `rt/ping`.
pub fn mangle_topic(ros_topic: &str) -> Result<String, Ros2Error> {
    let name = ros_topic.strip_prefix('/').unwrap_or(ros_topic);
    if name.is_empty() {
        return Err(Ros2Error::EmptyTopic);
    }
    if name.chars().any(char::is_whitespace) || name.starts_with('/') {
        return Err(Ros2Error::InvalidTopic(ros_topic.to_string()));
    }
    Ok(format!("rt/{name}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qos {
    #[default]
    BestEffort,
    Reliable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicPeers {
    pub name: String,
    #[serde(default)]
    pub destinations: Vec<Locator>,
    #[serde(default)]
    pub matched_writers: Vec<Guid>,
}

/// Static endpoint configuration for one node, loadable from TOML:
///
/// ```toml
/// node = "ping"
/// host_id = 1
/// participant_id = 1
/// padding = 0
/// destinations = ["127.0.0.1:7410"]
///
/// [[topic]]
/// name = "/pong"
/// matched_writers = ["000000010000000200000000.00000203"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerConfig {
    pub node: String,
    #[serde(default = "default_id")]
    pub host_id: u32,
    #[serde(default = "default_id")]
    pub participant_id: u32,
    #[serde(default)]
    pub instance: u32,
    #[serde(default)]
    pub padding: usize,
    /// Used by publishers whose topic has no entry of its own.
    #[serde(default)]
    pub destinations: Vec<Locator>,
    #[serde(default, rename = "topic")]
    pub topics: Vec<TopicPeers>,
}

fn default_id() -> u32 {
    1
}

impl PeerConfig {
    pub fn new(node: impl Into<String>, host_id: u32, participant_id: u32) -> Self {
        PeerConfig {
            node: node.into(),
            host_id,
            participant_id,
            instance: 0,
            padding: 0,
            destinations: Vec::new(),
            topics: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, Ros2Error> {
        toml::from_str(text).map_err(|e| Ros2Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Ros2Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Ros2Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn guid_prefix(&self) -> GuidPrefix {
        GuidPrefix::new(self.host_id, self.participant_id, self.instance)
    }

    pub fn topic_mut(&mut self, name: &str) -> &mut TopicPeers {
        if let Some(i) = self.topics.iter().position(|t| t.name == name) {
            return &mut self.topics[i];
        }
        self.topics.push(TopicPeers {
            name: name.to_string(),
            ..TopicPeers::default()
        });
        self.topics.last_mut().unwrap()
    }

    fn lookup(&self, dds_topic: &str) -> Option<&TopicPeers> {
        self.topics
            .iter()
            .find(|t| mangle_topic(&t.name).is_ok_and(|m| m == dds_topic))
    }
}

/// Accumulated wall time spent in each layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTotals {
    pub ros2_ns: u64,
    pub rtps_ns: u64,
    pub transport_ns: u64,
    pub count: u64,
}

impl LayerTotals {
    pub fn mean_ns(&self) -> [f64; 3] {
        let n = self.count.max(1) as f64;
        [
            self.transport_ns as f64 / n,
            self.rtps_ns as f64 / n,
            self.ros2_ns as f64 / n,
        ]
    }
}

/// Per-layer timing for the send path (serialize / produce+encode / send)
/// and the receive path (decode+reader / callbacks). Time blocked inside the
/// transport waiting for traffic is not attributed to any layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub publish: LayerTotals,
    pub receive: LayerTotals,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDiagnostics {
    pub datagrams_received: u64,
    pub malformed_datagrams: u64,
    pub transport_errors: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublisherHandle(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubscriptionHandle(usize);

#[derive(Debug)]
pub struct Publisher {
    topic: String,
    writer: BestEffortWriter,
}

impl Publisher {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn guid(&self) -> Guid {
        self.writer.guid()
    }

    pub fn publish_count(&self) -> u64 {
        self.writer.produced()
    }
}

pub type Callback = Box<dyn FnMut(&Sample) + Send>;

pub struct Subscription {
    topic: String,
    reader: BestEffortReader,
    callback: Callback,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn guid(&self) -> Guid {
        self.reader.guid()
    }

    pub fn diagnostics(&self) -> ReaderDiagnostics {
        self.reader.diagnostics()
    }
}

impl std::fmt::Debug for Subscription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subscription")
            .field("topic", &self.topic)
            .field("reader", &self.reader)
            .finish_non_exhaustive()
    }
}

fn elapsed_ns(since: Instant) -> u64 {
    since.elapsed().as_nanos() as u64
}

/// A participant: owns its transport and every entity created on it.
pub struct Node<T: Transport> {
    name: String,
    prefix: GuidPrefix,
    header: RtpsHeader,
    peers: PeerConfig,
    transport: T,
    publishers: Vec<Publisher>,
    subscriptions: Vec<Subscription>,
    next_entity_key: u32,
    profile: LayerProfile,
    diagnostics: NodeDiagnostics,
    scratch: Vec<u8>,
}

impl<T: Transport> Node<T> {
    pub fn new(peers: PeerConfig, transport: T) -> Result<Self, Ros2Error> {
        let name = peers.node.clone();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Ros2Error::InvalidNodeName(name));
        }
        let prefix = peers.guid_prefix();
        Ok(Node {
            name,
            prefix,
            header: RtpsHeader::new(prefix),
            peers,
            transport,
            publishers: Vec::new(),
            subscriptions: Vec::new(),
            next_entity_key: 1,
            profile: LayerProfile::default(),
            diagnostics: NodeDiagnostics::default(),
            scratch: Vec::with_capacity(256),
        })
    }

    /// Overrides the protocol version / vendor id in outgoing headers.
    pub fn set_header(&mut self, header: RtpsHeader) {
        self.header = RtpsHeader {
            guid_prefix: self.prefix,
            ..header
        };
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn guid_prefix(&self) -> GuidPrefix {
        self.prefix
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn now_ns(&self) -> u64 {
        self.transport.now_ns()
    }

    pub fn profile(&self) -> LayerProfile {
        self.profile
    }

    pub fn reset_profile(&mut self) {
        self.profile = LayerProfile::default();
    }

    pub fn diagnostics(&self) -> NodeDiagnostics {
        self.diagnostics
    }

    pub fn publisher(&self, h: PublisherHandle) -> &Publisher {
        &self.publishers[h.0]
    }

    pub fn subscription(&self, h: SubscriptionHandle) -> &Subscription {
        &self.subscriptions[h.0]
    }

    pub fn close(&mut self) {
        self.transport.close();
    }

    fn next_key(&mut self) -> u32 {
        let k = self.next_entity_key;
        self.next_entity_key += 1;
        k
    }

    pub fn create_publisher(
        &mut self,
        topic: &str,
        qos: Qos,
    ) -> Result<PublisherHandle, Ros2Error> {
        if qos != Qos::BestEffort {
            return Err(Ros2Error::UnsupportedQos);
        }
        let dds_topic = mangle_topic(topic)?;
        if self.publishers.iter().any(|p| p.topic == dds_topic) {
            return Err(Ros2Error::DuplicateEntity {
                topic: dds_topic,
                direction: "publisher",
            });
        }
        let destinations = match self.peers.lookup(&dds_topic) {
            Some(t) if !t.destinations.is_empty() => t.destinations.clone(),
            _ => self.peers.destinations.clone(),
        };
        if destinations.is_empty() {
            return Err(Ros2Error::NoDestinations(dds_topic));
        }
        let key = self.next_key();
        let writer = BestEffortWriter::new(
            Guid::new(self.prefix, EntityId::user_writer(key)),
            destinations,
        )
        .with_header(self.header);
        self.publishers.push(Publisher {
            topic: dds_topic,
            writer,
        });
        Ok(PublisherHandle(self.publishers.len() - 1))
    }

    /// Registers a subscription; `callback` runs once per delivered sample,
    /// in sequence order per writer.
    pub fn create_subscription(
        &mut self,
        topic: &str,
        qos: Qos,
        callback: impl FnMut(&Sample) + Send + 'static,
    ) -> Result<SubscriptionHandle, Ros2Error> {
        if qos != Qos::BestEffort {
            return Err(Ros2Error::UnsupportedQos);
        }
        let dds_topic = mangle_topic(topic)?;
        if self.subscriptions.iter().any(|s| s.topic == dds_topic) {
            return Err(Ros2Error::DuplicateEntity {
                topic: dds_topic,
                direction: "subscription",
            });
        }
        let matched = self
            .peers
            .lookup(&dds_topic)
            .map(|t| t.matched_writers.clone())
            .unwrap_or_default();
        let key = self.next_key();
        let reader =
            BestEffortReader::new(Guid::new(self.prefix, EntityId::user_reader(key)), matched);
        self.subscriptions.push(Subscription {
            topic: dds_topic,
            reader,
            callback: Box::new(callback),
        });
        Ok(SubscriptionHandle(self.subscriptions.len() - 1))
    }

    /// Adds a writer to a subscription's static match set.
    pub fn match_writer(&mut self, h: SubscriptionHandle, writer: Guid) {
        self.subscriptions[h.0].reader.match_writer(writer);
    }

    pub fn publish(&mut self, h: PublisherHandle, payload: &PingPayload) -> Result<(), Ros2Error> {
        if self.transport.is_closed() {
            return Err(Ros2Error::TransportClosed);
        }
        let t0 = Instant::now();
        let bytes = payload.serialize(Endianness::LittleEndian);
        self.profile.publish.ros2_ns += elapsed_ns(t0);
        self.send_serialized(h, bytes)
    }

    /// Publishes an already encapsulated CDR payload as-is.
    pub fn publish_serialized(
        &mut self,
        h: PublisherHandle,
        payload: &[u8],
    ) -> Result<(), Ros2Error> {
        if self.transport.is_closed() {
            return Err(Ros2Error::TransportClosed);
        }
        self.send_serialized(h, payload.to_vec())
    }

    fn send_serialized(&mut self, h: PublisherHandle, payload: Vec<u8>) -> Result<(), Ros2Error> {
        let t1 = Instant::now();
        let now = self.transport.timestamp_ns();
        let (message, destinations) = self.publishers[h.0].writer.produce(payload, now)?;
        encode_message_into(&message, &mut self.scratch)?;
        let t2 = Instant::now();
        for dest in destinations {
            self.transport.send(dest, &self.scratch)?;
        }
        self.profile.publish.rtps_ns += (t2 - t1).as_nanos() as u64;
        self.profile.publish.transport_ns += elapsed_ns(t2);
        self.profile.publish.count += 1;
        Ok(())
    }

    /// Waits up to `max_wait` for traffic, then drains whatever else is
    /// already queued. Returns the number of callbacks run.
    pub fn spin_once(&mut self, max_wait: Duration) -> usize {
        let mut wait = max_wait;
        let mut invoked = 0;
        loop {
            match self.transport.recv(wait) {
                Ok(Some(d)) => invoked += self.dispatch(&d.bytes),
                Ok(None) => break,
                Err(_) => {
                    self.diagnostics.transport_errors += 1;
                    break;
                }
            }
            wait = Duration::ZERO;
        }
        invoked
    }

    fn dispatch(&mut self, bytes: &[u8]) -> usize {
        self.diagnostics.datagrams_received += 1;
        let t0 = Instant::now();
        let message = match decode_message(bytes) {
            Ok(m) => m,
            Err(_) => {
                self.diagnostics.malformed_datagrams += 1;
                return 0;
            }
        };
        let mut rtps_ns = elapsed_ns(t0);
        let mut ros2_ns = 0;
        let mut invoked = 0;
        for sub in &mut self.subscriptions {
            let t1 = Instant::now();
            let samples = sub.reader.consume(&message);
            let t2 = Instant::now();
            for s in &samples {
                (sub.callback)(s);
            }
            invoked += samples.len();
            rtps_ns += (t2 - t1).as_nanos() as u64;
            ros2_ns += elapsed_ns(t2);
        }
        self.profile.receive.rtps_ns += rtps_ns;
        self.profile.receive.ros2_ns += ros2_ns;
        self.profile.receive.count += 1;
        invoked
    }
}

impl<T: Transport> std::fmt::Debug for Node<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Node")
            .field("name", &self.name)
            .field("prefix", &self.prefix)
            .field("publishers", &self.publishers)
            .field("subscriptions", &self.subscriptions)
            .finish_non_exhaustive()
    }
}
