use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU32, Ordering};

use serde::{Deserialize, Serialize};

use super::RtpsError;

static INSTANCE_COUNTER: AtomicU32 = AtomicU32::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GuidPrefix(pub [u8; 12]);

impl GuidPrefix {
    pub const UNKNOWN: GuidPrefix = GuidPrefix([0; 12]);

    /// `host_id | participant_id | instance`, each big endian.
    pub fn new(host_id: u32, participant_id: u32, instance: u32) -> Self {
        let mut b = [0u8; 12];
        b[0..4].copy_from_slice(&host_id.to_be_bytes());
        b[4..8].copy_from_slice(&participant_id.to_be_bytes());
        b[8..12].copy_from_slice(&instance.to_be_bytes());
        GuidPrefix(b)
    }

    /// Like [`GuidPrefix::new`] with the instance drawn from a process-wide
    /// counter, so two participants in one process never collide.
    pub fn next_local(host_id: u32, participant_id: u32) -> Self {
        Self::new(
            host_id,
            participant_id,
            INSTANCE_COUNTER.fetch_add(1, Ordering::Relaxed),
        )
    }
}

impl fmt::Display for GuidPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// Entity kind octet values.
pub mod kind {
    pub const USER_WRITER_WITH_KEY: u8 = 0x02;
    pub const USER_WRITER_NO_KEY: u8 = 0x03;
    pub const USER_READER_NO_KEY: u8 = 0x04;
    pub const USER_READER_WITH_KEY: u8 = 0x07;
    pub const BUILTIN_PARTICIPANT: u8 = 0xC1;
    pub const BUILTIN_WRITER_WITH_KEY: u8 = 0xC2;
    pub const BUILTIN_WRITER_NO_KEY: u8 = 0xC3;
    pub const BUILTIN_READER_NO_KEY: u8 = 0xC4;
    pub const BUILTIN_READER_WITH_KEY: u8 = 0xC7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    UserWriter,
    UserReader,
    Participant,
    BuiltinWriter,
    BuiltinReader,
    Other(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct EntityId {
    pub key: [u8; 3],
    pub kind: u8,
}

impl EntityId {
    pub const UNKNOWN: EntityId = EntityId {
        key: [0, 0, 0],
        kind: 0,
    };
    pub const PARTICIPANT: EntityId = EntityId {
        key: [0, 0, 1],
        kind: kind::BUILTIN_PARTICIPANT,
    };

    pub fn user_writer(key: u32) -> Self {
        Self::with_key(key, kind::USER_WRITER_NO_KEY)
    }

    pub fn user_reader(key: u32) -> Self {
        Self::with_key(key, kind::USER_READER_NO_KEY)
    }

    fn with_key(key: u32, kind: u8) -> Self {
        assert!(key < 1 << 24, "entity key is 24 bits");
        let b = key.to_be_bytes();
        EntityId {
            key: [b[1], b[2], b[3]],
            kind,
        }
    }

    pub fn to_bytes(self) -> [u8; 4] {
        [self.key[0], self.key[1], self.key[2], self.kind]
    }

    pub fn from_bytes(b: [u8; 4]) -> Self {
        EntityId {
            key: [b[0], b[1], b[2]],
            kind: b[3],
        }
    }

    pub fn entity_kind(self) -> EntityKind {
        match self.kind {
            kind::USER_WRITER_NO_KEY | kind::USER_WRITER_WITH_KEY => EntityKind::UserWriter,
            kind::USER_READER_NO_KEY | kind::USER_READER_WITH_KEY => EntityKind::UserReader,
            kind::BUILTIN_PARTICIPANT => EntityKind::Participant,
            kind::BUILTIN_WRITER_NO_KEY | kind::BUILTIN_WRITER_WITH_KEY => {
                EntityKind::BuiltinWriter
            }
            kind::BUILTIN_READER_NO_KEY | kind::BUILTIN_READER_WITH_KEY => {
                EntityKind::BuiltinReader
            }
            other => EntityKind::Other(other),
        }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.to_bytes()))
    }
}

/// Bytewise equality and ordering, so maps keyed by `Guid` iterate
/// deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Guid {
    pub prefix: GuidPrefix,
    pub entity_id: EntityId,
}

impl Guid {
    pub fn new(prefix: GuidPrefix, entity_id: EntityId) -> Self {
        Guid { prefix, entity_id }
    }

    pub fn to_bytes(self) -> [u8; 16] {
        let mut b = [0u8; 16];
        b[..12].copy_from_slice(&self.prefix.0);
        b[12..].copy_from_slice(&self.entity_id.to_bytes());
        b
    }
}

/// Text form: `<24 hex digits>.<8 hex digits>`.
impl fmt::Display for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.prefix, self.entity_id)
    }
}

impl FromStr for Guid {
    type Err = RtpsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RtpsError::InvalidGuid(s.to_string());
        let (prefix, entity) = s.trim().split_once('.').ok_or_else(bad)?;
        let prefix: [u8; 12] = hex::decode(prefix)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(bad)?;
        let entity: [u8; 4] = hex::decode(entity)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(bad)?;
        Ok(Guid::new(GuidPrefix(prefix), EntityId::from_bytes(entity)))
    }
}

impl Serialize for Guid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Guid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 64-bit sequence number carried on the wire as `(high: i32, low: u32)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SequenceNumber(pub i64);

impl SequenceNumber {
    pub const UNKNOWN: SequenceNumber = SequenceNumber(-(1i64 << 32));

    pub fn from_parts(high: i32, low: u32) -> Self {
        SequenceNumber((i64::from(high) << 32) | i64::from(low))
    }

    pub fn high(self) -> i32 {
        (self.0 >> 32) as i32
    }

    pub fn low(self) -> u32 {
        self.0 as u32
    }
}

impl fmt::Display for SequenceNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VendorId(pub [u8; 2]);

impl VendorId {
    pub const UNKNOWN: VendorId = VendorId([0, 0]);
    /// Identifier stamped by this project unless configured otherwise.
    pub const RTPSLAB: VendorId = VendorId([0xAA, 0x01]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProtocolVersion {
    pub major: u8,
    pub minor: u8,
}

impl ProtocolVersion {
    pub const V2_3: ProtocolVersion = ProtocolVersion { major: 2, minor: 3 };
}

impl Default for ProtocolVersion {
    fn default() -> Self {
        Self::V2_3
    }
}

/// RTPS `Time_t`: seconds plus a binary fraction of a second (1/2^32 s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Time {
    pub seconds: u32,
    pub fraction: u32,
}

impl Time {
    /// Rounds the sub-second part to the nearest 1/2^32 s.
    pub fn from_nanos(ns: u64) -> Self {
        let seconds = (ns / 1_000_000_000) as u32;
        let rem = u128::from(ns % 1_000_000_000);
        let fraction = ((rem << 32) + 500_000_000) / 1_000_000_000;
        Time {
            seconds,
            fraction: fraction as u32,
        }
    }

    pub fn to_nanos(self) -> u64 {
        let frac = (u128::from(self.fraction) * 1_000_000_000 + (1 << 31)) >> 32;
        u64::from(self.seconds) * 1_000_000_000 + frac as u64
    }
}
