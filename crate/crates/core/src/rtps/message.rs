//! RTPS message framing: the 20-byte header followed by submessages, each
//! with a 4-byte header (id, flags, octetsToNextHeader) and a body padded to
//! a 4-byte multiple.

use crate::cdr::Endianness;

use super::types::{EntityId, GuidPrefix, ProtocolVersion, SequenceNumber, Time, VendorId};
use super::RtpsError;

pub const HEADER_LEN: usize = 20;
pub const SUBMESSAGE_HEADER_LEN: usize = 4;
/// Largest body whose padded length fits `octetsToNextHeader`.
pub const MAX_BODY_LEN: usize = 65532;
pub const MAGIC: [u8; 4] = *b"RTPS";

pub mod id {
    pub const PAD: u8 = 0x01;
    pub const ACKNACK: u8 = 0x06;
    pub const HEARTBEAT: u8 = 0x07;
    pub const GAP: u8 = 0x08;
    pub const INFO_TS: u8 = 0x09;
    pub const INFO_SRC: u8 = 0x0c;
    pub const INFO_DST: u8 = 0x0e;
    pub const DATA: u8 = 0x15;
    pub const DATA_FRAG: u8 = 0x16;
}

mod flag {
    pub const DATA_INLINE_QOS: u8 = 0x02;
    pub const DATA_PAYLOAD: u8 = 0x04;
    pub const INFO_TS_INVALIDATE: u8 = 0x02;
    pub const FINAL: u8 = 0x02;
    pub const LIVELINESS: u8 = 0x04;
}

const PID_SENTINEL: u16 = 0x0001;
const DATA_FIXED_LEN: usize = 20;
const OCTETS_TO_INLINE_QOS: u16 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RtpsHeader {
    pub version: ProtocolVersion,
    pub vendor_id: VendorId,
    pub guid_prefix: GuidPrefix,
}

impl RtpsHeader {
    pub fn new(guid_prefix: GuidPrefix) -> Self {
        RtpsHeader {
            version: ProtocolVersion::V2_3,
            vendor_id: VendorId::RTPSLAB,
            guid_prefix,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&MAGIC);
        b[4] = self.version.major;
        b[5] = self.version.minor;
        b[6..8].copy_from_slice(&self.vendor_id.0);
        b[8..].copy_from_slice(&self.guid_prefix.0);
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, RtpsError> {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(RtpsError::BadMagic([
                bytes[0], bytes[1], bytes[2], bytes[3],
            ]));
        }
        if bytes.len() < HEADER_LEN {
            return Err(RtpsError::TruncatedHeader(bytes.len()));
        }
        Ok(RtpsHeader {
            version: ProtocolVersion {
                major: bytes[4],
                minor: bytes[5],
            },
            vendor_id: VendorId([bytes[6], bytes[7]]),
            guid_prefix: GuidPrefix(bytes[8..20].try_into().unwrap()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    pub endianness: Endianness,
    pub reader_id: EntityId,
    pub writer_id: EntityId,
    pub writer_sn: SequenceNumber,
    /// Raw parameter list including the sentinel, kept opaque.
    pub inline_qos: Option<Vec<u8>>,
    pub serialized_payload: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InfoTimestamp {
    pub endianness: Endianness,
    /// `None` when the invalidate flag is set.
    pub timestamp: Option<Time>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heartbeat {
    pub endianness: Endianness,
    pub final_flag: bool,
    pub liveliness_flag: bool,
    pub reader_id: EntityId,
    pub writer_id: EntityId,
    pub first_sn: SequenceNumber,
    pub last_sn: SequenceNumber,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceNumberSet {
    pub base: SequenceNumber,
    pub num_bits: u32,
    pub bitmap: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AckNack {
    pub endianness: Endianness,
    pub final_flag: bool,
    pub reader_id: EntityId,
    pub writer_id: EntityId,
    pub reader_sn_state: SequenceNumberSet,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InfoDestination {
    pub endianness: Endianness,
    pub guid_prefix: GuidPrefix,
}

/// Any submessage id this codec does not interpret, body kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSubmessage {
    pub id: u8,
    pub flags: u8,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submessage {
    Data(Data),
    InfoTimestamp(InfoTimestamp),
    Heartbeat(Heartbeat),
    AckNack(AckNack),
    InfoDestination(InfoDestination),
    Unknown(UnknownSubmessage),
}

impl Submessage {
    pub fn id(&self) -> u8 {
        match self {
            Submessage::Data(_) => id::DATA,
            Submessage::InfoTimestamp(_) => id::INFO_TS,
            Submessage::Heartbeat(_) => id::HEARTBEAT,
            Submessage::AckNack(_) => id::ACKNACK,
            Submessage::InfoDestination(_) => id::INFO_DST,
            Submessage::Unknown(u) => u.id,
        }
    }

    pub fn flags(&self) -> u8 {
        match self {
            Submessage::Data(d) => {
                let mut f = d.endianness.flag();
                if d.inline_qos.is_some() {
                    f |= flag::DATA_INLINE_QOS;
                }
                if d.serialized_payload.is_some() {
                    f |= flag::DATA_PAYLOAD;
                }
                f
            }
            Submessage::InfoTimestamp(t) => {
                let mut f = t.endianness.flag();
                if t.timestamp.is_none() {
                    f |= flag::INFO_TS_INVALIDATE;
                }
                f
            }
            Submessage::Heartbeat(h) => {
                let mut f = h.endianness.flag();
                if h.final_flag {
                    f |= flag::FINAL;
                }
                if h.liveliness_flag {
                    f |= flag::LIVELINESS;
                }
                f
            }
            Submessage::AckNack(a) => {
                let mut f = a.endianness.flag();
                if a.final_flag {
                    f |= flag::FINAL;
                }
                f
            }
            Submessage::InfoDestination(d) => d.endianness.flag(),
            Submessage::Unknown(u) => u.flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtpsMessage {
    pub header: RtpsHeader,
    pub submessages: Vec<Submessage>,
}

struct BodyWriter {
    out: Vec<u8>,
    endianness: Endianness,
}

impl BodyWriter {
    fn u16(&mut self, v: u16) {
        self.out.extend_from_slice(&self.endianness.u16_to_bytes(v));
    }

    fn u32(&mut self, v: u32) {
        match self.endianness {
            Endianness::LittleEndian => self.out.extend_from_slice(&v.to_le_bytes()),
            Endianness::BigEndian => self.out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    fn entity(&mut self, e: EntityId) {
        self.out.extend_from_slice(&e.to_bytes());
    }

    fn sn(&mut self, sn: SequenceNumber) {
        self.u32(sn.high() as u32);
        self.u32(sn.low());
    }
}

struct BodyReader<'a> {
    body: &'a [u8],
    pos: usize,
    endianness: Endianness,
}

impl<'a> BodyReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RtpsError> {
        if self.body.len() - self.pos < n {
            return Err(RtpsError::MalformedSubmessage(
                "body shorter than its fields",
            ));
        }
        let out = &self.body[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, RtpsError> {
        let b = self.take(2)?;
        Ok(self.endianness.u16_from_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, RtpsError> {
        let b: [u8; 4] = self.take(4)?.try_into().unwrap();
        Ok(match self.endianness {
            Endianness::LittleEndian => u32::from_le_bytes(b),
            Endianness::BigEndian => u32::from_be_bytes(b),
        })
    }

    fn entity(&mut self) -> Result<EntityId, RtpsError> {
        Ok(EntityId::from_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn sn(&mut self) -> Result<SequenceNumber, RtpsError> {
        let high = self.u32()? as i32;
        let low = self.u32()?;
        Ok(SequenceNumber::from_parts(high, low))
    }

    fn rest(&mut self) -> &'a [u8] {
        let out = &self.body[self.pos..];
        self.pos = self.body.len();
        out
    }
}

fn encode_body(sm: &Submessage) -> Vec<u8> {
    let endianness = match sm {
        Submessage::Data(d) => d.endianness,
        Submessage::InfoTimestamp(t) => t.endianness,
        Submessage::Heartbeat(h) => h.endianness,
        Submessage::AckNack(a) => a.endianness,
        Submessage::InfoDestination(d) => d.endianness,
        Submessage::Unknown(u) => return u.body.clone(),
    };
    let mut w = BodyWriter {
        out: Vec::with_capacity(64),
        endianness,
    };
    match sm {
        Submessage::Data(d) => {
            w.u16(0);
            w.u16(OCTETS_TO_INLINE_QOS);
            w.entity(d.reader_id);
            w.entity(d.writer_id);
            w.sn(d.writer_sn);
            if let Some(qos) = &d.inline_qos {
                w.out.extend_from_slice(qos);
            }
            if let Some(payload) = &d.serialized_payload {
                w.out.extend_from_slice(payload);
            }
        }
        Submessage::InfoTimestamp(t) => {
            if let Some(ts) = t.timestamp {
                w.u32(ts.seconds);
                w.u32(ts.fraction);
            }
        }
        Submessage::Heartbeat(h) => {
            w.entity(h.reader_id);
            w.entity(h.writer_id);
            w.sn(h.first_sn);
            w.sn(h.last_sn);
            w.u32(h.count);
        }
        Submessage::AckNack(a) => {
            w.entity(a.reader_id);
            w.entity(a.writer_id);
            w.sn(a.reader_sn_state.base);
            w.u32(a.reader_sn_state.num_bits);
            for word in &a.reader_sn_state.bitmap {
                w.u32(*word);
            }
            w.u32(a.count);
        }
        Submessage::InfoDestination(d) => w.out.extend_from_slice(&d.guid_prefix.0),
        Submessage::Unknown(_) => unreachable!(),
    }
    w.out
}

/// Serializes a message. Bodies are zero-padded to a 4-byte multiple.
pub fn encode_message(m: &RtpsMessage) -> Result<Vec<u8>, RtpsError> {
    let mut out = Vec::with_capacity(128);
    encode_message_into(m, &mut out)?;
    Ok(out)
}

/// Like [`encode_message`] but reuses the caller's buffer.
pub fn encode_message_into(m: &RtpsMessage, out: &mut Vec<u8>) -> Result<(), RtpsError> {
    if m.submessages.is_empty() {
        return Err(RtpsError::EmptyMessage);
    }
    out.clear();
    out.extend_from_slice(&m.header.to_bytes());
    for sm in &m.submessages {
        let mut body = encode_body(sm);
        if body.len() > MAX_BODY_LEN {
            return Err(RtpsError::UnrepresentableLength(body.len()));
        }
        body.resize(body.len().next_multiple_of(4), 0);
        let flags = sm.flags();
        out.push(sm.id());
        out.push(flags);
        out.extend_from_slice(&Endianness::from_flag(flags).u16_to_bytes(body.len() as u16));
        out.extend_from_slice(&body);
    }
    Ok(())
}

/// Length of a parameter list up to and including its sentinel.
fn parameter_list_len(bytes: &[u8], endianness: Endianness) -> Result<usize, RtpsError> {
    let mut pos = 0;
    loop {
        if bytes.len() < pos + 4 {
            return Err(RtpsError::MalformedSubmessage("unterminated inline QoS"));
        }
        let pid = endianness.u16_from_bytes([bytes[pos], bytes[pos + 1]]);
        let len = endianness.u16_from_bytes([bytes[pos + 2], bytes[pos + 3]]) as usize;
        pos += 4;
        if pid == PID_SENTINEL {
            return Ok(pos);
        }
        pos += len;
    }
}

fn decode_body(id: u8, flags: u8, body: &[u8]) -> Result<Submessage, RtpsError> {
    let endianness = Endianness::from_flag(flags);
    let mut r = BodyReader {
        body,
        pos: 0,
        endianness,
    };
    let sm = match id {
        id::DATA => {
            if body.len() < DATA_FIXED_LEN {
                return Err(RtpsError::MalformedSubmessage("DATA body too short"));
            }
            let _extra_flags = r.u16()?;
            let octets_to_qos = r.u16()? as usize;
            let reader_id = r.entity()?;
            let writer_id = r.entity()?;
            let writer_sn = r.sn()?;
            // octetsToInlineQos counts from the byte after itself.
            let skip = octets_to_qos
                .checked_sub(OCTETS_TO_INLINE_QOS as usize)
                .ok_or(RtpsError::MalformedSubmessage("octetsToInlineQos below 16"))?;
            r.take(skip)?;
            let inline_qos = if flags & flag::DATA_INLINE_QOS != 0 {
                let len = parameter_list_len(&body[r.pos..], endianness)?;
                Some(r.take(len)?.to_vec())
            } else {
                None
            };
            let serialized_payload = if flags & flag::DATA_PAYLOAD != 0 {
                Some(r.rest().to_vec())
            } else {
                None
            };
            Submessage::Data(Data {
                endianness,
                reader_id,
                writer_id,
                writer_sn,
                inline_qos,
                serialized_payload,
            })
        }
        id::INFO_TS => {
            let timestamp = if flags & flag::INFO_TS_INVALIDATE != 0 {
                None
            } else {
                Some(Time {
                    seconds: r.u32()?,
                    fraction: r.u32()?,
                })
            };
            Submessage::InfoTimestamp(InfoTimestamp {
                endianness,
                timestamp,
            })
        }
        id::HEARTBEAT => Submessage::Heartbeat(Heartbeat {
            endianness,
            final_flag: flags & flag::FINAL != 0,
            liveliness_flag: flags & flag::LIVELINESS != 0,
            reader_id: r.entity()?,
            writer_id: r.entity()?,
            first_sn: r.sn()?,
            last_sn: r.sn()?,
            count: r.u32()?,
        }),
        id::ACKNACK => {
            let reader_id = r.entity()?;
            let writer_id = r.entity()?;
            let base = r.sn()?;
            let num_bits = r.u32()?;
            if num_bits > 256 {
                return Err(RtpsError::MalformedSubmessage(
                    "SequenceNumberSet over 256 bits",
                ));
            }
            let bitmap = (0..num_bits.div_ceil(32))
                .map(|_| r.u32())
                .collect::<Result<Vec<_>, _>>()?;
            Submessage::AckNack(AckNack {
                endianness,
                final_flag: flags & flag::FINAL != 0,
                reader_id,
                writer_id,
                reader_sn_state: SequenceNumberSet {
                    base,
                    num_bits,
                    bitmap,
                },
                count: r.u32()?,
            })
        }
        id::INFO_DST => Submessage::InfoDestination(InfoDestination {
            endianness,
            guid_prefix: GuidPrefix(r.take(12)?.try_into().unwrap()),
        }),
        other => Submessage::Unknown(UnknownSubmessage {
            id: other,
            flags,
            body: body.to_vec(),
        }),
    };
    Ok(sm)
}

/// Parses a datagram. Unknown submessage ids are kept as
/// [`Submessage::Unknown`] and skipped by their length field.
pub fn decode_message(bytes: &[u8]) -> Result<RtpsMessage, RtpsError> {
    let header = RtpsHeader::parse(bytes)?;
    let mut submessages = Vec::new();
    let mut pos = HEADER_LEN;
    while pos < bytes.len() {
        if bytes.len() - pos < SUBMESSAGE_HEADER_LEN {
            return Err(RtpsError::TruncatedSubmessage { offset: pos });
        }
        let id = bytes[pos];
        let flags = bytes[pos + 1];
        let octets =
            Endianness::from_flag(flags).u16_from_bytes([bytes[pos + 2], bytes[pos + 3]]) as usize;
        let start = pos + SUBMESSAGE_HEADER_LEN;
        // Zero length on anything but INFO_TS/PAD means "extends to the end".
        let end = if octets == 0 && id != id::INFO_TS && id != id::PAD {
            bytes.len()
        } else {
            start + octets
        };
        if end > bytes.len() {
            return Err(RtpsError::TruncatedSubmessage { offset: pos });
        }
        submessages.push(decode_body(id, flags, &bytes[start..end])?);
        pos = end;
    }
    if submessages.is_empty() {
        return Err(RtpsError::EmptyMessage);
    }
    Ok(RtpsMessage {
        header,
        submessages,
    })
}
