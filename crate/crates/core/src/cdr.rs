//! CDR (Common Data Representation) encoding for RTPS serialized payloads.
//!
//! Only plain CDR (XCDR1) is supported: aligned primitives, strings and raw
//! byte runs, plus the ping payload used by the latency harness. Alignment is
//! relative to the CDR stream origin, which is the first byte after the
//! 4-byte encapsulation header.

use thiserror::Error;

/// Size of the encapsulation header that prefixes every serialized payload.
pub const ENCAPSULATION_LEN: usize = 4;

const CDR_BE: [u8; 2] = [0x00, 0x00];
const CDR_LE: [u8; 2] = [0x00, 0x01];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CdrError {
    #[error("buffer exhausted: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("unknown encapsulation identifier {0:#06x}")]
    UnknownEncapsulation(u16),
    #[error("string contains an embedded NUL")]
    EmbeddedNul,
    #[error("string is not NUL terminated")]
    MissingNul,
    #[error("string is not valid UTF-8")]
    InvalidUtf8,
}

pub type Result<T> = std::result::Result<T, CdrError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Endianness {
    #[default]
    LittleEndian,
    BigEndian,
}

impl Endianness {
    /// Value of the RTPS submessage E flag for this byte order.
    pub fn flag(self) -> u8 {
        match self {
            Endianness::LittleEndian => 1,
            Endianness::BigEndian => 0,
        }
    }

    pub fn from_flag(flags: u8) -> Self {
        if flags & 1 == 1 {
            Endianness::LittleEndian
        } else {
            Endianness::BigEndian
        }
    }

    pub fn u16_to_bytes(self, v: u16) -> [u8; 2] {
        match self {
            Endianness::LittleEndian => v.to_le_bytes(),
            Endianness::BigEndian => v.to_be_bytes(),
        }
    }

    pub fn u16_from_bytes(self, b: [u8; 2]) -> u16 {
        match self {
            Endianness::LittleEndian => u16::from_le_bytes(b),
            Endianness::BigEndian => u16::from_be_bytes(b),
        }
    }
}

/// The 4-byte representation identifier + options prefix.
///
/// The two low bits of `options` carry the number of trailing padding bytes
/// appended to bring the payload to a 4-byte multiple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encapsulation {
    pub endianness: Endianness,
    pub options: u16,
}

impl Encapsulation {
    pub fn new(endianness: Endianness) -> Self {
        Self {
            endianness,
            options: 0,
        }
    }

    pub fn padding(&self) -> usize {
        usize::from(self.options & 0b11)
    }

    pub fn to_bytes(self) -> [u8; 4] {
        let id = match self.endianness {
            Endianness::LittleEndian => CDR_LE,
            Endianness::BigEndian => CDR_BE,
        };
        let options = self.options.to_be_bytes();
        [id[0], id[1], options[0], options[1]]
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < ENCAPSULATION_LEN {
            return Err(CdrError::Truncated {
                offset: 0,
                needed: ENCAPSULATION_LEN,
                available: bytes.len(),
            });
        }
        let endianness = match [bytes[0], bytes[1]] {
            CDR_LE => Endianness::LittleEndian,
            CDR_BE => Endianness::BigEndian,
            other => return Err(CdrError::UnknownEncapsulation(u16::from_be_bytes(other))),
        };
        Ok(Self {
            endianness,
            options: u16::from_be_bytes([bytes[2], bytes[3]]),
        })
    }
}

pub fn encode_encapsulation(endianness: Endianness) -> [u8; 4] {
    Encapsulation::new(endianness).to_bytes()
}

pub fn decode_encapsulation(bytes: &[u8]) -> Result<Endianness> {
    Encapsulation::parse(bytes).map(|e| e.endianness)
}

/// A fixed-size value with a natural CDR alignment equal to its size.
pub trait Primitive: Copy {
    const SIZE: usize;
    fn put(self, endianness: Endianness, out: &mut Vec<u8>);
    fn get(endianness: Endianness, bytes: &[u8]) -> Self;
}

macro_rules! impl_primitive {
    ($($t:ty),*) => {$(
        impl Primitive for $t {
            const SIZE: usize = std::mem::size_of::<$t>();

            fn put(self, endianness: Endianness, out: &mut Vec<u8>) {
                match endianness {
                    Endianness::LittleEndian => out.extend_from_slice(&self.to_le_bytes()),
                    Endianness::BigEndian => out.extend_from_slice(&self.to_be_bytes()),
                }
            }

            fn get(endianness: Endianness, bytes: &[u8]) -> Self {
                let raw = bytes.try_into().expect("caller sliced exactly SIZE bytes");
                match endianness {
                    Endianness::LittleEndian => <$t>::from_le_bytes(raw),
                    Endianness::BigEndian => <$t>::from_be_bytes(raw),
                }
            }
        }
    )*};
}

impl_primitive!(u8, i8, u16, i16, u32, i32, u64, i64, f32, f64);

impl Primitive for bool {
    const SIZE: usize = 1;

    fn put(self, _: Endianness, out: &mut Vec<u8>) {
        out.push(u8::from(self));
    }

    fn get(_: Endianness, bytes: &[u8]) -> Self {
        bytes[0] != 0
    }
}

fn padding_for(cursor: usize, align: usize) -> usize {
    (align - cursor % align) % align
}

/// Append-only CDR encoder.
#[derive(Debug, Clone)]
pub struct CdrWriter {
    bytes: Vec<u8>,
    origin: usize,
    endianness: Endianness,
}

impl CdrWriter {
    /// Starts a payload: writes the encapsulation header and places the
    /// alignment origin right after it.
    pub fn new(endianness: Endianness) -> Self {
        let mut bytes = Vec::with_capacity(64);
        bytes.extend_from_slice(&encode_encapsulation(endianness));
        Self {
            bytes,
            origin: ENCAPSULATION_LEN,
            endianness,
        }
    }

    /// A bare CDR stream with no encapsulation header.
    pub fn raw(endianness: Endianness) -> Self {
        Self {
            bytes: Vec::new(),
            origin: 0,
            endianness,
        }
    }

    pub fn endianness(&self) -> Endianness {
        self.endianness
    }

    /// Offset from the CDR stream origin.
    pub fn cursor(&self) -> usize {
        self.bytes.len() - self.origin
    }

    pub fn align(&mut self, n: usize) {
        let pad = padding_for(self.cursor(), n);
        self.bytes.resize(self.bytes.len() + pad, 0);
    }

    pub fn write<T: Primitive>(&mut self, value: T) -> &mut Self {
        self.align(T::SIZE);
        value.put(self.endianness, &mut self.bytes);
        self
    }

    pub fn write_string(&mut self, s: &str) -> Result<&mut Self> {
        if s.as_bytes().contains(&0) {
            return Err(CdrError::EmbeddedNul);
        }
        let len = u32::try_from(s.len() + 1).expect("string length fits in u32");
        self.write(len);
        self.bytes.extend_from_slice(s.as_bytes());
        self.bytes.push(0);
        Ok(self)
    }

    /// Raw octets, no length prefix and no alignment.
    pub fn write_bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.bytes.extend_from_slice(bytes);
        self
    }

    /// Pads the whole payload to a 4-byte multiple and records the pad count
    /// in the encapsulation options.
    pub fn finish(mut self) -> Vec<u8> {
        if self.origin == ENCAPSULATION_LEN {
            let pad = padding_for(self.bytes.len(), 4);
            self.bytes.resize(self.bytes.len() + pad, 0);
            self.bytes[3] = (self.bytes[3] & !0b11) | pad as u8;
        }
        self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Borrowing CDR decoder, the exact inverse of [`CdrWriter`].
#[derive(Debug, Clone)]
pub struct CdrReader<'a> {
    bytes: &'a [u8],
    origin: usize,
    pos: usize,
    end: usize,
    endianness: Endianness,
}

impl<'a> CdrReader<'a> {
    /// Parses the encapsulation header. Trailing padding announced in the
    /// options field is excluded from the readable range.
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let encapsulation = Encapsulation::parse(bytes)?;
        let end = bytes
            .len()
            .saturating_sub(encapsulation.padding())
            .max(ENCAPSULATION_LEN);
        Ok(Self {
            bytes,
            origin: ENCAPSULATION_LEN,
            pos: ENCAPSULATION_LEN,
            end,
            endianness: encapsulation.endianness,
        })
    }

    pub fn raw(bytes: &'a [u8], endianness: Endianness) -> Self {
        Self {
            bytes,
            origin: 0,
            pos: 0,
            end: bytes.len(),
            endianness,
        }
    }

    pub fn endianness(&self) -> Endianness {
        self.endianness
    }

    pub fn cursor(&self) -> usize {
        self.pos - self.origin
    }

    pub fn remaining(&self) -> usize {
        self.end - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(CdrError::Truncated {
                offset: self.cursor(),
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn align(&mut self, n: usize) -> Result<()> {
        let pad = padding_for(self.cursor(), n);
        self.take(pad).map(|_| ())
    }

    pub fn read<T: Primitive>(&mut self) -> Result<T> {
        self.align(T::SIZE)?;
        let raw = self.take(T::SIZE)?;
        Ok(T::get(self.endianness, raw))
    }

    pub fn read_string(&mut self) -> Result<String> {
        let len = self.read::<u32>()? as usize;
        let raw = self.take(len)?;
        match raw.split_last() {
            Some((0, body)) => {
                if body.contains(&0) {
                    return Err(CdrError::EmbeddedNul);
                }
                String::from_utf8(body.to_vec()).map_err(|_| CdrError::InvalidUtf8)
            }
            _ => Err(CdrError::MissingNul),
        }
    }

    pub fn read_bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn read_rest(&mut self) -> &'a [u8] {
        let out = &self.bytes[self.pos..self.end];
        self.pos = self.end;
        out
    }
}

/// The ping-pong benchmark message: a counter, the sender's monotonic send
/// time, and an optional padding run used to sweep message sizes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PingPayload {
    pub sequence: u64,
    pub send_timestamp_ns: u64,
    pub padding: Vec<u8>,
}

impl PingPayload {
    pub fn new(sequence: u64, send_timestamp_ns: u64, padding_len: usize) -> Self {
        Self {
            sequence,
            send_timestamp_ns,
            padding: vec![0; padding_len],
        }
    }

    /// Serialized size including encapsulation and trailing alignment.
    pub fn serialized_len(padding_len: usize) -> usize {
        let raw = ENCAPSULATION_LEN + 16 + padding_len;
        raw + padding_for(raw, 4)
    }

    pub fn serialize(&self, endianness: Endianness) -> Vec<u8> {
        let mut w = CdrWriter::new(endianness);
        w.write(self.sequence)
            .write(self.send_timestamp_ns)
            .write_bytes(&self.padding);
        w.finish()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut r = CdrReader::new(bytes)?;
        let sequence = r.read()?;
        let send_timestamp_ns = r.read()?;
        let padding = r.read_rest().to_vec();
        Ok(Self {
            sequence,
            send_timestamp_ns,
            padding,
        })
    }
}

pub fn serialize_ping_payload(p: &PingPayload, endianness: Endianness) -> Vec<u8> {
    p.serialize(endianness)
}

pub fn deserialize_ping_payload(bytes: &[u8]) -> Result<PingPayload> {
    PingPayload::deserialize(bytes)
}
