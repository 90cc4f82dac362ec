//! RTPS wire model and best-effort endpoints.
//!
//! Supports DATA, INFO_TS, INFO_DST, HEARTBEAT and ACKNACK; everything else
//! decodes as an opaque unknown submessage. No discovery: writers and readers
//! are matched statically by GUID.

mod endpoint;
mod message;
mod types;

use thiserror::Error;

pub use endpoint::{
    BestEffortReader, BestEffortWriter, ReaderDiagnostics, Sample, WriterProxyState,
};
pub use message::{
    decode_message, encode_message, encode_message_into, id, AckNack, Data, Heartbeat,
    InfoDestination, InfoTimestamp, RtpsHeader, RtpsMessage, SequenceNumberSet, Submessage,
    UnknownSubmessage, HEADER_LEN, MAGIC, MAX_BODY_LEN, SUBMESSAGE_HEADER_LEN,
};
pub use types::{
    kind, EntityId, EntityKind, Guid, GuidPrefix, ProtocolVersion, SequenceNumber, Time, VendorId,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RtpsError {
    #[error("bad magic {0:02x?}, expected \"RTPS\"")]
    BadMagic([u8; 4]),
    #[error("message shorter than the RTPS header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("submessage at offset {offset} runs past the end of the message")]
    TruncatedSubmessage { offset: usize },
    #[error("malformed submessage: {0}")]
    MalformedSubmessage(&'static str),
    #[error("submessage body of {0} bytes exceeds the 16-bit length field")]
    UnrepresentableLength(usize),
    #[error("message has no submessages")]
    EmptyMessage,
    #[error("writer has no destination locators")]
    NoDestinations,
    #[error("invalid GUID text {0:?}")]
    InvalidGuid(String),
}
