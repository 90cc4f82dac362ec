//! Best-effort writer and reader with static matching.

use std::collections::{BTreeMap, BTreeSet};

use crate::cdr::Endianness;
use crate::transport::Locator;

use super::message::{decode_message, Data, InfoTimestamp, RtpsHeader, RtpsMessage, Submessage};
use super::types::{EntityId, Guid, GuidPrefix, SequenceNumber, Time};
use super::RtpsError;

#[derive(Debug, Clone)]
pub struct BestEffortWriter {
    guid: Guid,
    header: RtpsHeader,
    destinations: Vec<Locator>,
    next_sequence_number: SequenceNumber,
    endianness: Endianness,
}

impl BestEffortWriter {
    pub fn new(guid: Guid, destinations: Vec<Locator>) -> Self {
        Self {
            guid,
            header: RtpsHeader::new(guid.prefix),
            destinations,
            next_sequence_number: SequenceNumber(1),
            endianness: Endianness::LittleEndian,
        }
    }

    /// Overrides protocol version / vendor id stamped in outgoing headers.
    pub fn with_header(mut self, header: RtpsHeader) -> Self {
        self.header = RtpsHeader {
            guid_prefix: self.guid.prefix,
            ..header
        };
        self
    }

    pub fn guid(&self) -> Guid {
        self.guid
    }

    pub fn destinations(&self) -> &[Locator] {
        &self.destinations
    }

    pub fn next_sequence_number(&self) -> SequenceNumber {
        self.next_sequence_number
    }

    /// Number of changes produced so far.
    pub fn produced(&self) -> u64 {
        (self.next_sequence_number.0 - 1) as u64
    }

    /// Wraps an already encapsulated payload into `INFO_TS + DATA`.
    pub fn produce(
        &mut self,
        payload: Vec<u8>,
        now_ns: u64,
    ) -> Result<(RtpsMessage, &[Locator]), RtpsError> {
        if self.destinations.is_empty() {
            return Err(RtpsError::NoDestinations);
        }
        let sn = self.next_sequence_number;
        self.next_sequence_number = SequenceNumber(sn.0 + 1);
        let message = RtpsMessage {
            header: self.header,
            submessages: vec![
                Submessage::InfoTimestamp(InfoTimestamp {
                    endianness: self.endianness,
                    timestamp: Some(Time::from_nanos(now_ns)),
                }),
                Submessage::Data(Data {
                    endianness: self.endianness,
                    reader_id: EntityId::UNKNOWN,
                    writer_id: self.guid.entity_id,
                    writer_sn: sn,
                    inline_qos: None,
                    serialized_payload: Some(payload),
                }),
            ],
        };
        Ok((message, &self.destinations))
    }
}

/// A delivered change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub writer: Guid,
    pub sequence: SequenceNumber,
    pub source_timestamp: Option<Time>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriterProxyState {
    pub highest_seen: i64,
    pub delivered: u64,
    pub lost: u64,
    pub duplicates: u64,
}

/// Read-only snapshot of a reader's counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ReaderDiagnostics {
    pub delivered: u64,
    pub lost: u64,
    /// Duplicates and older-than-highest samples, both dropped.
    pub duplicates: u64,
    pub malformed: u64,
    pub unknown_submessages: u64,
    pub unmatched: u64,
}

#[derive(Debug, Clone)]
pub struct BestEffortReader {
    guid: Guid,
    matched: BTreeSet<Guid>,
    proxies: BTreeMap<Guid, WriterProxyState>,
    diagnostics: ReaderDiagnostics,
}

impl BestEffortReader {
    pub fn new(guid: Guid, matched_writers: impl IntoIterator<Item = Guid>) -> Self {
        let matched: BTreeSet<Guid> = matched_writers.into_iter().collect();
        let proxies = matched
            .iter()
            .map(|g| (*g, WriterProxyState::default()))
            .collect();
        Self {
            guid,
            matched,
            proxies,
            diagnostics: ReaderDiagnostics::default(),
        }
    }

    pub fn guid(&self) -> Guid {
        self.guid
    }

    pub fn match_writer(&mut self, writer: Guid) {
        if self.matched.insert(writer) {
            self.proxies.insert(writer, WriterProxyState::default());
        }
    }

    pub fn is_matched(&self, writer: &Guid) -> bool {
        self.matched.contains(writer)
    }

    pub fn diagnostics(&self) -> ReaderDiagnostics {
        self.diagnostics
    }

    pub fn writer_state(&self, writer: &Guid) -> Option<WriterProxyState> {
        self.proxies.get(writer).copied()
    }

    pub fn note_malformed(&mut self) {
        self.diagnostics.malformed += 1;
    }

    /// Decodes and consumes a raw datagram. Decode failures are counted.
    pub fn consume_datagram(&mut self, bytes: &[u8]) -> Vec<Sample> {
        match decode_message(bytes) {
            Ok(m) => self.consume(&m),
            Err(_) => {
                self.note_malformed();
                Vec::new()
            }
        }
    }

    pub fn consume(&mut self, m: &RtpsMessage) -> Vec<Sample> {
        let mut out = Vec::new();
        self.consume_with(m, |s| out.push(s));
        out
    }

    /// Delivers in-order, non-duplicate samples from matched writers to
    /// `deliver`. Never fails; anomalies only move counters.
    pub fn consume_with(&mut self, m: &RtpsMessage, mut deliver: impl FnMut(Sample)) {
        let source = m.header.guid_prefix;
        let mut timestamp = None;
        let mut addressed_to_us = true;
        for sm in &m.submessages {
            match sm {
                Submessage::InfoTimestamp(ts) => timestamp = ts.timestamp,
                Submessage::InfoDestination(dst) => {
                    addressed_to_us = dst.guid_prefix == GuidPrefix::UNKNOWN
                        || dst.guid_prefix == self.guid.prefix;
                }
                Submessage::Data(d) => {
                    if !addressed_to_us {
                        continue;
                    }
                    if d.reader_id != EntityId::UNKNOWN && d.reader_id != self.guid.entity_id {
                        continue;
                    }
                    let writer = Guid::new(source, d.writer_id);
                    let Some(proxy) = self.proxies.get_mut(&writer) else {
                        self.diagnostics.unmatched += 1;
                        continue;
                    };
                    let Some(payload) = &d.serialized_payload else {
                        self.diagnostics.malformed += 1;
                        continue;
                    };
                    let sn = d.writer_sn.0;
                    if sn < 1 {
                        self.diagnostics.malformed += 1;
                        continue;
                    }
                    if sn <= proxy.highest_seen {
                        proxy.duplicates += 1;
                        self.diagnostics.duplicates += 1;
                        continue;
                    }
                    let gap = (sn - proxy.highest_seen - 1) as u64;
                    proxy.lost += gap;
                    self.diagnostics.lost += gap;
                    proxy.highest_seen = sn;
                    proxy.delivered += 1;
                    self.diagnostics.delivered += 1;
                    deliver(Sample {
                        writer,
                        sequence: d.writer_sn,
                        source_timestamp: timestamp,
                        payload: payload.clone(),
                    });
                }
                Submessage::Heartbeat(_) | Submessage::AckNack(_) => {}
                Submessage::Unknown(_) => self.diagnostics.unknown_submessages += 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtps::message::{encode_message, InfoDestination};

    fn writer_guid() -> Guid {
        Guid::new(GuidPrefix::new(1, 1, 0), EntityId::user_writer(1))
    }

    fn reader() -> BestEffortReader {
        BestEffortReader::new(
            Guid::new(GuidPrefix::new(1, 2, 0), EntityId::user_reader(1)),
            [writer_guid()],
        )
    }

    fn writer() -> BestEffortWriter {
        BestEffortWriter::new(writer_guid(), vec![Locator::udpv4([127, 0, 0, 1], 7400)])
    }

    fn seq(m: &RtpsMessage) -> i64 {
        match &m.submessages[1] {
            Submessage::Data(d) => d.writer_sn.0,
            _ => panic!("expected DATA"),
        }
    }

    #[test]
    fn sequence_numbers_start_at_one() {
        let mut w = writer();
        let (m, _) = w.produce(vec![0, 1, 0, 0], 0).unwrap();
        match &m.submessages[1] {
            Submessage::Data(d) => {
                assert_eq!((d.writer_sn.high(), d.writer_sn.low()), (0, 1));
                assert_eq!(d.reader_id, EntityId::UNKNOWN);
            }
            _ => panic!(),
        }
        let s: Vec<_> = (0..2)
            .map(|_| seq(&w.produce(vec![], 0).unwrap().0))
            .collect();
        assert_eq!(s, vec![2, 3]);
        assert_eq!(w.produced(), 3);
    }

    #[test]
    fn info_ts_from_now() {
        let mut w = writer();
        let (m, _) = w.produce(vec![], 1_000_000_000).unwrap();
        assert_eq!(
            m.submessages[0],
            Submessage::InfoTimestamp(InfoTimestamp {
                endianness: Endianness::LittleEndian,
                timestamp: Some(Time {
                    seconds: 1,
                    fraction: 0
                })
            })
        );
        let (m, _) = w.produce(vec![], 500_000_000).unwrap();
        match m.submessages[0] {
            Submessage::InfoTimestamp(t) => {
                assert_eq!(
                    t.timestamp,
                    Some(Time {
                        seconds: 0,
                        fraction: 0x8000_0000
                    })
                )
            }
            _ => panic!(),
        }
    }

    #[test]
    fn no_destinations() {
        let mut w = BestEffortWriter::new(writer_guid(), vec![]);
        assert!(matches!(
            w.produce(vec![], 0),
            Err(RtpsError::NoDestinations)
        ));
        assert_eq!(w.produced(), 0);
    }

    fn run(seqs: &[i64]) -> (Vec<i64>, ReaderDiagnostics) {
        let mut w = writer();
        let mut r = reader();
        let mut produced: Vec<RtpsMessage> = Vec::new();
        let max = *seqs.iter().max().unwrap();
        for _ in 0..max {
            produced.push(w.produce(vec![0, 1, 0, 0], 0).unwrap().0);
        }
        let mut delivered = Vec::new();
        for s in seqs {
            for sample in r.consume(&produced[(*s - 1) as usize]) {
                delivered.push(sample.sequence.0);
            }
        }
        (delivered, r.diagnostics())
    }

    #[test]
    fn in_order_delivery() {
        let (d, diag) = run(&[1, 2, 3]);
        assert_eq!(d, vec![1, 2, 3]);
        assert_eq!(diag.lost, 0);
    }

    #[test]
    fn gap_counts_losses() {
        let (d, diag) = run(&[1, 3]);
        assert_eq!(d, vec![1, 3]);
        assert_eq!(diag.lost, 1);
    }

    #[test]
    fn duplicates_and_stale_are_dropped() {
        let (d, diag) = run(&[1, 2, 2]);
        assert_eq!(d, vec![1, 2]);
        assert_eq!(diag.duplicates, 1);
        let (d, diag) = run(&[1, 3, 2]);
        assert_eq!(d, vec![1, 3]);
        assert_eq!((diag.lost, diag.duplicates), (1, 1));
    }

    #[test]
    fn unmatched_writer_is_ignored() {
        let mut other = BestEffortWriter::new(
            Guid::new(GuidPrefix::new(9, 9, 9), EntityId::user_writer(1)),
            vec![Locator::udpv4([127, 0, 0, 1], 7400)],
        );
        let mut r = reader();
        assert!(r
            .consume(&other.produce(vec![0, 1, 0, 0], 0).unwrap().0)
            .is_empty());
        assert_eq!(r.diagnostics().unmatched, 1);
        assert_eq!(r.diagnostics().delivered, 0);
    }

    #[test]
    fn info_dst_filters_by_prefix() {
        let mut w = writer();
        let mut r = reader();
        let (mut m, _) = w.produce(vec![0, 1, 0, 0], 0).unwrap();
        m.submessages.insert(
            0,
            Submessage::InfoDestination(InfoDestination {
                endianness: Endianness::LittleEndian,
                guid_prefix: GuidPrefix::new(5, 5, 5),
            }),
        );
        assert!(r.consume(&m).is_empty());
        m.submessages[0] = Submessage::InfoDestination(InfoDestination {
            endianness: Endianness::LittleEndian,
            guid_prefix: r.guid().prefix,
        });
        assert_eq!(r.consume(&m).len(), 1);
    }

    #[test]
    fn addressed_to_other_reader_is_skipped() {
        let mut w = writer();
        let mut r = reader();
        let (mut m, _) = w.produce(vec![0, 1, 0, 0], 0).unwrap();
        if let Submessage::Data(d) = &mut m.submessages[1] {
            d.reader_id = EntityId::user_reader(77);
        }
        assert!(r.consume(&m).is_empty());
    }

    #[test]
    fn malformed_datagrams_are_counted() {
        let mut r = reader();
        assert!(r.consume_datagram(b"RTPXgarbage").is_empty());
        assert!(r.consume_datagram(&[]).is_empty());
        assert_eq!(r.diagnostics().malformed, 2);
        let mut w = writer();
        let bytes = encode_message(&w.produce(vec![0, 1, 0, 0], 0).unwrap().0).unwrap();
        assert_eq!(r.consume_datagram(&bytes).len(), 1);
    }

    #[test]
    fn delivered_sample_carries_timestamp() {
        let mut w = writer();
        let mut r = reader();
        let (m, _) = w.produce(vec![0, 1, 0, 0], 1_500_000_000).unwrap();
        let s = r.consume(&m).pop().unwrap();
        assert_eq!(s.writer, writer_guid());
        assert_eq!(s.source_timestamp.unwrap().to_nanos(), 1_500_000_000);
        assert_eq!(s.payload, vec![0, 1, 0, 0]);
    }
}
