//! Deterministic loopback pair on a shared virtual clock.
//!
//! A datagram sent at virtual time `t` becomes receivable by the peer at
//! exactly `t + one_way_ns`. Receiving advances the clock to the delivery
//! time; waiting with nothing pending advances it by the full wait.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use super::{check_size, Datagram, Locator, StageLatencyModel, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub sent_ns: u64,
    pub delivered_ns: u64,
    pub source: Locator,
    pub dest: Locator,
    pub bytes: Vec<u8>,
}

#[derive(Debug)]
struct Pending {
    dest: Locator,
    datagram: Datagram,
    sent_ns: u64,
}

#[derive(Debug)]
struct Network {
    now_ns: u64,
    one_way_ns: u64,
    /// Keyed by (delivery time, insertion index).
    queue: BTreeMap<(u64, u64), Pending>,
    next_index: u64,
    endpoints: [Locator; 2],
    trace: Option<Vec<TraceRecord>>,
}

/// Read access to the shared virtual time.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    net: Arc<Mutex<Network>>,
}

impl VirtualClock {
    pub fn now_ns(&self) -> u64 {
        lock(&self.net).now_ns
    }

    pub fn one_way_ns(&self) -> u64 {
        lock(&self.net).one_way_ns
    }

    /// Recorded deliveries, if tracing was enabled.
    pub fn trace(&self) -> Option<Vec<TraceRecord>> {
        lock(&self.net).trace.clone()
    }
}

fn lock(net: &Mutex<Network>) -> MutexGuard<'_, Network> {
    net.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug)]
pub struct VirtualEndpoint {
    net: Arc<Mutex<Network>>,
    local: Locator,
    closed: bool,
}

impl VirtualEndpoint {
    pub fn clock(&self) -> VirtualClock {
        VirtualClock {
            net: Arc::clone(&self.net),
        }
    }

    /// Records every datagram on the shared network from now on.
    pub fn enable_trace(&self) {
        lock(&self.net).trace.get_or_insert_with(Vec::new);
    }
}

/// Builds a connected pair (`10.0.0.1:7400`, `10.0.0.2:7400`). The seed is
/// the initial virtual time in nanoseconds.
pub fn virtual_loopback(
    model: &StageLatencyModel,
    seed: u64,
) -> Result<(VirtualEndpoint, VirtualEndpoint), TransportError> {
    let one_way_ns = model.one_way_ns();
    let endpoints = [
        Locator::udpv4([10, 0, 0, 1], 7400),
        Locator::udpv4([10, 0, 0, 2], 7400),
    ];
    let net = Arc::new(Mutex::new(Network {
        now_ns: seed,
        one_way_ns,
        queue: BTreeMap::new(),
        next_index: 0,
        endpoints,
        trace: None,
    }));
    let a = VirtualEndpoint {
        net: Arc::clone(&net),
        local: endpoints[0],
        closed: false,
    };
    let b = VirtualEndpoint {
        net,
        local: endpoints[1],
        closed: false,
    };
    Ok((a, b))
}

impl Transport for VirtualEndpoint {
    fn local_locator(&self) -> Locator {
        self.local
    }

    fn send(&mut self, dest: &Locator, datagram: &[u8]) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        check_size(datagram)?;
        let mut net = lock(&self.net);
        // Datagrams to addresses outside the pair vanish, as on a real wire.
        if !net.endpoints.contains(dest) {
            return Ok(());
        }
        let sent_ns = net.now_ns;
        let at = sent_ns + net.one_way_ns;
        let index = net.next_index;
        net.next_index += 1;
        net.queue.insert(
            (at, index),
            Pending {
                dest: *dest,
                datagram: Datagram {
                    source: self.local,
                    bytes: datagram.to_vec(),
                },
                sent_ns,
            },
        );
        Ok(())
    }

    fn recv(&mut self, max_wait: Duration) -> Result<Option<Datagram>, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let mut net = lock(&self.net);
        let wait_ns = u64::try_from(max_wait.as_nanos()).unwrap_or(u64::MAX);
        let deadline = net.now_ns.saturating_add(wait_ns);
        let key = net
            .queue
            .iter()
            .find(|(_, p)| p.dest == self.local)
            .map(|(k, _)| *k)
            .filter(|(at, _)| *at <= deadline);
        let Some(key) = key else {
            net.now_ns = deadline;
            return Ok(None);
        };
        let pending = net.queue.remove(&key).expect("key was just found");
        net.now_ns = net.now_ns.max(key.0);
        if let Some(trace) = net.trace.as_mut() {
            trace.push(TraceRecord {
                sent_ns: pending.sent_ns,
                delivered_ns: key.0,
                source: pending.datagram.source,
                dest: pending.dest,
                bytes: pending.datagram.bytes.clone(),
            });
        }
        Ok(Some(pending.datagram))
    }

    fn now_ns(&self) -> u64 {
        lock(&self.net).now_ns
    }

    fn close(&mut self) {
        self.closed = true;
    }

    fn is_closed(&self) -> bool {
        self.closed
    }
}
