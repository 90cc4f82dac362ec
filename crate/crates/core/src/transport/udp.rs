use std::io::ErrorKind;
use std::net::UdpSocket;
use std::sync::OnceLock;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::{check_size, Datagram, Locator, Transport, TransportError};

fn anchor() -> Instant {
    static ANCHOR: OnceLock<Instant> = OnceLock::new();
    *ANCHOR.get_or_init(Instant::now)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RecvMode {
    NonBlocking,
    Timeout(Duration),
}

/// Host UDP socket. All handles in a process share one monotonic anchor, so
/// `now_ns` values are comparable across handles.
#[derive(Debug)]
pub struct UdpTransport {
    socket: UdpSocket,
    local: Locator,
    mode: Option<RecvMode>,
    buf: Box<[u8]>,
    closed: bool,
}

impl UdpTransport {
    pub fn open(bind: Locator) -> Result<Self, TransportError> {
        let socket =
            UdpSocket::bind(bind.socket_addr()).map_err(|source| TransportError::BindFailed {
                locator: bind,
                source,
            })?;
        let local = socket
            .local_addr()
            .map_err(|source| TransportError::BindFailed {
                locator: bind,
                source,
            })
            .and_then(Locator::try_from)?;
        anchor();
        Ok(UdpTransport {
            socket,
            local,
            mode: None,
            buf: vec![0u8; 65536].into_boxed_slice(),
            closed: false,
        })
    }

    /// Binds an ephemeral port on 127.0.0.1.
    pub fn open_loopback() -> Result<Self, TransportError> {
        let socket =
            UdpSocket::bind("127.0.0.1:0").map_err(|source| TransportError::BindFailed {
                locator: Locator::udpv4([127, 0, 0, 1], 1),
                source,
            })?;
        let local = Locator::try_from(socket.local_addr().map_err(TransportError::RecvFailed)?)?;
        drop(socket);
        Self::open(local)
    }

    fn set_mode(&mut self, mode: RecvMode) -> Result<(), TransportError> {
        if self.mode == Some(mode) {
            return Ok(());
        }
        match mode {
            RecvMode::NonBlocking => self.socket.set_nonblocking(true),
            RecvMode::Timeout(d) => self
                .socket
                .set_nonblocking(false)
                .and_then(|_| self.socket.set_read_timeout(Some(d))),
        }
        .map_err(TransportError::RecvFailed)?;
        self.mode = Some(mode);
        Ok(())
    }
}

impl Transport for UdpTransport {
    fn local_locator(&self) -> Locator {
        self.local
    }

    fn send(&mut self, dest: &Locator, datagram: &[u8]) -> Result<(), TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        check_size(datagram)?;
        self.socket
            .send_to(datagram, dest.socket_addr())
            .map(|_| ())
            .map_err(|source| TransportError::SendFailed {
                dest: *dest,
                source,
            })
    }

    fn recv(&mut self, max_wait: Duration) -> Result<Option<Datagram>, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        // A zero read timeout means "block forever" to the OS.
        let mode = if max_wait.is_zero() {
            RecvMode::NonBlocking
        } else {
            RecvMode::Timeout(max_wait)
        };
        self.set_mode(mode)?;
        match self.socket.recv_from(&mut self.buf) {
            Ok((n, from)) => {
                let source = Locator::try_from(from)?;
                Ok(Some(Datagram {
                    source,
                    bytes: self.buf[..n].to_vec(),
                }))
            }
            Err(e)
                if matches!(
                    e.kind(),
                    ErrorKind::WouldBlock
                        | ErrorKind::TimedOut
                        | ErrorKind::Interrupted
                        | ErrorKind::ConnectionRefused
                        | ErrorKind::ConnectionReset
                ) =>
            {
                Ok(None)
            }
            Err(e) => Err(TransportError::RecvFailed(e)),
        }
    }

    fn now_ns(&self) -> u64 {
        anchor().elapsed().as_nanos() as u64
    }

    fn timestamp_ns(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
    }

    fn close(&mut self) {
        self.closed = true;
    }

    fn is_closed(&self) -> bool {
        self.closed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_send_recv() {
        let mut a = UdpTransport::open_loopback().unwrap();
        let mut b = UdpTransport::open_loopback().unwrap();
        a.send(&b.local_locator(), b"hello").unwrap();
        let got = b.recv(Duration::from_secs(2)).unwrap().unwrap();
        assert_eq!(got.bytes, b"hello");
        assert_eq!(got.source, a.local_locator());
    }

    #[test]
    fn recv_times_out() {
        let mut a = UdpTransport::open_loopback().unwrap();
        let t0 = Instant::now();
        assert!(a.recv(Duration::from_millis(1)).unwrap().is_none());
        assert!(t0.elapsed() < Duration::from_secs(1));
        assert!(a.recv(Duration::ZERO).unwrap().is_none());
    }

    #[test]
    fn oversized_datagram() {
        let mut a = UdpTransport::open_loopback().unwrap();
        let dest = a.local_locator();
        let big = vec![0u8; 65508];
        assert!(matches!(
            a.send(&dest, &big),
            Err(TransportError::DatagramTooLarge(65508))
        ));
    }

    #[test]
    fn bind_conflict() {
        let a = UdpTransport::open_loopback().unwrap();
        assert!(matches!(
            UdpTransport::open(a.local_locator()),
            Err(TransportError::BindFailed { .. })
        ));
    }

    #[test]
    fn closed_transport_refuses() {
        let mut a = UdpTransport::open_loopback().unwrap();
        let dest = a.local_locator();
        a.close();
        assert!(matches!(a.send(&dest, b"x"), Err(TransportError::Closed)));
        assert!(matches!(
            a.recv(Duration::ZERO),
            Err(TransportError::Closed)
        ));
    }
}
