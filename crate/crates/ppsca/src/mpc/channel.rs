//! Framed duplex channel shared by the MPC protocol and the server RPCs.
//!
//! Wire framing: 4-byte magic `PPS1`, u8 message type, u64 payload length,
//! payload. Integers are little-endian; matrices travel row-major as i64.
//! Every endpoint records a transcript of (direction, type, length, round).

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::mpsc::{channel, Receiver, Sender};

use super::MpcError;

pub const FRAME_MAGIC: &[u8; 4] = b"PPS1";

/// Message types of the framed protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    EpsDeltaOpen = 2,
    BatchHeader = 3,
    ResultShare = 4,
    Abort = 5,
    DbRequest = 6,
    DbReply = 7,
    BucketQuery = 8,
    BucketReply = 9,
    CountsRequest = 10,
    CountsReply = 11,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<MsgType> {
        Some(match b {
            1 => MsgType::Hello,
            2 => MsgType::EpsDeltaOpen,
            3 => MsgType::BatchHeader,
            4 => MsgType::ResultShare,
            5 => MsgType::Abort,
            6 => MsgType::DbRequest,
            7 => MsgType::DbReply,
            8 => MsgType::BucketQuery,
            9 => MsgType::BucketReply,
            10 => MsgType::CountsRequest,
            11 => MsgType::CountsReply,
            _ => return None,
        })
    }
}

/// Direction of one transcript entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// One wire message as seen by one endpoint. `payload_hash` fingerprints the
/// payload bytes so transcript equality implies byte equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub round: u32,
    pub dir: Direction,
    pub msg_type: u8,
    pub len: u64,
    pub payload_hash: u64,
}

fn fingerprint(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A frame-level duplex channel.
pub trait Channel {
    fn send(&mut self, msg: MsgType, payload: &[u8]) -> Result<(), MpcError>;
    fn recv(&mut self) -> Result<(MsgType, Vec<u8>), MpcError>;
    fn transcript(&self) -> &[TranscriptEntry];

    /// Receive a frame that must have the given type. An `Abort` frame is
    /// surfaced as an error carrying the peer's reason.
    fn recv_expect(&mut self, expected: MsgType) -> Result<Vec<u8>, MpcError> {
        let (ty, payload) = self.recv()?;
        if ty == MsgType::Abort {
            return Err(MpcError::Abort(
                String::from_utf8_lossy(&payload).into_owned(),
            ));
        }
        if ty != expected {
            return Err(MpcError::Protocol(format!(
                "expected {expected:?}, received {ty:?}"
            )));
        }
        Ok(payload)
    }

    /// Best-effort abort notification.
    fn abort(&mut self, reason: &str) {
        let _ = self.send(MsgType::Abort, reason.as_bytes());
    }
}

/// Framed channel over any byte stream (TCP sockets, in-memory pipes).
pub struct FramedChannel<S> {
    stream: S,
    transcript: Vec<TranscriptEntry>,
    round: u32,
}

impl<S: Read + Write> FramedChannel<S> {
    pub fn new(stream: S) -> FramedChannel<S> {
        FramedChannel {
            stream,
            transcript: Vec::new(),
            round: 0,
        }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> Channel for FramedChannel<S> {
    fn send(&mut self, msg: MsgType, payload: &[u8]) -> Result<(), MpcError> {
        let mut header = [0u8; 13];
        header[..4].copy_from_slice(FRAME_MAGIC);
        header[4] = msg as u8;
        header[5..].copy_from_slice(&(payload.len() as u64).to_le_bytes());
        self.stream.write_all(&header)?;
        self.stream.write_all(payload)?;
        self.stream.flush()?;
        self.round += 1;
        self.transcript.push(TranscriptEntry {
            round: self.round,
            dir: Direction::Sent,
            msg_type: msg as u8,
            len: payload.len() as u64,
            payload_hash: fingerprint(payload),
        });
        Ok(())
    }

    fn recv(&mut self) -> Result<(MsgType, Vec<u8>), MpcError> {
        let mut header = [0u8; 13];
        self.stream
            .read_exact(&mut header)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => MpcError::ChannelClosed,
                _ => MpcError::Io(e),
            })?;
        if &header[..4] != FRAME_MAGIC {
            return Err(MpcError::Protocol("bad frame magic".into()));
        }
        let ty = MsgType::from_byte(header[4])
            .ok_or_else(|| MpcError::Protocol(format!("unknown message type {}", header[4])))?;
        let len = u64::from_le_bytes(header[5..].try_into().unwrap()) as usize;
        let mut payload = vec![0u8; len];
        self.stream
            .read_exact(&mut payload)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => MpcError::ChannelClosed,
                _ => MpcError::Io(e),
            })?;
        self.round += 1;
        self.transcript.push(TranscriptEntry {
            round: self.round,
            dir: Direction::Received,
            msg_type: ty as u8,
            len: len as u64,
            payload_hash: fingerprint(&payload),
        });
        Ok((ty, payload))
    }

    fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }
}

/// In-memory byte pipe; a pair of these forms a duplex connection between
/// two threads.
pub struct DuplexPipe {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

/// Two connected pipe endpoints.
pub fn duplex_pair() -> (DuplexPipe, DuplexPipe) {
    let (tx_a, rx_b) = channel();
    let (tx_b, rx_a) = channel();
    (
        DuplexPipe {
            tx: tx_a,
            rx: rx_a,
            buf: VecDeque::new(),
        },
        DuplexPipe {
            tx: tx_b,
            rx: rx_b,
            buf: VecDeque::new(),
        },
    )
}

impl Read for DuplexPipe {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        while self.buf.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buf.extend(chunk),
                Err(_) => return Ok(0), // peer hung up
            }
        }
        let mut n = 0;
        while n < out.len() {
            match self.buf.pop_front() {
                Some(b) => {
                    out[n] = b;
                    n += 1;
                }
                None => break,
            }
        }
        Ok(n)
    }
}

impl Write for DuplexPipe {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        self.tx
            .send(data.to_vec())
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "peer hung up"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Little-endian u64 slice encoding for matrix payloads.
pub fn words_to_bytes(words: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 8);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

/// Inverse of [`words_to_bytes`].
pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u64>, MpcError> {
    if bytes.len() % 8 != 0 {
        return Err(MpcError::Protocol("payload not word-aligned".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
