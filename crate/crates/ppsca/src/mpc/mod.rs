//! Two-party additive secret sharing over the `Z_2^64` ring.
//!
//! Values are fixed-point encoded with [`FIXED_POINT_BITS`] fractional bits.
//! Addition of shares is local; multiplication consumes trusted-dealer Beaver
//! triples ([`triple`]) and one masked-open round over the framed [`channel`].
//! [`protocol`] builds the private embedding evaluation on top: the client
//! holds token tensors, the server holds the model, and only the client
//! learns the resulting embeddings.

pub mod channel;
pub mod protocol;
pub mod triple;

use rand::RngCore;

pub use channel::{duplex_pair, Channel, DuplexPipe, FramedChannel, MsgType, TranscriptEntry};
pub use protocol::{mpc_embed_client, mpc_embed_server, SessionParams};
pub use triple::{consumption_plan, dealer_generate, TripleFile, TripleShape, TripleShare, TripleStore};

/// Fractional bits of the fixed-point encoding.
pub const FIXED_POINT_BITS: u32 = 16;

/// Protocol version spoken by both parties.
pub const PROTOCOL_VERSION: u32 = 1;

/// MPC-stage failures.
#[derive(Debug, thiserror::Error)]
pub enum MpcError {
    #[error("beaver triple already consumed")]
    TripleReused,

    #[error("triple store exhausted")]
    TripleExhausted,

    #[error("triple shape mismatch: expected {expected}, got {got}")]
    TripleShapeMismatch { expected: String, got: String },

    #[error("triple file: {0}")]
    TripleFile(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("peer aborted: {0}")]
    Abort(String),

    #[error("channel closed")]
    ChannelClosed,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl MpcError {
    /// True for connectivity/protocol failures (process exit code 2).
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            MpcError::Protocol(_) | MpcError::Abort(_) | MpcError::ChannelClosed | MpcError::Io(_)
        )
    }
}

/// Party of a two-party session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Client,
    Server,
}

impl Party {
    pub fn index(self) -> usize {
        match self {
            Party::Client => 0,
            Party::Server => 1,
        }
    }

    pub fn as_byte(self) -> u8 {
        self.index() as u8
    }

    pub fn from_byte(b: u8) -> Option<Party> {
        match b {
            0 => Some(Party::Client),
            1 => Some(Party::Server),
            _ => None,
        }
    }
}

/// One party's additive share of a ring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub value: u64,
    pub party: Party,
}

/// Encode a real into the ring: `round(x * 2^f)` in two's complement form.
pub fn encode_fixed(x: f64) -> u64 {
    (x * f64::from(1u32 << FIXED_POINT_BITS)).round() as i64 as u64
}

/// Decode a ring element back to a real.
pub fn decode_fixed(v: u64) -> f64 {
    (v as i64) as f64 / f64::from(1u32 << FIXED_POINT_BITS)
}

/// Split `x` into two uniform additive shares.
pub fn share(x: u64, rng: &mut impl RngCore) -> (Share, Share) {
    let s0 = rng.next_u64();
    (
        Share {
            value: s0,
            party: Party::Client,
        },
        Share {
            value: x.wrapping_sub(s0),
            party: Party::Server,
        },
    )
}

/// Recombine the two parties' shares.
pub fn reconstruct(s0: Share, s1: Share) -> u64 {
    debug_assert_ne!(s0.party, s1.party);
    s0.value.wrapping_add(s1.value)
}

/// Local share addition; exchanges zero wire messages.
pub fn add_shares(a: Share, b: Share) -> Share {
    debug_assert_eq!(a.party, b.party);
    Share {
        value: a.value.wrapping_add(b.value),
        party: a.party,
    }
}

/// Recombine two share vectors.
pub fn reconstruct_vec(a: &[u64], b: &[u64]) -> Vec<u64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x.wrapping_add(*y)).collect()
}

/// Local share subtraction.
pub fn sub_shares(a: Share, b: Share) -> Share {
    debug_assert_eq!(a.party, b.party);
    Share {
        value: a.value.wrapping_sub(b.value),
        party: a.party,
    }
}

/// Local fixed-point rescale after a multiplication: the client
/// arithmetic-shifts its share; the server negates, shifts, negates. The
/// reconstructed value is within 1 ulp of the true quotient except with
/// probability < 2^-(64 - 2 - magnitude_bits).
pub fn truncate_share(s: Share, f: u32) -> Share {
    let value = match s.party {
        Party::Client => ((s.value as i64) >> f) as u64,
        Party::Server => (((s.value.wrapping_neg() as i64) >> f) as u64).wrapping_neg(),
    };
    Share { value, party: s.party }
}

/// Row-major ring matrix product (`m x k` times `k x n`).
pub fn ring_matmul(a: &[u64], b: &[u64], m: usize, k: usize, n: usize) -> Vec<u64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0u64; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, aik) in arow.iter().enumerate() {
            if *aik == 0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow.iter()) {
                *o = o.wrapping_add(aik.wrapping_mul(*bv));
            }
        }
    }
    out
}

pub(crate) fn ring_add_vec(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b.iter()).map(|(x, y)| x.wrapping_add(*y)).collect()
}

pub(crate) fn ring_sub_vec(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b.iter()).map(|(x, y)| x.wrapping_sub(*y)).collect()
}

pub(crate) fn ring_mul_vec(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b.iter()).map(|(x, y)| x.wrapping_mul(*y)).collect()
}

pub(crate) fn random_ring_vec(rng: &mut impl RngCore, len: usize) -> Vec<u64> {
    (0..len).map(|_| rng.next_u64()).collect()
}
