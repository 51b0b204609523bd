//! Beaver multiplication, fixed-point matrix products, and the two-party
//! embedding session.
//!
//! Message order is strictly alternating: the client always sends first and
//! the server always answers, so neither side can deadlock on a full buffer
//! and round counts are determined by input shapes alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::signatures::Activation;

use super::channel::{bytes_to_words, words_to_bytes, Channel, MsgType};
use super::triple::{TripleShape, TripleShare, TripleStore};
use super::{
    encode_fixed, random_ring_vec, ring_add_vec, ring_matmul, ring_mul_vec, ring_sub_vec,
    truncate_share, MpcError, Party, Share, FIXED_POINT_BITS, PROTOCOL_VERSION,
};

/// Open `eps = x - a` and `delta = y - b`: each party contributes its share
/// of both, client first.
fn open_masked<C: Channel>(
    ch: &mut C,
    party: Party,
    eps_share: &[u64],
    delta_share: &[u64],
) -> Result<(Vec<u64>, Vec<u64>), MpcError> {
    let mut payload = Vec::with_capacity(8 + (eps_share.len() + delta_share.len()) * 8);
    payload.extend_from_slice(&(eps_share.len() as u64).to_le_bytes());
    payload.extend_from_slice(&words_to_bytes(eps_share));
    payload.extend_from_slice(&words_to_bytes(delta_share));

    let theirs = match party {
        Party::Client => {
            ch.send(MsgType::EpsDeltaOpen, &payload)?;
            ch.recv_expect(MsgType::EpsDeltaOpen)?
        }
        Party::Server => {
            let theirs = ch.recv_expect(MsgType::EpsDeltaOpen)?;
            ch.send(MsgType::EpsDeltaOpen, &payload)?;
            theirs
        }
    };
    if theirs.len() != payload.len() {
        return Err(MpcError::Protocol("masked-open size mismatch".into()));
    }
    let peer_eps_len = u64::from_le_bytes(theirs[..8].try_into().unwrap()) as usize;
    if peer_eps_len != eps_share.len() {
        return Err(MpcError::Protocol("masked-open shape mismatch".into()));
    }
    let words = bytes_to_words(&theirs[8..])?;
    let (peer_eps, peer_delta) = words.split_at(peer_eps_len);
    Ok((
        ring_add_vec(eps_share, peer_eps),
        ring_add_vec(delta_share, peer_delta),
    ))
}

fn truncate_vec(values: &mut [u64], party: Party, f: u32) {
    for v in values.iter_mut() {
        *v = truncate_share(Share { value: *v, party }, f).value;
    }
}

/// Elementwise Beaver multiplication of share vectors (no truncation).
pub fn beaver_mul_vec<C: Channel>(
    ch: &mut C,
    x: &[u64],
    y: &[u64],
    triple: &mut TripleShare,
    party: Party,
) -> Result<Vec<u64>, MpcError> {
    let expected = TripleShape::Elementwise { len: x.len() };
    if triple.shape != expected {
        return Err(MpcError::TripleShapeMismatch {
            expected: expected.to_string(),
            got: triple.shape.to_string(),
        });
    }
    if x.len() != y.len() {
        return Err(MpcError::InvalidInput("operand length mismatch".into()));
    }
    triple.consume()?;
    let eps_share = ring_sub_vec(x, &triple.a);
    let delta_share = ring_sub_vec(y, &triple.b);
    let (eps, delta) = open_masked(ch, party, &eps_share, &delta_share)?;
    // [z] = [c] + eps*[b] + delta*[a] (+ eps*delta, once)
    let mut z = ring_add_vec(&triple.c, &ring_mul_vec(&eps, &triple.b));
    z = ring_add_vec(&z, &ring_mul_vec(&delta, &triple.a));
    if party == Party::Client {
        z = ring_add_vec(&z, &ring_mul_vec(&eps, &delta));
    }
    Ok(z)
}

/// Beaver multiplication of two scalar shares (no truncation).
pub fn beaver_mul<C: Channel>(
    ch: &mut C,
    x: Share,
    y: Share,
    triple: &mut TripleShare,
) -> Result<Share, MpcError> {
    debug_assert_eq!(x.party, y.party);
    let z = beaver_mul_vec(ch, &[x.value], &[y.value], triple, x.party)?;
    Ok(Share {
        value: z[0],
        party: x.party,
    })
}

/// Fixed-point product of shared matrices (`m x k` times `k x n`), truncated
/// back to scale `2^f`. One masked-open round.
pub fn private_matmul<C: Channel>(
    ch: &mut C,
    x_share: &[u64],
    w_share: &[u64],
    m: usize,
    k: usize,
    n: usize,
    triple: &mut TripleShare,
    party: Party,
    f: u32,
) -> Result<Vec<u64>, MpcError> {
    let expected = TripleShape::Matmul { m, k, n };
    if triple.shape != expected {
        return Err(MpcError::TripleShapeMismatch {
            expected: expected.to_string(),
            got: triple.shape.to_string(),
        });
    }
    triple.consume()?;
    let eps_share = ring_sub_vec(x_share, &triple.a);
    let delta_share = ring_sub_vec(w_share, &triple.b);
    let (eps, delta) = open_masked(ch, party, &eps_share, &delta_share)?;
    let mut z = ring_add_vec(&triple.c, &ring_matmul(&eps, &triple.b, m, k, n));
    z = ring_add_vec(&z, &ring_matmul(&triple.a, &delta, m, k, n));
    if party == Party::Client {
        z = ring_add_vec(&z, &ring_matmul(&eps, &delta, m, k, n));
    }
    truncate_vec(&mut z, party, f);
    Ok(z)
}

/// Fixed-point elementwise square, truncated back to scale `2^f`.
pub fn private_square<C: Channel>(
    ch: &mut C,
    z_share: &[u64],
    triple: &mut TripleShare,
    party: Party,
    f: u32,
) -> Result<Vec<u64>, MpcError> {
    let mut sq = beaver_mul_vec(ch, z_share, z_share, triple, party)?;
    truncate_vec(&mut sq, party, f);
    Ok(sq)
}

/// Parameters both parties must agree on before any tensor moves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionParams {
    pub version: u32,
    pub dim: u32,
    pub vocab: u32,
    pub activation: Activation,
    pub fixed_point_bits: u8,
    pub dealer_seed: u64,
    pub batch_rows: Vec<u64>,
}

impl SessionParams {
    pub fn new(
        dim: u32,
        vocab: u32,
        activation: Activation,
        dealer_seed: u64,
        batch_rows: Vec<u64>,
    ) -> SessionParams {
        SessionParams {
            version: PROTOCOL_VERSION,
            dim,
            vocab,
            activation,
            fixed_point_bits: FIXED_POINT_BITS as u8,
            dealer_seed,
            batch_rows,
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.dim.to_le_bytes());
        out.extend_from_slice(&self.vocab.to_le_bytes());
        out.push(self.activation.as_byte());
        out.push(self.fixed_point_bits);
        out.extend_from_slice(&self.dealer_seed.to_le_bytes());
        out.extend_from_slice(&(self.batch_rows.len() as u64).to_le_bytes());
        for r in &self.batch_rows {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    fn from_bytes(raw: &[u8]) -> Result<(SessionParams, usize), MpcError> {
        let bad = || MpcError::Protocol("malformed session parameters".into());
        if raw.len() < 30 {
            return Err(bad());
        }
        let version = u32::from_le_bytes(raw[0..4].try_into().unwrap());
        let dim = u32::from_le_bytes(raw[4..8].try_into().unwrap());
        let vocab = u32::from_le_bytes(raw[8..12].try_into().unwrap());
        let activation = Activation::from_byte(raw[12]).ok_or_else(bad)?;
        let fixed_point_bits = raw[13];
        let dealer_seed = u64::from_le_bytes(raw[14..22].try_into().unwrap());
        let n = u64::from_le_bytes(raw[22..30].try_into().unwrap()) as usize;
        if raw.len() < 30 + n * 8 {
            return Err(bad());
        }
        let batch_rows = raw[30..30 + n * 8]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((
            SessionParams {
                version,
                dim,
                vocab,
                activation,
                fixed_point_bits,
                dealer_seed,
                batch_rows,
            },
            30 + n * 8,
        ))
    }
}

/// Split row counts into batches no larger than `batch_max`.
pub fn plan_batches(total_rows: usize, batch_max: usize) -> Vec<u64> {
    let mut rows = Vec::new();
    let mut left = total_rows;
    while left > 0 {
        let take = left.min(batch_max.max(1));
        rows.push(take as u64);
        left -= take;
    }
    rows
}

/// Client half of the embedding session. `token_counts` holds one signed
/// count vector (length `vocab`) per function; the result is the decoded,
/// un-normalized embedding rows in the same order.
pub fn mpc_embed_client<C: Channel>(
    ch: &mut C,
    token_counts: &[Vec<i64>],
    params: &SessionParams,
    triples: &mut TripleStore,
    session_seed: u64,
) -> Result<Vec<Vec<f64>>, MpcError> {
    let vocab = params.vocab as usize;
    let dim = params.dim as usize;
    let f = u32::from(params.fixed_point_bits);
    // reject bad tensors before any message is sent
    if token_counts.is_empty() {
        return Err(MpcError::InvalidInput("no feature vectors".into()));
    }
    for (i, row) in token_counts.iter().enumerate() {
        if row.len() != vocab {
            return Err(MpcError::InvalidInput(format!(
                "feature vector {i} has length {}, expected {vocab}",
                row.len()
            )));
        }
        if row.iter().all(|c| *c == 0) {
            return Err(MpcError::InvalidInput(format!(
                "feature vector {i} has zero counts"
            )));
        }
    }
    let planned: u64 = params.batch_rows.iter().sum();
    if planned as usize != token_counts.len() {
        return Err(MpcError::InvalidInput("batch plan does not cover inputs".into()));
    }
    if triples.seed != params.dealer_seed {
        return Err(MpcError::Protocol("dealer file does not match session".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(session_seed ^ 0x636c_6965_6e74_5f31);

    ch.send(MsgType::Hello, &params.to_bytes())?;
    let reply = ch.recv_expect(MsgType::Hello)?;
    let (peer, consumed) = SessionParams::from_bytes(&reply)?;
    if peer != *params {
        return Err(MpcError::Protocol("session parameter mismatch".into()));
    }
    let w_share = bytes_to_words(&reply[consumed..])?;
    if w_share.len() != vocab * dim {
        return Err(MpcError::Protocol("model share has wrong shape".into()));
    }

    let mut outputs = Vec::with_capacity(token_counts.len());
    let mut offset = 0usize;
    for (batch_idx, rows) in params.batch_rows.iter().enumerate() {
        let rows = *rows as usize;
        let batch = &token_counts[offset..offset + rows];
        offset += rows;

        // encode and share the token tensor: the server receives a uniform
        // share, the client keeps enc(X) minus it
        let mut x_enc = Vec::with_capacity(rows * vocab);
        for row in batch {
            x_enc.extend(row.iter().map(|c| encode_fixed(*c as f64)));
        }
        let server_share = random_ring_vec(&mut rng, x_enc.len());
        let client_share = ring_sub_vec(&x_enc, &server_share);

        let mut header = Vec::with_capacity(16 + server_share.len() * 8);
        header.extend_from_slice(&(batch_idx as u64).to_le_bytes());
        header.extend_from_slice(&(rows as u64).to_le_bytes());
        header.extend_from_slice(&words_to_bytes(&server_share));
        ch.send(MsgType::BatchHeader, &header)?;

        let triple = triples.next_triple(TripleShape::Matmul {
            m: rows,
            k: vocab,
            n: dim,
        })?;
        let mut z = private_matmul(
            ch,
            &client_share,
            &w_share,
            rows,
            vocab,
            dim,
            triple,
            Party::Client,
            f,
        )?;
        if params.activation == Activation::Square {
            let triple = triples.next_triple(TripleShape::Elementwise { len: rows * dim })?;
            z = private_square(ch, &z, triple, Party::Client, f)?;
        }

        let server_result = bytes_to_words(&ch.recv_expect(MsgType::ResultShare)?)?;
        if server_result.len() != z.len() {
            return Err(MpcError::Protocol("result share has wrong shape".into()));
        }
        let plain = ring_add_vec(&z, &server_result);
        for row in plain.chunks(dim) {
            outputs.push(row.iter().map(|v| super::decode_fixed(*v)).collect());
        }
    }
    Ok(outputs)
}

/// Server half of the embedding session. The model never leaves this side in
/// plaintext; the client's tensors never arrive in plaintext.
pub fn mpc_embed_server<C: Channel>(
    ch: &mut C,
    weights: &crate::signatures::ModelWeights,
    triples: &mut TripleStore,
    session_seed: u64,
) -> Result<(), MpcError> {
    let hello = ch.recv_expect(MsgType::Hello)?;
    let (client_params, _) = SessionParams::from_bytes(&hello)?;
    let dim = weights.dim() as u32;
    let vocab = weights.vocab() as u32;
    let expected = SessionParams::new(
        dim,
        vocab,
        weights.activation(),
        triples.seed,
        client_params.batch_rows.clone(),
    );
    if client_params != expected {
        let reason = format!(
            "session parameter mismatch: client {:?} vs server v{} {}x{} {} f={}",
            (
                client_params.version,
                client_params.dim,
                client_params.vocab,
                client_params.activation,
                client_params.fixed_point_bits
            ),
            expected.version,
            expected.dim,
            expected.vocab,
            expected.activation,
            expected.fixed_point_bits,
        );
        ch.abort(&reason);
        return Err(MpcError::Protocol(reason));
    }
    let f = u32::from(client_params.fixed_point_bits);
    let (dim, vocab) = (dim as usize, vocab as usize);

    let mut rng = ChaCha8Rng::seed_from_u64(session_seed ^ 0x7365_7276_6572_5f31);

    // encode W transposed (vocab x dim) and share it with the client
    let mut w_enc = vec![0u64; vocab * dim];
    for d in 0..dim {
        for v in 0..vocab {
            w_enc[v * dim + d] = encode_fixed(f64::from(weights.projection()[d * vocab + v]));
        }
    }
    let client_share = random_ring_vec(&mut rng, w_enc.len());
    let server_share = ring_sub_vec(&w_enc, &client_share);

    let mut reply = expected.to_bytes();
    reply.extend_from_slice(&words_to_bytes(&client_share));
    ch.send(MsgType::Hello, &reply)?;

    for (batch_idx, rows) in expected.batch_rows.iter().enumerate() {
        let rows = *rows as usize;
        let header = ch.recv_expect(MsgType::BatchHeader)?;
        if header.len() != 16 + rows * vocab * 8 {
            let reason = "batch header has wrong shape".to_string();
            ch.abort(&reason);
            return Err(MpcError::Protocol(reason));
        }
        let idx = u64::from_le_bytes(header[0..8].try_into().unwrap());
        if idx as usize != batch_idx {
            let reason = "batch index out of order".to_string();
            ch.abort(&reason);
            return Err(MpcError::Protocol(reason));
        }
        let x_share = bytes_to_words(&header[16..])?;

        let triple = triples.next_triple(TripleShape::Matmul {
            m: rows,
            k: vocab,
            n: dim,
        })?;
        let mut z = private_matmul(
            ch,
            &x_share,
            &server_share,
            rows,
            vocab,
            dim,
            triple,
            Party::Server,
            f,
        )?;
        if expected.activation == Activation::Square {
            let triple = triples.next_triple(TripleShape::Elementwise { len: rows * dim })?;
            z = private_square(ch, &z, triple, Party::Server, f)?;
        }
        ch.send(MsgType::ResultShare, &words_to_bytes(&z))?;
    }
    Ok(())
}
