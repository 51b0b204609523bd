//! Trusted-dealer Beaver triples and their per-party files.
//!
//! The dealer is an offline seeded generator: it draws random `a`, `b`,
//! computes `c = a*b` in the ring, splits everything into additive shares,
//! and writes one file per party. Each triple is single-use; consumption is
//! enforced with a consumed flag.

use std::fs;
use std::io::Read;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::signatures::Activation;

use super::{random_ring_vec, ring_matmul, ring_mul_vec, ring_sub_vec, MpcError, Party};

const TRIPLE_MAGIC: &[u8; 8] = b"PPSTRPL1";
const TRIPLE_VERSION: u32 = 1;

/// Shape of one triple: a matrix product or an elementwise product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleShape {
    Matmul { m: usize, k: usize, n: usize },
    Elementwise { len: usize },
}

impl TripleShape {
    pub fn a_len(&self) -> usize {
        match self {
            TripleShape::Matmul { m, k, .. } => m * k,
            TripleShape::Elementwise { len } => *len,
        }
    }

    pub fn b_len(&self) -> usize {
        match self {
            TripleShape::Matmul { k, n, .. } => k * n,
            TripleShape::Elementwise { len } => *len,
        }
    }

    pub fn c_len(&self) -> usize {
        match self {
            TripleShape::Matmul { m, n, .. } => m * n,
            TripleShape::Elementwise { len } => *len,
        }
    }
}

impl std::fmt::Display for TripleShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TripleShape::Matmul { m, k, n } => write!(f, "matmul {m}x{k}*{k}x{n}"),
            TripleShape::Elementwise { len } => write!(f, "elementwise {len}"),
        }
    }
}

/// One party's share of one Beaver triple.
#[derive(Debug, Clone)]
pub struct TripleShare {
    pub shape: TripleShape,
    pub party: Party,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
    consumed: bool,
}

impl TripleShare {
    pub fn new(shape: TripleShape, party: Party, a: Vec<u64>, b: Vec<u64>, c: Vec<u64>) -> TripleShare {
        TripleShare {
            shape,
            party,
            a,
            b,
            c,
            consumed: false,
        }
    }

    /// Mark the triple used; a second call is a hard error.
    pub fn consume(&mut self) -> Result<(), MpcError> {
        if self.consumed {
            return Err(MpcError::TripleReused);
        }
        self.consumed = true;
        Ok(())
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// The triples a session will consume, in order: one matrix triple per batch
/// plus, under the square activation, one elementwise triple per batch.
pub fn consumption_plan(
    vocab: usize,
    dim: usize,
    activation: Activation,
    batch_rows: &[usize],
) -> Vec<TripleShape> {
    let mut plan = Vec::new();
    for rows in batch_rows {
        plan.push(TripleShape::Matmul {
            m: *rows,
            k: vocab,
            n: dim,
        });
        if activation == Activation::Square {
            plan.push(TripleShape::Elementwise { len: rows * dim });
        }
    }
    plan
}

/// Generate both parties' triple shares for a list of shapes,
/// deterministically from `seed`.
pub fn dealer_generate(seed: u64, shapes: &[TripleShape]) -> Result<(TripleFile, TripleFile), MpcError> {
    if shapes.is_empty() {
        return Err(MpcError::InvalidInput("empty shape list".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_6970_6c65_7331);
    let mut p0 = Vec::with_capacity(shapes.len());
    let mut p1 = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let a = random_ring_vec(&mut rng, shape.a_len());
        let b = random_ring_vec(&mut rng, shape.b_len());
        let c = match shape {
            TripleShape::Matmul { m, k, n } => ring_matmul(&a, &b, *m, *k, *n),
            TripleShape::Elementwise { .. } => ring_mul_vec(&a, &b),
        };
        let a0 = random_ring_vec(&mut rng, a.len());
        let b0 = random_ring_vec(&mut rng, b.len());
        let c0 = random_ring_vec(&mut rng, c.len());
        let a1 = ring_sub_vec(&a, &a0);
        let b1 = ring_sub_vec(&b, &b0);
        let c1 = ring_sub_vec(&c, &c0);
        // emission invariant: shares reconstruct to c = a*b
        debug_assert!(c0
            .iter()
            .zip(c1.iter())
            .zip(c.iter())
            .all(|((x, y), z)| x.wrapping_add(*y) == *z));
        p0.push(TripleShare {
            shape: *shape,
            party: Party::Client,
            a: a0,
            b: b0,
            c: c0,
            consumed: false,
        });
        p1.push(TripleShare {
            shape: *shape,
            party: Party::Server,
            a: a1,
            b: b1,
            c: c1,
            consumed: false,
        });
    }
    Ok((
        TripleFile {
            seed,
            party: Party::Client,
            triples: p0,
        },
        TripleFile {
            seed,
            party: Party::Server,
            triples: p1,
        },
    ))
}

/// One party's triple file.
#[derive(Debug, Clone)]
pub struct TripleFile {
    pub seed: u64,
    pub party: Party,
    pub triples: Vec<TripleShare>,
}

impl TripleFile {
    pub fn save(&self, path: &Path) -> Result<(), MpcError> {
        let mut out = Vec::new();
        out.extend_from_slice(TRIPLE_MAGIC);
        out.extend_from_slice(&TRIPLE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(self.party.as_byte());
        out.extend_from_slice(&(self.triples.len() as u64).to_le_bytes());
        for t in &self.triples {
            match t.shape {
                TripleShape::Matmul { m, k, n } => {
                    out.push(0);
                    for d in [m, k, n] {
                        out.extend_from_slice(&(d as u64).to_le_bytes());
                    }
                }
                TripleShape::Elementwise { len } => {
                    out.push(1);
                    out.extend_from_slice(&(len as u64).to_le_bytes());
                }
            }
            for part in [&t.a, &t.b, &t.c] {
                for v in part {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TripleFile, MpcError> {
        let mut raw = Vec::new();
        fs::File::open(path)?.read_to_end(&mut raw)?;
        let mut cur = 0usize;
        let mut take = |n: usize| -> Result<&[u8], MpcError> {
            if cur + n > raw.len() {
                return Err(MpcError::TripleFile("truncated file".into()));
            }
            let s = &raw[cur..cur + n];
            cur += n;
            Ok(s)
        };
        if take(8)? != TRIPLE_MAGIC {
            return Err(MpcError::TripleFile("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != TRIPLE_VERSION {
            return Err(MpcError::TripleFile(format!("unsupported version {version}")));
        }
        let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let party = Party::from_byte(take(1)?[0])
            .ok_or_else(|| MpcError::TripleFile("bad party byte".into()))?;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut triples = Vec::with_capacity(count);
        for _ in 0..count {
            let kind = take(1)?[0];
            let shape = match kind {
                0 => {
                    let m = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
                    let k = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
                    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
                    TripleShape::Matmul { m, k, n }
                }
                1 => {
                    let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
                    TripleShape::Elementwise { len }
                }
                other => {
                    return Err(MpcError::TripleFile(format!("bad shape kind {other}")))
                }
            };
            let mut read_vec = |len: usize| -> Result<Vec<u64>, MpcError> {
                let mut v = Vec::with_capacity(len);
                for _ in 0..len {
                    v.push(u64::from_le_bytes(take(8)?.try_into().unwrap()));
                }
                Ok(v)
            };
            let a = read_vec(shape.a_len())?;
            let b = read_vec(shape.b_len())?;
            let c = read_vec(shape.c_len())?;
            triples.push(TripleShare {
                shape,
                party,
                a,
                b,
                c,
                consumed: false,
            });
        }
        if cur != raw.len() {
            return Err(MpcError::TripleFile("trailing bytes".into()));
        }
        Ok(TripleFile { seed, party, triples })
    }

    pub fn into_store(self) -> TripleStore {
        TripleStore {
            seed: self.seed,
            party: self.party,
            triples: self.triples,
            cursor: 0,
        }
    }
}

/// Ordered triple supply for one session.
#[derive(Debug)]
pub struct TripleStore {
    pub seed: u64,
    pub party: Party,
    triples: Vec<TripleShare>,
    cursor: usize,
}

impl TripleStore {
    /// Take the next triple; it must match `shape`.
    pub fn next_triple(&mut self, shape: TripleShape) -> Result<&mut TripleShare, MpcError> {
        let Some(t) = self.triples.get_mut(self.cursor) else {
            return Err(MpcError::TripleExhausted);
        };
        if t.shape != shape {
            return Err(MpcError::TripleShapeMismatch {
                expected: shape.to_string(),
                got: t.shape.to_string(),
            });
        }
        self.cursor += 1;
        Ok(t)
    }

    pub fn remaining(&self) -> usize {
        self.triples.len() - self.cursor
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}
