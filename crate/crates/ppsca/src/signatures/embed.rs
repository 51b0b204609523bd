//! Token-hash embeddings.
//!
//! The embedding model is a seeded feature-hashing linear map: tokens are
//! hashed into a signed count vector of dimension `VOCAB_DIM`, projected to
//! `EMBED_DIM` by a fixed random matrix, passed through the activation, and
//! L2-normalized. The projection entries are drawn on the `2^-16` grid so the
//! plaintext path and the fixed-point MPC path evaluate the same model.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SignatureError;

/// Embedding dimension D.
pub const EMBED_DIM: usize = 128;
/// Feature-hash vocabulary dimension V.
pub const VOCAB_DIM: usize = 4096;

const MODEL_MAGIC: &[u8; 8] = b"PPSCAMDL";
const MODEL_VERSION: u32 = 1;

/// Elementwise activation applied after the projection. `Square` is the
/// MPC-friendly nonlinearity (one Beaver multiplication per element).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Square,
}

impl Activation {
    pub fn as_byte(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Square => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Activation> {
        match b {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Square),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => f.write_str("identity"),
            Activation::Square => f.write_str("square"),
        }
    }
}

/// Identity of a model: everything a client is allowed to know about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub seed: u64,
    pub dim: u32,
    pub vocab: u32,
    pub activation: Activation,
}

/// The projection matrix plus its provenance. Immutable once created.
#[derive(Clone)]
pub struct ModelWeights {
    seed: u64,
    dim: usize,
    vocab: usize,
    activation: Activation,
    /// Row-major `dim x vocab`.
    projection: Vec<f32>,
}

impl ModelWeights {
    /// Deterministically generate weights from a seed. Entries are uniform on
    /// the fixed-point grid in [-1/8, 1/8] so they encode exactly at f=16.
    pub fn generate(seed: u64, activation: Activation) -> ModelWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_6465_6c5f_7731);
        let projection = (0..EMBED_DIM * VOCAB_DIM)
            .map(|_| {
                let raw = (rng.next_u64() % 16385) as i64 - 8192;
                raw as f32 / 65536.0
            })
            .collect();
        ModelWeights {
            seed,
            dim: EMBED_DIM,
            vocab: VOCAB_DIM,
            activation,
            projection,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major `dim x vocab` projection entries.
    pub fn projection(&self) -> &[f32] {
        &self.projection
    }

    pub fn model_ref(&self) -> ModelRef {
        ModelRef {
            seed: self.seed,
            dim: self.dim as u32,
            vocab: self.vocab as u32,
            activation: self.activation,
        }
    }

    /// Serialize to the binary model format.
    pub fn save(&self, path: &Path) -> Result<(), SignatureError> {
        let mut out = Vec::with_capacity(25 + self.projection.len() * 4);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab as u32).to_le_bytes());
        out.push(self.activation.as_byte());
        for w in &self.projection {
            out.extend_from_slice(&w.to_le_bytes());
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Read back a model written by [`ModelWeights::save`].
    pub fn load(path: &Path) -> Result<ModelWeights, SignatureError> {
        let mut f = fs::File::open(path)?;
        let mut header = [0u8; 29];
        f.read_exact(&mut header)
            .map_err(|_| SignatureError::ModelFile("truncated header".into()))?;
        if &header[..8] != MODEL_MAGIC {
            return Err(SignatureError::ModelFile("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(SignatureError::ModelFile(format!(
                "unsupported version {version}"
            )));
        }
        let seed = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let dim = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
        let vocab = u32::from_le_bytes(header[24..28].try_into().unwrap()) as usize;
        let activation = Activation::from_byte(header[28])
            .ok_or_else(|| SignatureError::ModelFile("bad activation byte".into()))?;
        let mut raw = Vec::new();
        f.read_to_end(&mut raw)?;
        if raw.len() != dim * vocab * 4 {
            return Err(SignatureError::ModelFile(format!(
                "matrix payload is {} bytes, expected {}",
                raw.len(),
                dim * vocab * 4
            )));
        }
        let projection = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ModelWeights {
            seed,
            dim,
            vocab,
            activation,
            projection,
        })
    }
}

impl fmt::Debug for ModelWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelWeights")
            .field("seed", &self.seed)
            .field("dim", &self.dim)
            .field("vocab", &self.vocab)
            .field("activation", &self.activation)
            .finish_non_exhaustive()
    }
}

/// A fixed-dimension embedding with its cached Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f32,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> EmbeddingVector {
        let norm = values.iter().map(|v| f64::from(*v) * f64::from(*v)).sum::<f64>().sqrt();
        EmbeddingVector {
            values,
            norm: norm as f32,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f32 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn fnv1a64(bytes: &[u8], basis: u64) -> u64 {
    let mut h = basis;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Split text into lowercase identifier/number tokens and single-character
/// operator tokens. Grouping punctuation and statement separators carry no
/// signal and are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    const OPERATORS: &str = "+-*/%<>=!&|^~?:.";
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            word.push(ch.to_ascii_lowercase());
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if OPERATORS.contains(ch) {
                tokens.push(ch.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Feature-hash tokens into a signed count vector of length `vocab`.
pub fn hash_tokens(tokens: &[String], vocab: usize) -> Vec<i64> {
    let mut counts = vec![0i64; vocab];
    for t in tokens {
        let idx = (fnv1a64(t.as_bytes(), 0xcbf2_9ce4_8422_2325) % vocab as u64) as usize;
        let sign = if fnv1a64(t.as_bytes(), 0x9ae1_6a3b_2f90_404f) & 1 == 0 {
            1
        } else {
            -1
        };
        counts[idx] += sign;
    }
    counts
}

/// Embed a token sequence with the plaintext model path.
pub fn embed_plain(
    tokens: &[String],
    weights: &ModelWeights,
) -> Result<EmbeddingVector, SignatureError> {
    if tokens.is_empty() {
        return Err(SignatureError::EmptyTokens);
    }
    let counts = hash_tokens(tokens, weights.vocab);
    let mut y = vec![0f64; weights.dim];
    for (v, c) in counts.iter().enumerate() {
        if *c == 0 {
            continue;
        }
        let c = *c as f64;
        for (d, acc) in y.iter_mut().enumerate() {
            *acc += c * f64::from(weights.projection[d * weights.vocab + v]);
        }
    }
    if weights.activation == Activation::Square {
        for v in y.iter_mut() {
            *v *= *v;
        }
    }
    normalize_embedding(&y)
}

/// L2-normalize a raw embedding row (e.g. a decoded MPC result) into an
/// [`EmbeddingVector`].
pub fn normalize_embedding(y: &[f64]) -> Result<EmbeddingVector, SignatureError> {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SignatureError::EmptyTokens);
    }
    Ok(EmbeddingVector::new(
        y.iter().map(|v| (*v / norm) as f32).collect(),
    ))
}

/// Euclidean distance between two embeddings.
pub fn embedding_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SignatureError> {
    if a.dim() != b.dim() {
        return Err(SignatureError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(euclidean(a.values(), b.values()))
}

pub(crate) fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_examples() {
        let t = tokenize("return a+b;");
        assert_eq!(t, vec!["return", "a", "+", "b"]);
        assert!(tokenize("").is_empty());
        let t = tokenize("if (Count > 10) { total_sum += arr[i]; }");
        assert_eq!(
            t,
            vec!["if", "count", ">", "10", "total_sum", "+", "=", "arr", "i"]
        );
    }

    #[test]
    fn embedding_is_deterministic_and_normalized() {
        let w = ModelWeights::generate(99, Activation::Identity);
        let tokens = tokenize("int alpha = beta * gamma + delta; return alpha;");
        let e1 = embed_plain(&tokens, &w).unwrap();
        let e2 = embed_plain(&tokens, &w).unwrap();
        assert_eq!(e1, e2);
        let norm: f64 = e1.values().iter().map(|v| f64::from(*v) * f64::from(*v)).sum();
        assert!((norm.sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_tokens_rejected() {
        let w = ModelWeights::generate(1, Activation::Identity);
        assert!(matches!(
            embed_plain(&[], &w),
            Err(SignatureError::EmptyTokens)
        ));
    }

    #[test]
    fn weights_are_on_the_fixed_point_grid() {
        let w = ModelWeights::generate(7, Activation::Square);
        for v in w.projection() {
            let scaled = f64::from(*v) * 65536.0;
            assert_eq!(scaled, scaled.round());
            assert!(scaled.abs() <= 8192.0);
        }
    }

    #[test]
    fn renamed_clone_stays_inside_match_radius() {
        use rand::{Rng, SeedableRng};
        let w = ModelWeights::generate(3, Activation::Identity);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xc10e);
        let rho = 0.35;
        let mut hits = 0;
        for i in 0..100 {
            let stmts: Vec<String> = (0..14)
                .map(|s| {
                    format!(
                        "acc_{s} = acc_{s} * {} + input_{i}[{s}];",
                        rng.gen_range(2..90)
                    )
                })
                .collect();
            let body = format!(
                "int process_chunk_{i}(int len, char *buf) {{ int written = 0; {} return written + len; }}",
                stmts.join(" ")
            );
            let renamed = body.replace("written", "emitted");
            let e1 = embed_plain(&tokenize(&body), &w).unwrap();
            let e2 = embed_plain(&tokenize(&renamed), &w).unwrap();
            if embedding_distance(&e1, &e2).unwrap() < rho {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 renamed clones matched");
    }

    #[test]
    fn orthogonal_unit_vectors_distance() {
        let mut a = vec![0f32; 4];
        let mut b = vec![0f32; 4];
        a[0] = 1.0;
        b[1] = 1.0;
        let d = embedding_distance(&EmbeddingVector::new(a), &EmbeddingVector::new(b)).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let a = EmbeddingVector::new(vec![1.0; 4]);
        let b = EmbeddingVector::new(vec![1.0; 5]);
        assert!(matches!(
            embedding_distance(&a, &b),
            Err(SignatureError::DimMismatch(4, 5))
        ));
    }

    #[test]
    fn distance_matches_arbitrary_precision_oracle() {
        use num::rational::BigRational;
        use num::{BigInt, FromPrimitive};

        let w = ModelWeights::generate(11, Activation::Identity);
        let a = embed_plain(&tokenize("int f(int x) { return x * 3 + 1; }"), &w).unwrap();
        let b = embed_plain(&tokenize("int g(int y) { return y - 12345; }"), &w).unwrap();
        let d = embedding_distance(&a, &b).unwrap();

        let mut sq = BigRational::from_integer(BigInt::from(0));
        for (x, y) in a.values().iter().zip(b.values().iter()) {
            let diff = BigRational::from_f32(*x).unwrap() - BigRational::from_f32(*y).unwrap();
            sq += diff.clone() * diff;
        }
        let oracle_sq = sq
            .numer()
            .to_string()
            .parse::<f64>()
            .unwrap()
            / sq.denom().to_string().parse::<f64>().unwrap();
        assert!((d * d - oracle_sq).abs() < 1e-15);
    }

    #[test]
    fn model_file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let w = ModelWeights::generate(1234, Activation::Square);
        w.save(&path).unwrap();
        let r = ModelWeights::load(&path).unwrap();
        assert_eq!(r.seed(), 1234);
        assert_eq!(r.activation(), Activation::Square);
        assert_eq!(r.projection(), w.projection());

        std::fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(ModelWeights::load(&path).is_err());
    }

    proptest! {
        #[test]
        fn metric_axioms(
            xs in proptest::collection::vec(-100f32..100.0, 8),
            ys in proptest::collection::vec(-100f32..100.0, 8),
            zs in proptest::collection::vec(-100f32..100.0, 8),
        ) {
            let (a, b, c) = (
                EmbeddingVector::new(xs),
                EmbeddingVector::new(ys),
                EmbeddingVector::new(zs),
            );
            let dab = embedding_distance(&a, &b).unwrap();
            let dba = embedding_distance(&b, &a).unwrap();
            let daa = embedding_distance(&a, &a).unwrap();
            let dac = embedding_distance(&a, &c).unwrap();
            let dcb = embedding_distance(&c, &b).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(daa, 0.0);
            prop_assert!(dab <= dac + dcb + 1e-9);
            prop_assert!(dab >= 0.0);
        }
    }
}

#[cfg(test)]
mod locality {
    use super::*;
    use crate::signatures::{tlsh_digest, tlsh_distance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synth_body(rng: &mut ChaCha8Rng, idx: usize) -> String {
        let stmts: Vec<String> = (0..rng.gen_range(6..14))
            .map(|s| format!("acc_{idx} = acc_{idx} * {} + input_{s};", rng.gen_range(2..90)))
            .collect();
        format!("long mix_{idx}(long acc_{idx}) {{ {} return acc_{idx}; }}", stmts.join(" "))
    }

    fn mutate(rng: &mut ChaCha8Rng, body: &str, idx: usize) -> String {
        if rng.gen_bool(0.5) {
            // identifier rename
            body.replace(&format!("acc_{idx}"), &format!("sum_{idx}"))
        } else {
            // statement reorder: swap the first two statements
            let mut parts: Vec<&str> = body.splitn(4, ';').collect();
            if parts.len() == 4 {
                parts.swap(1, 2);
            }
            parts.join(";")
        }
    }

    /// Mutated clones must match more often than unrelated pairs, for both
    /// signature kinds, over >= 1000 seeded pairs.
    #[test]
    fn locality_beats_unrelated_pairs() {
        let w = ModelWeights::generate(21, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(0x10ca11);
        let (mut clone_tlsh, mut unrel_tlsh) = (0u32, 0u32);
        let (mut clone_emb, mut unrel_emb) = (0u32, 0u32);
        let n = 1000;
        for i in 0..n {
            let a = synth_body(&mut rng, i);
            let m = mutate(&mut rng, &a, i);
            let b = synth_body(&mut rng, i + 100_000);

            if let (Ok(da), Ok(dm), Ok(db)) = (
                tlsh_digest(a.as_bytes()),
                tlsh_digest(m.as_bytes()),
                tlsh_digest(b.as_bytes()),
            ) {
                if tlsh_distance(&da, &dm) < 30 {
                    clone_tlsh += 1;
                }
                if tlsh_distance(&da, &db) < 30 {
                    unrel_tlsh += 1;
                }
            }
            let ea = embed_plain(&tokenize(&a), &w).unwrap();
            let em = embed_plain(&tokenize(&m), &w).unwrap();
            let eb = embed_plain(&tokenize(&b), &w).unwrap();
            if embedding_distance(&ea, &em).unwrap() < 0.35 {
                clone_emb += 1;
            }
            if embedding_distance(&ea, &eb).unwrap() < 0.35 {
                unrel_emb += 1;
            }
        }
        assert!(
            clone_tlsh > unrel_tlsh,
            "tlsh: clones {clone_tlsh} vs unrelated {unrel_tlsh}"
        );
        assert!(
            clone_emb > unrel_emb,
            "embed: clones {clone_emb} vs unrelated {unrel_emb}"
        );
    }
}
