//! Function signatures: TLSH digests and token-hash embeddings, with their
//! distance metrics and the seeded stand-in embedding model.

pub mod embed;
pub mod tlsh;

pub use embed::{
    embed_plain, embedding_distance, hash_tokens, normalize_embedding, tokenize, Activation,
    EmbeddingVector, ModelRef, ModelWeights, EMBED_DIM, VOCAB_DIM,
};
pub use tlsh::{tlsh_digest, tlsh_distance, ParseDigestError, TlshDigest, Unhashable};

/// Signature-stage failures.
#[derive(Debug, thiserror::Error)]
pub enum SignatureError {
    #[error(transparent)]
    Unhashable(#[from] Unhashable),

    #[error("cannot embed an empty token sequence")]
    EmptyTokens,

    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
