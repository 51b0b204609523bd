//! Privacy-preserving software composition analysis (SCA).
//!
//! This crate identifies open-source reuse in a C-like codebase by matching
//! function-level signatures against a vendor database, under four modes with
//! increasing privacy guarantees:
//!
//! * `plain-tlsh` — locality-sensitive TLSH digests matched with a distance
//!   threshold and a per-project reuse ratio rule.
//! * `plain-embed` — token-hash embeddings matched by Euclidean radius and
//!   scored with per-function weights.
//! * `sbb` — similarity-based bucketization: the client queries the server
//!   with a *mutated* digest and refines the returned bucket locally, so the
//!   server never sees true signatures. [`sbb`] also contains the
//!   curious-server attack that quantifies what the mutated queries leak.
//! * `mpc` — two-party additive secret sharing over the `2^64` ring with
//!   trusted-dealer Beaver triples: the server never sees the client's token
//!   tensors and the client never sees the embedding model.
//!
//! The client-side [`filters`] shrink the set of functions that go through
//! the expensive encrypted embedding path, and [`cli::corpus`] generates the
//! seeded synthetic corpora used to evaluate all of the above.
//!
//! The `examples/` directory has one runnable example per capability; the
//! `sca` (client) and `scad` (server) binaries expose the same operations on
//! the command line.

pub mod cli;
pub mod error;
pub mod filters;
pub mod ingest;
pub mod matcher;
pub mod mpc;
pub mod ossdb;
pub mod report;
pub mod sbb;
pub mod signatures;

pub use error::Error;
