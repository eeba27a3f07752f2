//! Seed-deterministic lazy percolation configurations.
//!
//! No configuration is ever materialized: the open/closed state of an
//! edge is a pure function of `(seed, edge)`, so the infinite graph can
//! be explored lazily, in any order, from any number of threads, and
//! always looks the same.
//!
//! # Reproducibility contract
//!
//! Each edge is assigned a uniform in `[0, 1)` by hashing a canonical
//! byte encoding with SHA-256 and is open iff that uniform is below `p`
//! (short) or `q` (long). The hashed tuple is, in order:
//!
//! | field       | encoding                        |
//! |-------------|---------------------------------|
//! | kind tag    | 1 byte: 0 short, 1 long         |
//! | tail length | unsigned 32-bit, big-endian     |
//! | tail labels | one byte per 1-based label      |
//! | suffix      | one byte per 1-based label      |
//! | seed        | unsigned 64-bit, big-endian     |
//!
//! The first 16 digest bytes are the 128-bit mix value; the top 53 bits
//! (of the first 8 bytes read big-endian) scaled by 2^-53 give the
//! uniform. Any implementation following this layout reproduces the
//! exact same configurations.
//!
//! Raising `p` or `q` with the seed fixed only turns edges from closed
//! to open, which makes clusters monotone under common random numbers.

use sha2::{Digest, Sha256};

use crate::tree::{EdgeKind, EdgeRef, ModelError, ModelParams};

/// Access to edge states, abstracted so explorations can run against
/// hashed configurations, depth-clipped views, or test fixtures.
pub trait EdgeStates {
    fn params(&self) -> &ModelParams;
    fn is_open(&self, e: &EdgeRef) -> Result<bool, ModelError>;
}

/// A percolation configuration determined by `(params, seed)`.
#[derive(Clone, Copy, Debug)]
pub struct ConfigSample {
    params: ModelParams,
    seed: u64,
}

impl ConfigSample {
    pub fn new(params: ModelParams, seed: u64) -> ConfigSample {
        ConfigSample { params, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The edge's uniform in `[0, 1)` under this seed. Deterministic in
    /// `(seed, edge)` and independent across distinct edges.
    pub fn edge_uniform(&self, e: &EdgeRef) -> Result<f64, ModelError> {
        self.check_edge(e)?;
        let mut h = Sha256::new();
        h.update([match e.kind() {
            EdgeKind::Short => 0u8,
            EdgeKind::Long => 1u8,
        }]);
        h.update((e.tail().depth() as u32).to_be_bytes());
        h.update(e.tail().labels());
        h.update(e.suffix());
        h.update(self.seed.to_be_bytes());
        let digest = h.finalize();
        let word = u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
        Ok((word >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
    }

    /// Open/closed state of an edge: open iff its uniform is below the
    /// kind's probability. Malformed edges (labels out of `1..=d`, suffix
    /// length not 1 or `k`) are rejected.
    pub fn edge_state(&self, e: &EdgeRef) -> Result<bool, ModelError> {
        let threshold = match e.kind() {
            EdgeKind::Short => self.params.p,
            EdgeKind::Long => self.params.q,
        };
        Ok(self.edge_uniform(e)? < threshold)
    }

    fn check_edge(&self, e: &EdgeRef) -> Result<(), ModelError> {
        let expected = match e.kind() {
            EdgeKind::Short => 1,
            EdgeKind::Long => self.params.k as usize,
        };
        if e.suffix().len() != expected {
            return Err(ModelError::BadSuffixLength {
                kind: e.kind(),
                len: e.suffix().len(),
                k: self.params.k,
            });
        }
        let d = self.params.d as u8;
        for &a in e.tail().labels().iter().chain(e.suffix()) {
            if a == 0 || a > d {
                return Err(ModelError::BadLabel(a));
            }
        }
        Ok(())
    }
}

impl EdgeStates for ConfigSample {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn is_open(&self, e: &EdgeRef) -> Result<bool, ModelError> {
        self.edge_state(e)
    }
}
