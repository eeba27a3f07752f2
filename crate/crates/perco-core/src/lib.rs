//! Multi-range Bernoulli bond percolation on oriented `d`-ary trees.
//!
//! The graph has vertex set `[d]_*` (all finite label sequences over
//! `{1..d}`), one *short* edge from every vertex to each of its `d`
//! children, and one *long* edge from every vertex to each of its `d^k`
//! descendants exactly `k` levels down. Short edges are open with
//! probability `p`, long edges with probability `q`, independently.
//!
//! The crate provides:
//!
//! * [`tree`] — label-sequence combinatorics (concatenation, ancestry,
//!   traces, shifts);
//! * [`sampler`] — seed-deterministic lazy configurations: the state of
//!   any edge is a pure function of `(seed, edge)`;
//! * [`explore`] — cluster exploration by direct BFS and by the
//!   recursive hub algorithm, plus level statistics and a depth-`L`
//!   survival proxy;
//! * [`coupling`] — three-outcome pivot couplings, tile couplings with
//!   reach-set monotonicity, the range-comparison coupling, and the
//!   joint embedded exploration of the range-`k` cluster into the
//!   range-`k+1` cluster;
//! * [`estimate`] — Galton–Watson oracles, analytic bounds, and Monte
//!   Carlo estimation of survival probabilities and critical curves.
//!
//! The crate is `no_std` (with `alloc`); anything that needs threads or
//! files lives in the companion CLI crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod coupling;
pub mod estimate;
pub mod explore;
pub mod rng;
pub mod sampler;
pub mod tree;

pub use sampler::{ConfigSample, EdgeStates};
pub use tree::{EdgeKind, EdgeRef, ModelParams, Vertex};
