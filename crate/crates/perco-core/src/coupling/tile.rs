//! Finite tiles and the two compensation couplings on them.
//!
//! A tile holds every edge whose tail sits at depth below `2k`. For a
//! seed set `A` at depths below `k`, the tile's *reach* is the set of
//! vertices at depths `2k..3k-1` connected to `A` through open tile
//! edges — what the tile hands to the next layer of the tiling.
//!
//! Each coupling pairs a configuration triple `X` with a triple `Y`
//! whose marginals trade a loss in one edge kind for a gain in the
//! other. The pivot configuration is chosen so that on the `X = pivot`
//! event the reach is empty, and on the `Y = pivot` event the reach is
//! everything it could possibly be; together with `X = Y` this makes the
//! reach inclusion hold on every sample, not just on average.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::layered::{residual_mass, CouplingBranch, Layer, LayeredCoupling, ProductConfig};
use super::CouplingError;
use crate::explore::suffixes;
use crate::tree::Vertex;

/// Edge enumeration of one tile: all short and long edges with tail
/// depth below `2k`, tail-major in shortlex order.
#[derive(Clone, Debug)]
pub struct Tile {
    d: u32,
    k: u32,
    tails: Vec<Vertex>,
    short_heads: Vec<Vertex>,
    long_heads: Vec<Vertex>,
}

impl Tile {
    pub fn new(d: u32, k: u32) -> Tile {
        let mut tails = Vec::new();
        for depth in 0..2 * k {
            for labels in suffixes(d as u8, depth) {
                tails.push(Vertex::from_labels(&labels).expect("labels are 1-based"));
            }
        }
        let mut short_heads = Vec::new();
        let mut long_heads = Vec::new();
        for tail in &tails {
            for a in 1..=d as u8 {
                short_heads.push(tail.child(a));
            }
            for w in suffixes(d as u8, k) {
                long_heads.push(tail.descend(&w));
            }
        }
        Tile { d, k, tails, short_heads, long_heads }
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn short_count(&self) -> usize {
        self.short_heads.len()
    }

    pub fn long_count(&self) -> usize {
        self.long_heads.len()
    }

    fn tail_index(&self, v: &Vertex) -> Option<usize> {
        self.tails.binary_search(v).ok()
    }

    /// Short edges of the variant-1 pivot: everything open except the
    /// last short layer (tails at depth `2k - 1`).
    fn pivot_shorts(&self) -> Vec<bool> {
        let d = self.d as usize;
        let mut open = Vec::with_capacity(self.short_count());
        for tail in &self.tails {
            let state = tail.depth() != (2 * self.k - 1) as usize;
            open.extend(core::iter::repeat(state).take(d));
        }
        open
    }

    /// Long edges of the variant-2 pivot: open exactly from tails at
    /// depths `k..2k`, the ones whose heads clear depth `2k`.
    fn pivot_longs(&self) -> Vec<bool> {
        let fanout = (self.d as usize).pow(self.k);
        let mut open = Vec::with_capacity(self.long_count());
        for tail in &self.tails {
            let state = tail.depth() >= self.k as usize;
            open.extend(core::iter::repeat(state).take(fanout));
        }
        open
    }
}

/// Open/closed states for every tile edge, aligned with the tile's
/// enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileConfig {
    pub short: Vec<bool>,
    pub long: Vec<bool>,
}

impl TileConfig {
    pub fn all_closed(tile: &Tile) -> TileConfig {
        TileConfig {
            short: alloc::vec![false; tile.short_count()],
            long: alloc::vec![false; tile.long_count()],
        }
    }

    pub fn all_open(tile: &Tile) -> TileConfig {
        TileConfig {
            short: alloc::vec![true; tile.short_count()],
            long: alloc::vec![true; tile.long_count()],
        }
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &TileConfig) -> bool {
        self.short.iter().zip(&other.short).all(|(a, b)| *b || !*a)
            && self.long.iter().zip(&other.long).all(|(a, b)| *b || !*a)
    }
}

/// Vertices at depths `2k..3k-1` reachable from `seeds` through open
/// tile edges. Seeds must sit at depths below `k`.
pub fn tile_reach(
    tile: &Tile,
    config: &TileConfig,
    seeds: &BTreeSet<Vertex>,
) -> Result<BTreeSet<Vertex>, CouplingError> {
    if seeds.iter().any(|s| s.depth() >= tile.k as usize) {
        return Err(CouplingError::SeedsOutsideTile);
    }
    let d = tile.d as usize;
    let fanout = (tile.d as usize).pow(tile.k);

    let mut visited: BTreeSet<Vertex> = seeds.clone();
    let mut frontier: Vec<Vertex> = seeds.iter().cloned().collect();
    while let Some(v) = frontier.pop() {
        let Some(ti) = tile.tail_index(&v) else { continue };
        for (heads, states, width) in [
            (&tile.short_heads, &config.short, d),
            (&tile.long_heads, &config.long, fanout),
        ] {
            for j in ti * width..(ti + 1) * width {
                if states[j] && !visited.contains(&heads[j]) {
                    visited.insert(heads[j].clone());
                    frontier.push(heads[j].clone());
                }
            }
        }
    }
    Ok(visited
        .into_iter()
        .filter(|v| v.depth() >= 2 * tile.k as usize)
        .collect())
}

/// Every seed set a tile coupling must serve: all subsets of the
/// vertices at depths below `k`.
pub fn admissible_seed_sets(d: u32, k: u32) -> Vec<BTreeSet<Vertex>> {
    let mut vertices = Vec::new();
    for depth in 0..k {
        for labels in suffixes(d as u8, depth) {
            vertices.push(Vertex::from_labels(&labels).expect("labels are 1-based"));
        }
    }
    assert!(vertices.len() <= 16, "seed enumeration limited to small tiles");
    (0..1usize << vertices.len())
        .map(|mask| {
            vertices
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect()
}

/// Which edge kind absorbs the perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TileVariant {
    /// Short probability drops from `p` to `p' < p`; the long layer is
    /// boosted from `q` to `q' > q` to compensate.
    LongCompensatesShort,
    /// Long probability drops from `q` to `q' < q`; the short layer is
    /// boosted from `p` to `p' > p`.
    ShortCompensatesLong,
}

/// One coupled draw. `x`/`y` are the raw layer triples (the differing
/// layer first in `ProductConfig::diff`), `omega`/`omega_prime` the
/// assembled tile configurations.
#[derive(Clone, Debug)]
pub struct TileSample {
    pub x: ProductConfig,
    pub y: ProductConfig,
    pub branch: CouplingBranch,
    pub omega: TileConfig,
    pub omega_prime: TileConfig,
}

/// A sampler of coupled tile configuration pairs `(omega, omega')` whose
/// reach sets satisfy `reach(omega, A) ⊆ reach(omega', A)` on every
/// sample and every admissible `A`.
#[derive(Clone, Debug)]
pub struct TileCoupling {
    tile: Tile,
    variant: TileVariant,
    layered: LayeredCoupling,
    /// Marginal parameters of `omega` and `omega_prime`.
    pub params_x: (f64, f64),
    pub params_y: (f64, f64),
}

fn check_unit_interval(pairs: &[(&'static str, f64)]) -> Result<(), CouplingError> {
    for &(name, v) in pairs {
        if !(v > 0.0 && v < 1.0) {
            return Err(CouplingError::DegenerateProbability(name));
        }
    }
    Ok(())
}

impl TileCoupling {
    /// Variant 1: `omega` has marginals `(p, q)`, `omega'` has
    /// `(p', q')` with `p' < p` and `q' > q`. The long boost enters as a
    /// second long layer with probability `(q' - q) / (1 - q)` OR-ed in.
    pub fn long_compensates_short(
        d: u32,
        k: u32,
        p: f64,
        p_prime: f64,
        q: f64,
        q_prime: f64,
    ) -> Result<TileCoupling, CouplingError> {
        check_unit_interval(&[("p", p), ("p'", p_prime), ("q", q), ("q'", q_prime)])?;
        if !(p_prime < p) {
            return Err(CouplingError::BadPerturbation("variant requires p' < p"));
        }
        if !(q < q_prime) {
            return Err(CouplingError::BadPerturbation("variant requires q < q'"));
        }
        let tile = Tile::new(d, k);
        let boost = (q_prime - q) / (1.0 - q);
        let commons = alloc::vec![
            Layer { len: tile.long_count(), prob: q, pivot_pattern: alloc::vec![false; tile.long_count()] },
            Layer { len: tile.long_count(), prob: boost, pivot_pattern: alloc::vec![true; tile.long_count()] },
        ];
        let pivot_shorts = tile.pivot_shorts();
        let layered = LayeredCoupling::new(tile.short_count(), p, p_prime, pivot_shorts, commons)
            .map_err(|e| Self::window_error(e, &tile, TileVariant::LongCompensatesShort, p, p_prime, q, q_prime))?;
        Ok(TileCoupling {
            tile,
            variant: TileVariant::LongCompensatesShort,
            layered,
            params_x: (p, q),
            params_y: (p_prime, q_prime),
        })
    }

    /// Variant 2: `omega` has marginals `(p, q)`, `omega'` has
    /// `(p', q')` with `p' > p` and `q' < q`. The short boost enters as
    /// a second short layer with probability `(p' - p) / (1 - p)`.
    pub fn short_compensates_long(
        d: u32,
        k: u32,
        p: f64,
        p_prime: f64,
        q: f64,
        q_prime: f64,
    ) -> Result<TileCoupling, CouplingError> {
        check_unit_interval(&[("p", p), ("p'", p_prime), ("q", q), ("q'", q_prime)])?;
        if !(p < p_prime) {
            return Err(CouplingError::BadPerturbation("variant requires p < p'"));
        }
        if !(q_prime < q) {
            return Err(CouplingError::BadPerturbation("variant requires q' < q"));
        }
        let tile = Tile::new(d, k);
        let boost = (p_prime - p) / (1.0 - p);
        let commons = alloc::vec![
            Layer { len: tile.short_count(), prob: p, pivot_pattern: alloc::vec![false; tile.short_count()] },
            Layer { len: tile.short_count(), prob: boost, pivot_pattern: alloc::vec![true; tile.short_count()] },
        ];
        let pivot_longs = tile.pivot_longs();
        let layered = LayeredCoupling::new(tile.long_count(), q, q_prime, pivot_longs, commons)
            .map_err(|e| Self::window_error(e, &tile, TileVariant::ShortCompensatesLong, p, p_prime, q, q_prime))?;
        Ok(TileCoupling {
            tile,
            variant: TileVariant::ShortCompensatesLong,
            layered,
            params_x: (p, q),
            params_y: (p_prime, q_prime),
        })
    }

    fn window_error(
        e: CouplingError,
        tile: &Tile,
        variant: TileVariant,
        p: f64,
        p_prime: f64,
        q: f64,
        q_prime: f64,
    ) -> CouplingError {
        if let CouplingError::LawsTooFarApart { .. } = e {
            let max_feasible = match variant {
                TileVariant::LongCompensatesShort => max_feasible_short_delta(
                    tile.d(),
                    tile.k(),
                    0.5 * (p + p_prime),
                    q,
                    q_prime,
                ),
                TileVariant::ShortCompensatesLong => max_feasible_long_delta(
                    tile.d(),
                    tile.k(),
                    0.5 * (q + q_prime),
                    p,
                    p_prime,
                ),
            };
            CouplingError::WindowEmpty { max_feasible }
        } else {
            e
        }
    }

    pub fn tile(&self) -> &Tile {
        &self.tile
    }

    pub fn variant(&self) -> TileVariant {
        self.variant
    }

    pub fn pivot(&self) -> ProductConfig {
        self.layered.pivot_config()
    }

    fn assemble(&self, cfg: &ProductConfig, boosted: bool) -> TileConfig {
        let or = |a: &[bool], b: &[bool]| a.iter().zip(b).map(|(x, y)| *x || *y).collect();
        match self.variant {
            TileVariant::LongCompensatesShort => TileConfig {
                short: cfg.diff.clone(),
                long: if boosted {
                    or(&cfg.commons[0], &cfg.commons[1])
                } else {
                    cfg.commons[0].clone()
                },
            },
            TileVariant::ShortCompensatesLong => TileConfig {
                short: if boosted {
                    or(&cfg.commons[0], &cfg.commons[1])
                } else {
                    cfg.commons[0].clone()
                },
                long: cfg.diff.clone(),
            },
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> TileSample {
        let (x, y, branch) = self.layered.sample(rng);
        let omega = self.assemble(&x, false);
        let omega_prime = self.assemble(&y, true);
        TileSample { x, y, branch, omega, omega_prime }
    }

    /// The three-outcome support condition on the raw triples.
    pub fn support_condition_holds(&self, sample: &TileSample) -> bool {
        let pivot = self.pivot();
        sample.x == sample.y || sample.x == pivot || sample.y == pivot
    }

    /// Reach inclusion for one admissible seed set.
    pub fn reach_inclusion_holds(
        &self,
        sample: &TileSample,
        seeds: &BTreeSet<Vertex>,
    ) -> Result<bool, CouplingError> {
        let reach = tile_reach(&self.tile, &sample.omega, seeds)?;
        let reach_prime = tile_reach(&self.tile, &sample.omega_prime, seeds)?;
        Ok(reach.is_subset(&reach_prime))
    }
}

/// Largest symmetric short-edge perturbation `delta` around `p0` (with
/// the long layers at `q < q'`) for which the variant-1 coupling is
/// valid, found by bisection.
pub fn max_feasible_short_delta(d: u32, k: u32, p0: f64, q: f64, q_prime: f64) -> f64 {
    let tile = Tile::new(d, k);
    let boost = (q_prime - q) / (1.0 - q);
    let n_long = tile.long_count() as u64;
    let common_mass =
        crate::estimate::powu(1.0 - q, n_long) * crate::estimate::powu(boost, n_long);
    let diff_ones = tile.pivot_shorts().iter().filter(|&&b| b).count();
    let feasible = |delta: f64| {
        residual_mass(tile.short_count(), p0 + delta, p0 - delta, diff_ones, common_mass) >= 0.0
    };
    bisect_delta(p0, feasible)
}

/// Largest symmetric long-edge perturbation around `q0` (with the short
/// layers at `p < p'`) for which the variant-2 coupling is valid.
pub fn max_feasible_long_delta(d: u32, k: u32, q0: f64, p: f64, p_prime: f64) -> f64 {
    let tile = Tile::new(d, k);
    let boost = (p_prime - p) / (1.0 - p);
    let n_short = tile.short_count() as u64;
    let common_mass =
        crate::estimate::powu(1.0 - p, n_short) * crate::estimate::powu(boost, n_short);
    let diff_ones = tile.pivot_longs().iter().filter(|&&b| b).count();
    let feasible = |delta: f64| {
        residual_mass(tile.long_count(), q0 + delta, q0 - delta, diff_ones, common_mass) >= 0.0
    };
    bisect_delta(q0, feasible)
}

fn bisect_delta(center: f64, feasible: impl Fn(f64) -> bool) -> f64 {
    let room = center.min(1.0 - center);
    let (mut lo, mut hi) = (0.0f64, room * (1.0 - 1e-9));
    if feasible(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
