//! The range-comparison coupling.
//!
//! An exit batch of the range-`k` model is a random subset of the
//! candidate exit points `∪_{i in offsets} [d]^(k-i)`, each point open
//! independently with probability `q`. This module couples such a batch
//! `A` with a batch `B` of the range-`k+1` model at a strictly smaller
//! probability `q' < q` so that `A` embeds into `B` on every sample:
//! some child section of `B` contains a shifted copy of `A`.
//!
//! The construction runs the layered pivot coupling over `d` independent
//! copies of the exit space (the child sections of the `k+1` batch,
//! which is how a `k+1` batch decomposes), with the pivot tuple
//! `(empty, full, ..., full)`: if `X` hits the pivot, `A` is empty and
//! embeds trivially; if `Y` hits it, section 2 of `B` is full and
//! swallows any `A`; otherwise `X = Y` and section 1 works verbatim.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::layered::{residual_mass, CouplingBranch, LayeredCoupling};
use super::{CouplingError, EXIT_SPACE_CAP, MIN_RESIDUAL};
use crate::explore::suffixes;
use crate::rng::uniform01;
use crate::tree::Vertex;

/// Granularity of the `q'` search grid.
pub const Q_PRIME_STEP: f64 = 1e-4;

/// The candidate exit points `∪_{i in offsets, i <= k} [d]^(k-i)` in
/// shortlex order.
pub fn exit_points(d: u32, k: u32, offsets: &[u32]) -> Vec<Vertex> {
    let mut lengths: Vec<u32> = offsets.iter().filter(|&&i| i <= k).map(|&i| k - i).collect();
    lengths.sort_unstable();
    let mut points = Vec::new();
    for len in lengths {
        for labels in suffixes(d as u8, len) {
            points.push(Vertex::from_labels(&labels).expect("labels are 1-based"));
        }
    }
    points
}

fn check_offsets(offsets: &[u32], k: u32) -> Result<(), CouplingError> {
    let mut seen = BTreeSet::new();
    for &i in offsets {
        if i < 1 || i > k + 1 || !seen.insert(i) {
            return Err(CouplingError::BadOffsets);
        }
    }
    Ok(())
}

fn residual_for(q: f64, q_prime: f64, d: u32, n_points: usize) -> f64 {
    // Pivot tuple (empty, full, ..., full): (d-1) * n_points open coords.
    residual_mass(d as usize * n_points, q, q_prime, (d as usize - 1) * n_points, 1.0)
}

/// Largest `q' < q` on the search grid whose residual pivot mass clears
/// the minimum, or `None` when the window is empty.
pub fn select_q_prime(q: f64, d: u32, n_points: usize) -> Option<f64> {
    if n_points == 0 {
        // Empty exit space: every q' < q couples trivially.
        let q_prime = if q > Q_PRIME_STEP { q - Q_PRIME_STEP } else { q * 0.5 };
        return (q_prime > 0.0).then_some(q_prime);
    }
    let feasible = |j: u64| {
        let q_prime = q - j as f64 * Q_PRIME_STEP;
        q_prime > 0.0 && residual_for(q, q_prime, d, n_points) >= MIN_RESIDUAL
    };
    let j_max = (q / Q_PRIME_STEP) as u64;
    // The residual usually shrinks as the gap grows, so the largest q'
    // is the smallest feasible step; scan exponentially then refine in
    // case small gaps are infeasible but larger ones are not.
    if feasible(1) {
        return Some(q - Q_PRIME_STEP);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while hi <= j_max && !feasible(hi) {
        lo = hi;
        hi *= 2;
    }
    if hi > j_max {
        return None;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(q - hi as f64 * Q_PRIME_STEP)
}

/// Witness of the samplewise embedding: shift `A` by `small`, intersect
/// `B` with the subtree under `large`, shift, and containment holds.
/// Here `small` is always the root, so the check is
/// `for all x in A: large · x in B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominationWitness {
    pub small: Vertex,
    pub large: Vertex,
}

/// One coupled draw of exit batches.
#[derive(Clone, Debug)]
pub struct RangeSample {
    /// Range-`k` batch, a subset of the exit points.
    pub small: BTreeSet<Vertex>,
    /// Range-`k+1` batch: child-section points `(a)·w` plus possibly the
    /// root point when offset `k+1` is requested.
    pub large: BTreeSet<Vertex>,
    pub witness: DominationWitness,
    pub branch: CouplingBranch,
}

impl RangeSample {
    /// Verifies the embedding pointwise.
    pub fn witness_holds(&self) -> bool {
        self.small
            .iter()
            .all(|x| self.large.contains(&self.witness.large.concat(x)))
    }
}

/// Sampler of coupled exit batches for ranges `k` and `k+1`.
#[derive(Clone, Debug)]
pub struct RangeCoupling {
    d: u32,
    k: u32,
    q: f64,
    q_prime: f64,
    points: Vec<Vertex>,
    include_root_point: bool,
    layered: Option<LayeredCoupling>,
}

/// Builds the coupling, selecting the largest feasible `q' < q`.
pub fn range_coupling(
    q: f64,
    k: u32,
    d: u32,
    offsets_plus: &[u32],
) -> Result<RangeCoupling, CouplingError> {
    let points = checked_points(q, k, d, offsets_plus)?;
    let q_prime = select_q_prime(q, d, points.len())
        .ok_or(CouplingError::WindowEmpty { max_feasible: 0.0 })?;
    RangeCoupling::with_q_prime(q, q_prime, k, d, offsets_plus, points)
}

/// Builds the coupling at an explicitly chosen `q' < q` (the joint
/// exploration picks one `q'` that serves every offset set).
pub fn range_coupling_with(
    q: f64,
    q_prime: f64,
    k: u32,
    d: u32,
    offsets_plus: &[u32],
) -> Result<RangeCoupling, CouplingError> {
    let points = checked_points(q, k, d, offsets_plus)?;
    RangeCoupling::with_q_prime(q, q_prime, k, d, offsets_plus, points)
}

fn checked_points(
    q: f64,
    k: u32,
    d: u32,
    offsets_plus: &[u32],
) -> Result<Vec<Vertex>, CouplingError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(CouplingError::DegenerateProbability("q"));
    }
    check_offsets(offsets_plus, k)?;
    let points = exit_points(d, k, offsets_plus);
    if points.len() > EXIT_SPACE_CAP {
        return Err(CouplingError::OutcomeSpaceTooLarge {
            size: points.len(),
            cap: EXIT_SPACE_CAP,
        });
    }
    Ok(points)
}

impl RangeCoupling {
    fn with_q_prime(
        q: f64,
        q_prime: f64,
        k: u32,
        d: u32,
        offsets_plus: &[u32],
        points: Vec<Vertex>,
    ) -> Result<RangeCoupling, CouplingError> {
        if !(q_prime > 0.0 && q_prime < q) {
            return Err(CouplingError::BadPerturbation("q' must satisfy 0 < q' < q"));
        }
        let include_root_point = offsets_plus.contains(&(k + 1));
        let layered = if points.is_empty() {
            None
        } else {
            let n = points.len();
            let mut pivot = alloc::vec![false; d as usize * n];
            for slot in pivot.iter_mut().skip(n) {
                *slot = true;
            }
            Some(LayeredCoupling::new(d as usize * n, q, q_prime, pivot, Vec::new())?)
        };
        Ok(RangeCoupling { d, k, q, q_prime, points, include_root_point, layered })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn q_prime(&self) -> f64 {
        self.q_prime
    }

    pub fn exit_point_count(&self) -> usize {
        self.points.len()
    }

    fn section<'a>(
        &'a self,
        coords: &'a [bool],
        child: usize,
    ) -> impl Iterator<Item = &'a Vertex> + 'a {
        let n = self.points.len();
        self.points
            .iter()
            .enumerate()
            .filter(move |(j, _)| coords[child * n + j])
            .map(|(_, w)| w)
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> RangeSample {
        let (small, mut large, branch) = match &self.layered {
            None => (BTreeSet::new(), BTreeSet::new(), CouplingBranch::Equal),
            Some(layered) => {
                let (x, y, branch) = layered.sample(rng);
                let small: BTreeSet<Vertex> = self.section(&x.diff, 0).cloned().collect();
                let mut large = BTreeSet::new();
                for child in 0..self.d as usize {
                    let prefix = Vertex::from_labels(&[(child + 1) as u8]).expect("1-based");
                    for w in self.section(&y.diff, child) {
                        large.insert(prefix.concat(w));
                    }
                }
                (small, large, branch)
            }
        };
        // Offset k+1 contributes the single root point, sampled
        // independently and unioned in; adding points keeps the witness.
        if self.include_root_point && uniform01(rng) < self.q_prime {
            large.insert(Vertex::root());
        }
        let witness = match branch {
            CouplingBranch::Equal => DominationWitness {
                small: Vertex::root(),
                large: Vertex::from_labels(&[1]).expect("1-based"),
            },
            CouplingBranch::YPivot => DominationWitness {
                small: Vertex::root(),
                large: Vertex::from_labels(&[2]).expect("1-based"),
            },
            // The small side is empty on these branches.
            CouplingBranch::XPivot | CouplingBranch::BothPivot => {
                DominationWitness { small: Vertex::root(), large: Vertex::root() }
            }
        };
        RangeSample { small, large, witness, branch }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::vec;

    fn v(labels: &[u8]) -> Vertex {
        Vertex::from_labels(labels).unwrap()
    }

    #[test]
    fn exit_point_enumeration() {
        assert_eq!(exit_points(2, 2, &[1, 2]), vec![Vertex::root(), v(&[1]), v(&[2])]);
        assert_eq!(exit_points(2, 2, &[1]), vec![v(&[1]), v(&[2])]);
        assert_eq!(exit_points(2, 1, &[1]), vec![Vertex::root()]);
        // Offsets above k contribute nothing to the base space.
        assert_eq!(exit_points(2, 1, &[2]), vec![]);
    }

    #[test]
    fn empty_offsets_couple_trivially() {
        let rc = range_coupling(0.4, 1, 2, &[]).unwrap();
        assert!(rc.q_prime() < 0.4 && rc.q_prime() > 0.0);
        let mut rng = stream_rng(2);
        for _ in 0..50 {
            let s = rc.sample(&mut rng);
            assert!(s.small.is_empty() && s.large.is_empty());
            assert!(s.witness_holds());
        }
    }

    #[test]
    fn q_prime_contract() {
        for (q, k, d, offsets) in
            [(0.35, 1, 2, vec![1]), (0.2, 2, 2, vec![1, 2]), (0.5, 2, 3, vec![2])]
        {
            let rc = range_coupling(q, k, d, &offsets).unwrap();
            assert!(rc.q_prime() < q, "q' = {} !< q = {q}", rc.q_prime());
            assert!(rc.q_prime() > 0.0);
        }
    }

    #[test]
    fn bad_offsets_rejected() {
        assert!(matches!(range_coupling(0.3, 2, 2, &[0]), Err(CouplingError::BadOffsets)));
        assert!(matches!(range_coupling(0.3, 2, 2, &[4]), Err(CouplingError::BadOffsets)));
        assert!(matches!(range_coupling(0.3, 2, 2, &[1, 1]), Err(CouplingError::BadOffsets)));
    }

    #[test]
    fn oversized_exit_space_rejected() {
        // d = 3, k = 3, full offsets: 9 + 3 + 1 = 13 points is fine, but
        // d = 5, k = 2 with offset 1 gives 25 > 20.
        assert!(matches!(
            range_coupling(0.3, 2, 5, &[1]),
            Err(CouplingError::OutcomeSpaceTooLarge { size: 25, cap: 20 })
        ));
    }

    #[test]
    fn witness_holds_on_every_sample() {
        let rc = range_coupling(0.35, 1, 2, &[1, 2]).unwrap();
        let mut rng = stream_rng(5);
        let mut branches = [0usize; 3];
        for _ in 0..20_000 {
            let s = rc.sample(&mut rng);
            assert!(s.witness_holds());
            assert!(s.small.len() <= s.large.len());
            match s.branch {
                CouplingBranch::Equal => branches[0] += 1,
                CouplingBranch::XPivot | CouplingBranch::YPivot => branches[1] += 1,
                CouplingBranch::BothPivot => branches[2] += 1,
            }
        }
        // With the gap at one grid step the off-diagonal mass is tiny but
        // the construction must still be exercised overall.
        assert!(branches[0] > 0);
    }

    /// Forces a visible gap so every branch appears, then verifies the
    /// embedding on each.
    #[test]
    fn branches_exercised_at_wide_gap() {
        let rc = range_coupling_with(0.6, 0.35, 1, 2, &[1]).unwrap();
        let mut rng = stream_rng(11);
        let mut seen = [false; 4];
        for _ in 0..20_000 {
            let s = rc.sample(&mut rng);
            assert!(s.witness_holds());
            seen[match s.branch {
                CouplingBranch::Equal => 0,
                CouplingBranch::XPivot => 1,
                CouplingBranch::YPivot => 2,
                CouplingBranch::BothPivot => 3,
            }] = true;
        }
        assert!(seen.iter().all(|&b| b), "branches seen: {seen:?}");
    }

    /// Marginals: `A` opens each exit point with probability `q`; `B`
    /// opens each child-section point with probability `q'`,
    /// independently across points (checked at 4-sigma binomial slack).
    #[test]
    fn sampled_marginals_match() {
        let (q, q_prime) = (0.6, 0.35);
        let rc = range_coupling_with(q, q_prime, 1, 2, &[1, 2]).unwrap();
        let mut rng = stream_rng(19);
        let n = 40_000u32;
        let mut small_open = 0u32;
        let mut large_open = [0u32; 2];
        let mut large_both = 0u32;
        let mut root_open = 0u32;
        for _ in 0..n {
            let s = rc.sample(&mut rng);
            small_open += s.small.contains(&Vertex::root()) as u32;
            let l1 = s.large.contains(&v(&[1]));
            let l2 = s.large.contains(&v(&[2]));
            large_open[0] += l1 as u32;
            large_open[1] += l2 as u32;
            large_both += (l1 && l2) as u32;
            root_open += s.large.contains(&Vertex::root()) as u32;
        }
        let slack = 4.0 * (0.25f64 / n as f64).sqrt();
        assert!((small_open as f64 / n as f64 - q).abs() < slack);
        for open in large_open {
            assert!((open as f64 / n as f64 - q_prime).abs() < slack);
        }
        assert!((large_both as f64 / n as f64 - q_prime * q_prime).abs() < slack);
        assert!((root_open as f64 / n as f64 - q_prime).abs() < slack);
    }

    /// The `k+1` batch decomposes into i.i.d. child sections with the
    /// `k` batch law: chi-square goodness of fit over the joint section
    /// histogram (d = 2, k = 1, so 4 joint cells).
    #[test]
    fn section_decomposition_chi_square() {
        let (q, q_prime) = (0.5, 0.3);
        let rc = range_coupling_with(q, q_prime, 1, 2, &[1]).unwrap();
        let mut rng = stream_rng(23);
        let n = 50_000u32;
        let mut counts = [0u32; 4];
        for _ in 0..n {
            let s = rc.sample(&mut rng);
            let c1 = s.large.contains(&v(&[1])) as usize;
            let c2 = s.large.contains(&v(&[2])) as usize;
            counts[c1 << 1 | c2] += 1;
        }
        let expect = |c1: usize, c2: usize| {
            let p1 = if c1 == 1 { q_prime } else { 1.0 - q_prime };
            let p2 = if c2 == 1 { q_prime } else { 1.0 - q_prime };
            n as f64 * p1 * p2
        };
        let mut chi2 = 0.0;
        for c1 in 0..2 {
            for c2 in 0..2 {
                let e = expect(c1, c2);
                let o = counts[c1 << 1 | c2] as f64;
                chi2 += (o - e) * (o - e) / e;
            }
        }
        // chi-square 0.999 quantile at 3 degrees of freedom (scipy).
        assert!(chi2 < 16.26623619623813, "chi2 = {chi2}, counts {counts:?}");
    }
}
