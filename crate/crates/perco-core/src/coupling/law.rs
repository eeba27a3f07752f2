//! Explicit finite-space laws and the three-outcome pivot coupling.

use alloc::vec::Vec;

use rand_core::RngCore;

use super::{CouplingError, NORMALIZATION_TOL};
use crate::rng::uniform01;

/// A probability law on a finite outcome space `0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteLaw {
    probs: Vec<f64>,
}

impl FiniteLaw {
    /// Validates non-negativity and normalization within 1e-12, then
    /// renormalizes exactly.
    pub fn new(probs: Vec<f64>) -> Result<FiniteLaw, CouplingError> {
        if let Some(index) = probs.iter().position(|&p| !(p >= 0.0)) {
            return Err(CouplingError::NegativeProbability { index });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(CouplingError::NotNormalized { sum });
        }
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(FiniteLaw { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.probs[outcome]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// An explicit joint law over outcome pairs.
#[derive(Clone, Debug)]
pub struct Coupling {
    size: usize,
    pivot: usize,
    /// `(x, y, mass)` with positive mass, sorted by `(x, y)`.
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.size];
        for &(x, _, w) in &self.entries {
            m[x] += w;
        }
        m
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.size];
        for &(_, y, w) in &self.entries {
            m[y] += w;
        }
        m
    }

    /// Every support point has `x == y`, `x == pivot`, or `y == pivot`.
    pub fn support_is_three_outcome(&self) -> bool {
        self.entries
            .iter()
            .all(|&(x, y, _)| x == y || x == self.pivot || y == self.pivot)
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> (usize, usize) {
        let total: f64 = self.entries.iter().map(|e| e.2).sum();
        let mut u = uniform01(rng) * total;
        for &(x, y, w) in &self.entries {
            if u < w {
                return (x, y);
            }
            u -= w;
        }
        let last = self.entries.last().expect("coupling has positive mass");
        (last.0, last.1)
    }
}

/// Couples `X ~ alpha` with `Y ~ beta` so that almost surely `X = Y`
/// unless `X` or `Y` equals the pivot outcome:
///
/// * `(z, z)` with mass `min(alpha(z), beta(z))` for `z != pivot`,
/// * `(pivot, z)` with mass `(beta(z) - alpha(z))^+`,
/// * `(z, pivot)` with mass `(alpha(z) - beta(z))^+`,
/// * `(pivot, pivot)` with the residual `1 - sum_{z != pivot} max`.
///
/// Fails when the residual is negative, i.e. the laws are too far apart
/// for the given pivot.
pub fn pivot_coupling(
    alpha: &FiniteLaw,
    beta: &FiniteLaw,
    pivot: usize,
) -> Result<Coupling, CouplingError> {
    if alpha.len() != beta.len() {
        return Err(CouplingError::LengthMismatch);
    }
    let size = alpha.len();
    if pivot >= size {
        return Err(CouplingError::PivotOutOfRange);
    }

    let mut max_sum = 0.0;
    for z in 0..size {
        if z != pivot {
            max_sum += alpha.prob(z).max(beta.prob(z));
        }
    }
    let residual = 1.0 - max_sum;
    if residual < -NORMALIZATION_TOL {
        return Err(CouplingError::LawsTooFarApart { deficit: -residual });
    }

    let mut entries = Vec::new();
    for z in 0..size {
        if z == pivot {
            continue;
        }
        let (a, b) = (alpha.prob(z), beta.prob(z));
        let diag = a.min(b);
        if diag > 0.0 {
            entries.push((z, z, diag));
        }
        if b > a {
            entries.push((pivot, z, b - a));
        } else if a > b {
            entries.push((z, pivot, a - b));
        }
    }
    if residual > 0.0 {
        entries.push((pivot, pivot, residual));
    }
    entries.sort_by(|l, r| (l.0, l.1).cmp(&(r.0, r.1)));

    let coupling = Coupling { size, pivot, entries };
    debug_assert!(coupling
        .marginal_x()
        .iter()
        .zip(alpha.probs())
        .all(|(m, p)| (m - p).abs() <= 16.0 * NORMALIZATION_TOL));
    Ok(coupling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::vec;

    #[test]
    fn two_point_example() {
        // S = {a, b}, pivot = b, alpha(a) = 0.5, beta(a) = 0.4.
        let alpha = FiniteLaw::new(vec![0.5, 0.5]).unwrap();
        let beta = FiniteLaw::new(vec![0.4, 0.6]).unwrap();
        let c = pivot_coupling(&alpha, &beta, 1).unwrap();
        assert_eq!(
            c.entries(),
            &[(0, 0, 0.4), (0, 1, 0.09999999999999998), (1, 1, 0.5)]
        );
        assert!(c.support_is_three_outcome());
        for (m, p) in c.marginal_x().iter().zip(alpha.probs()) {
            assert!((m - p).abs() < 1e-12);
        }
        for (m, p) in c.marginal_y().iter().zip(beta.probs()) {
            assert!((m - p).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_laws_couple_diagonally() {
        let law = FiniteLaw::new(vec![0.25, 0.25, 0.5]).unwrap();
        let c = pivot_coupling(&law, &law, 2).unwrap();
        assert!(c.entries().iter().all(|&(x, y, _)| x == y));
        let mut rng = stream_rng(4);
        for _ in 0..200 {
            let (x, y) = c.sample(&mut rng);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn distant_laws_rejected() {
        // alpha(pivot) = 0 and the off-pivot maxima sum above one.
        let alpha = FiniteLaw::new(vec![0.8, 0.2, 0.0]).unwrap();
        let beta = FiniteLaw::new(vec![0.1, 0.9, 0.0]).unwrap();
        assert!(matches!(
            pivot_coupling(&alpha, &beta, 2),
            Err(CouplingError::LawsTooFarApart { .. })
        ));
    }

    #[test]
    fn law_validation() {
        assert!(matches!(
            FiniteLaw::new(vec![0.5, 0.6]),
            Err(CouplingError::NotNormalized { .. })
        ));
        assert!(matches!(
            FiniteLaw::new(vec![1.2, -0.2]),
            Err(CouplingError::NegativeProbability { index: 1 })
        ));
        // Within tolerance: renormalized.
        let law = FiniteLaw::new(vec![0.5, 0.5 + 4e-13]).unwrap();
        assert!((law.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginals_exact_on_random_laws() {
        let mut rng = stream_rng(99);
        for trial in 0..50 {
            let n = 2 + (trial % 7);
            let mut a: Vec<f64> = (0..n).map(|_| uniform01(&mut rng)).collect();
            let mut b: Vec<f64> = a.iter().map(|x| x + 0.05 * uniform01(&mut rng)).collect();
            let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let alpha = FiniteLaw::new(a).unwrap();
            let beta = FiniteLaw::new(b).unwrap();
            // Pick the pivot with the largest joint mass to keep the
            // construction feasible.
            let pivot = (0..n)
                .max_by(|&i, &j| {
                    let mi = alpha.prob(i).min(beta.prob(i));
                    let mj = alpha.prob(j).min(beta.prob(j));
                    mi.partial_cmp(&mj).unwrap()
                })
                .unwrap();
            match pivot_coupling(&alpha, &beta, pivot) {
                Ok(c) => {
                    assert!(c.support_is_three_outcome());
                    let mx = c.marginal_x();
                    let my = c.marginal_y();
                    for z in 0..n {
                        assert!((mx[z] - alpha.prob(z)).abs() < 1e-12);
                        assert!((my[z] - beta.prob(z)).abs() < 1e-12);
                    }
                }
                Err(CouplingError::LawsTooFarApart { .. }) => {}
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }
}
