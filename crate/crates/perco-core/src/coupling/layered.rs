//! Pivot couplings on product-Bernoulli spaces, sampled exactly without
//! enumerating the space.
//!
//! The two coupled laws are products over independent layers and differ
//! in exactly one layer's open probability. Because every coordinate of
//! a layer carries the same probability, each branch of the three-outcome
//! construction depends on a configuration only through its open count,
//! so branches are sampled by drawing a count from the appropriate count
//! law and then a uniformly random subset of that size. Differences of
//! near-identical binomial terms go through `expm1` of log-ratios, which
//! stays accurate even when the two probabilities agree to forty digits
//! (perturbation windows really are that narrow for larger tiles).

use alloc::vec::Vec;

use rand_core::RngCore;

use super::{CouplingError, NORMALIZATION_TOL};
use crate::estimate::powu;
use crate::rng::{random_subset, uniform01};

/// One independent Bernoulli layer: `len` coordinates open with the
/// layer probability, plus the pivot configuration's pattern on it.
#[derive(Clone, Debug)]
pub struct Layer {
    pub len: usize,
    pub prob: f64,
    pub pivot_pattern: Vec<bool>,
}

/// A full configuration across the differing layer and the common layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductConfig {
    pub diff: Vec<bool>,
    pub commons: Vec<Vec<bool>>,
}

/// Which branch of the three-outcome coupling produced a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingBranch {
    /// `X = Y` (off-pivot diagonal).
    Equal,
    /// `X` is the pivot configuration, `Y` is sampled.
    XPivot,
    /// `Y` is the pivot configuration, `X` is sampled.
    YPivot,
    /// Both equal the pivot.
    BothPivot,
}

/// Branch masses of the coupling; they sum to one.
#[derive(Clone, Copy, Debug)]
pub struct BranchMasses {
    pub equal: f64,
    pub x_pivot: f64,
    pub y_pivot: f64,
    pub both_pivot: f64,
    pub tv: f64,
}

/// The pivot coupling of two layered product laws differing in one layer:
/// `X` opens the differing layer's coordinates with `prob_x`, `Y` with
/// `prob_y`; common layers are shared.
#[derive(Clone, Debug)]
pub struct LayeredCoupling {
    diff_len: usize,
    prob_x: f64,
    prob_y: f64,
    diff_pivot: Vec<bool>,
    commons: Vec<Layer>,
    masses: BranchMasses,
    /// Count laws (unnormalized weights indexed by open count) for the
    /// diagonal and the two pivot rows.
    equal_weights: Vec<f64>,
    xrow_weights: Vec<f64>,
    yrow_weights: Vec<f64>,
}

/// Binomial pmf over counts `0..=n` by the stable multiplicative
/// recurrence.
fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    let mut cur = powu(1.0 - p, n as u64);
    let odds = p / (1.0 - p);
    for s in 0..=n {
        w.push(cur);
        cur *= odds * (n - s) as f64 / (s + 1) as f64;
    }
    w
}

/// Count-indexed weights of the three off-pivot branches plus the total
/// variation distance between the two product laws (which the common
/// layers cancel out of).
pub(crate) struct DiffCountStats {
    pub equal_weights: Vec<f64>,
    pub xrow_weights: Vec<f64>,
    pub yrow_weights: Vec<f64>,
    pub tv: f64,
}

pub(crate) fn diff_count_stats(diff_len: usize, prob_x: f64, prob_y: f64) -> DiffCountStats {
    let pmf_x = binomial_pmf(diff_len, prob_x);
    let pmf_y = binomial_pmf(diff_len, prob_y);
    // log(prob_x / prob_y) and log((1-prob_x) / (1-prob_y)) without
    // cancellation for nearly equal probabilities.
    let lr1 = libm::log1p((prob_x - prob_y) / prob_y);
    let lr0 = libm::log1p((prob_y - prob_x) / (1.0 - prob_y));

    let mut equal_weights = Vec::with_capacity(diff_len + 1);
    let mut xrow_weights = Vec::with_capacity(diff_len + 1);
    let mut yrow_weights = Vec::with_capacity(diff_len + 1);
    let (mut sum_pos, mut sum_neg) = (0.0f64, 0.0f64);
    for s in 0..=diff_len {
        let delta = s as f64 * lr1 + (diff_len - s) as f64 * lr0;
        // pmf_x(s) - pmf_y(s), accurate for tiny deltas.
        let diff = pmf_y[s] * libm::expm1(delta);
        equal_weights.push(pmf_x[s].min(pmf_y[s]));
        xrow_weights.push((-diff).max(0.0));
        yrow_weights.push(diff.max(0.0));
        sum_pos += diff.max(0.0);
        sum_neg += (-diff).max(0.0);
    }
    DiffCountStats { equal_weights, xrow_weights, yrow_weights, tv: 0.5 * (sum_pos + sum_neg) }
}

/// Point mass of the pivot configuration: `common_mass` times the
/// differing layer's pattern mass at the given probability.
pub(crate) fn pivot_mass(diff_len: usize, diff_ones: usize, prob: f64, common_mass: f64) -> f64 {
    common_mass * powu(prob, diff_ones as u64) * powu(1.0 - prob, (diff_len - diff_ones) as u64)
}

/// Residual pivot mass of the construction; valid iff nonnegative.
pub(crate) fn residual_mass(
    diff_len: usize,
    prob_x: f64,
    prob_y: f64,
    diff_ones: usize,
    common_mass: f64,
) -> f64 {
    let tv = diff_count_stats(diff_len, prob_x, prob_y).tv;
    let px_star = pivot_mass(diff_len, diff_ones, prob_x, common_mass);
    let py_star = pivot_mass(diff_len, diff_ones, prob_y, common_mass);
    px_star.max(py_star) - tv
}

impl LayeredCoupling {
    pub fn new(
        diff_len: usize,
        prob_x: f64,
        prob_y: f64,
        diff_pivot: Vec<bool>,
        commons: Vec<Layer>,
    ) -> Result<LayeredCoupling, CouplingError> {
        if !(prob_x > 0.0 && prob_x < 1.0) || !(prob_y > 0.0 && prob_y < 1.0) {
            return Err(CouplingError::DegenerateProbability("coupled layer probability"));
        }
        if diff_pivot.len() != diff_len || commons.iter().any(|c| c.pivot_pattern.len() != c.len) {
            return Err(CouplingError::LengthMismatch);
        }

        let stats = diff_count_stats(diff_len, prob_x, prob_y);
        let DiffCountStats { equal_weights, xrow_weights, yrow_weights, tv } = stats;

        let diff_ones = diff_pivot.iter().filter(|&&b| b).count();
        let common_mass: f64 = commons
            .iter()
            .map(|c| {
                let ones = c.pivot_pattern.iter().filter(|&&b| b).count();
                powu(c.prob, ones as u64) * powu(1.0 - c.prob, (c.len - ones) as u64)
            })
            .product();
        let px_star = pivot_mass(diff_len, diff_ones, prob_x, common_mass);
        let py_star = pivot_mass(diff_len, diff_ones, prob_y, common_mass);

        let both_pivot = px_star.max(py_star) - tv;
        if both_pivot < -NORMALIZATION_TOL {
            return Err(CouplingError::LawsTooFarApart { deficit: -both_pivot });
        }
        let masses = BranchMasses {
            equal: ((1.0 - tv) - px_star.min(py_star)).max(0.0),
            x_pivot: (tv - (py_star - px_star).max(0.0)).max(0.0),
            y_pivot: (tv - (px_star - py_star).max(0.0)).max(0.0),
            both_pivot: both_pivot.max(0.0),
            tv,
        };

        Ok(LayeredCoupling {
            diff_len,
            prob_x,
            prob_y,
            diff_pivot,
            commons,
            masses,
            equal_weights,
            xrow_weights,
            yrow_weights,
        })
    }

    pub fn masses(&self) -> &BranchMasses {
        &self.masses
    }

    /// Residual pivot mass; the construction is valid iff this is >= 0.
    pub fn residual(&self) -> f64 {
        self.masses.both_pivot
    }

    pub fn pivot_config(&self) -> ProductConfig {
        ProductConfig {
            diff: self.diff_pivot.clone(),
            commons: self.commons.iter().map(|c| c.pivot_pattern.clone()).collect(),
        }
    }

    fn draw_count<R: RngCore>(&self, rng: &mut R, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = uniform01(rng) * total;
        for (s, &w) in weights.iter().enumerate() {
            if u < w {
                return s;
            }
            u -= w;
        }
        weights.len() - 1
    }

    fn draw_diff_layer<R: RngCore>(&self, rng: &mut R, weights: &[f64]) -> Vec<bool> {
        let count = self.draw_count(rng, weights);
        let mut layer = alloc::vec![false; self.diff_len];
        for i in random_subset(rng, self.diff_len, count) {
            layer[i] = true;
        }
        layer
    }

    fn draw_commons<R: RngCore>(&self, rng: &mut R) -> Vec<Vec<bool>> {
        self.commons
            .iter()
            .map(|c| (0..c.len).map(|_| uniform01(rng) < c.prob).collect())
            .collect()
    }

    /// Draws one coupled pair `(X, Y)`. The support condition holds by
    /// construction: the two configurations are equal unless one of them
    /// is the pivot.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> (ProductConfig, ProductConfig, CouplingBranch) {
        let m = &self.masses;
        let total = m.equal + m.x_pivot + m.y_pivot + m.both_pivot;
        let u = uniform01(rng) * total;
        let pivot = self.pivot_config();

        if u < m.equal {
            let shared = loop {
                let candidate = ProductConfig {
                    diff: self.draw_diff_layer(rng, &self.equal_weights),
                    commons: self.draw_commons(rng),
                };
                if candidate != pivot {
                    break candidate;
                }
            };
            (shared.clone(), shared, CouplingBranch::Equal)
        } else if u < m.equal + m.x_pivot {
            let y = loop {
                let candidate = ProductConfig {
                    diff: self.draw_diff_layer(rng, &self.xrow_weights),
                    commons: self.draw_commons(rng),
                };
                if candidate != pivot {
                    break candidate;
                }
            };
            (pivot, y, CouplingBranch::XPivot)
        } else if u < m.equal + m.x_pivot + m.y_pivot {
            let x = loop {
                let candidate = ProductConfig {
                    diff: self.draw_diff_layer(rng, &self.yrow_weights),
                    commons: self.draw_commons(rng),
                };
                if candidate != pivot {
                    break candidate;
                }
            };
            (x, pivot, CouplingBranch::YPivot)
        } else {
            (pivot.clone(), pivot, CouplingBranch::BothPivot)
        }
    }
}
