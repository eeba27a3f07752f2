//! Survival-probability estimation and critical-curve bracketing.
//!
//! The survival probability `theta(p, q)` is approximated by the
//! frequency of depth-`L` reachability over independent seeded trials;
//! the critical value `q_c(p)` is bracketed by bisecting `q` and
//! classifying each probe as super- or subcritical.
//!
//! # Classifier threshold
//!
//! Truncation at depth `L` inflates survival: at the critical point the
//! depth-`L` survival rate does not vanish but plateaus near the
//! survival probability of a critical branching process over `L/k`
//! generations (about 0.13..0.17 at `L = 30` for small `d`, `k`). A
//! probe is therefore classified supercritical only when its confidence
//! interval clears that plateau plus a safety margin, and subcritical
//! when it stays below. This keeps supercritical calls sound (the
//! plateau is the worst case at or below criticality) while staying
//! responsive just above the critical point, at the price of a small
//! upward bias in the returned brackets.

use alloc::vec::Vec;
use core::ops::Range;

use crate::explore::{self, ExploreError, DEFAULT_BUDGET};
use crate::rng::substream;
use crate::sampler::ConfigSample;
use crate::tree::{ModelError, ModelParams};

/// Safety margin added to the critical truncation plateau; covers the
/// binomial CI width at the trial cap plus model deviation for mixed
/// short/long regimes.
pub const THETA_MARGIN: f64 = 0.025;

/// 95% normal quantile used by the Wilson interval.
pub const WILSON_Z: f64 = 1.96;

pub const DEFAULT_L: usize = 30;
pub const DEFAULT_TRIALS_MAX: u64 = 32_000;
pub const DEFAULT_TOL: f64 = 0.005;

const STREAM_THETA: u64 = 0x7468_6574_6121;
const STREAM_PROBE: u64 = 0x7072_6f62_6521;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EstimateError {
    Model(ModelError),
    Explore(ExploreError),
    /// Bisection tolerance must be at least 1e-3.
    ToleranceTooFine,
    ZeroTrials,
}

impl core::fmt::Display for EstimateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EstimateError::Model(e) => write!(f, "{e}"),
            EstimateError::Explore(e) => write!(f, "{e}"),
            EstimateError::ToleranceTooFine => write!(f, "tolerance below 1e-3"),
            EstimateError::ZeroTrials => write!(f, "at least one trial required"),
        }
    }
}

impl core::error::Error for EstimateError {}

impl From<ModelError> for EstimateError {
    fn from(e: ModelError) -> Self {
        EstimateError::Model(e)
    }
}

impl From<ExploreError> for EstimateError {
    fn from(e: ExploreError) -> Self {
        EstimateError::Explore(e)
    }
}

/// `x^n` by binary exponentiation; deterministic across platforms.
pub(crate) fn powu(x: f64, mut n: u64) -> f64 {
    let mut base = x;
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

/// Survival probability of a Galton-Watson process with offspring
/// distribution Binomial(m, theta): the largest fixed point of
/// `s = 1 - (1 - theta * s)^m`, found by iterating from `s = 1` until
/// successive values differ by at most 1e-12. Zero iff `m * theta <= 1`.
pub fn gw_survival(m: u64, theta: f64) -> f64 {
    assert!(m >= 1, "offspring count must be positive");
    assert!((0.0..=1.0).contains(&theta), "theta must be a probability");
    if m as f64 * theta <= 1.0 {
        return 0.0;
    }
    let mut s = 1.0f64;
    for _ in 0..100_000_000u64 {
        let next = 1.0 - powu(1.0 - theta * s, m);
        if (next - s).abs() <= 1e-12 {
            return next;
        }
        s = next;
    }
    s
}

/// Analytic lower bound on the critical long-edge probability:
/// `max(0, d^-k - d^(-k+1) p)`, the line where the expected number of
/// open edges out of a vertex equals one.
pub fn lower_bound_qc(p: f64, d: u32, k: u32) -> f64 {
    let dk = powu(d as f64, k as u64);
    ((1.0 - d as f64 * p) / dk).max(0.0)
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials >= 1);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * libm::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Depth-`l` survival rate of the critical pure-long branching process
/// (offspring Binomial(d^k, d^-k)) — the truncation plateau the probe
/// classifier must clear.
pub fn critical_plateau(d: u32, k: u32, l: usize) -> f64 {
    let m = (d as u64).pow(k);
    let theta = 1.0 / m as f64;
    let generations = l / k as usize;
    let mut s = 1.0f64;
    for _ in 0..generations {
        s = 1.0 - powu(1.0 - theta * s, m);
    }
    s
}

/// Outcome of one survival trial.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrialOutcome {
    pub survived: bool,
    pub budget_hit: bool,
}

/// Mergeable trial counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub trials: u64,
    pub survivals: u64,
    pub budget_hits: u64,
}

impl Tally {
    pub fn absorb(&mut self, outcome: TrialOutcome) {
        self.trials += 1;
        self.survivals += outcome.survived as u64;
        self.budget_hits += outcome.budget_hit as u64;
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.survivals += other.survivals;
        self.budget_hits += other.budget_hits;
        self
    }
}

/// Executes a range of independent trials. The serial implementation
/// lives here; the CLI crate provides a thread-pool one. Results must
/// not depend on execution order (the tally is a sum).
pub trait TrialPool {
    fn run(&self, trials: Range<u64>, trial: &(dyn Fn(u64) -> TrialOutcome + Sync)) -> Tally;
}

/// Runs trials one after another on the calling thread.
pub struct SerialPool;

impl TrialPool for SerialPool {
    fn run(&self, trials: Range<u64>, trial: &(dyn Fn(u64) -> TrialOutcome + Sync)) -> Tally {
        let mut tally = Tally::default();
        for i in trials {
            tally.absorb(trial(i));
        }
        tally
    }
}

/// One survival trial: explore the configuration derived from
/// `(seed, stream, index)` and test depth-`l` reachability.
pub fn survival_trial(
    params: ModelParams,
    l: usize,
    budget: usize,
    seed: u64,
    stream: u64,
    index: u64,
) -> TrialOutcome {
    let cfg = ConfigSample::new(params, substream(seed, &[stream, index]));
    let s = explore::survives(&cfg, l, budget)
        .expect("internally constructed edges are well-formed");
    TrialOutcome { survived: s.survived, budget_hit: s.budget_hit }
}

/// Monte Carlo estimate of the depth-`l` survival probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaEstimate {
    pub d: u32,
    pub k: u32,
    pub p: f64,
    pub q: f64,
    pub l: usize,
    pub trials: u64,
    pub survivals: u64,
    pub theta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub budget_hits: u64,
    pub seed: u64,
}

pub fn estimate_theta<P: TrialPool>(
    params: ModelParams,
    l: usize,
    trials: u64,
    seed: u64,
    budget: usize,
    pool: &P,
) -> Result<ThetaEstimate, EstimateError> {
    if trials == 0 {
        return Err(EstimateError::ZeroTrials);
    }
    let tally = pool.run(0..trials, &move |i| {
        survival_trial(params, l, budget, seed, STREAM_THETA, i)
    });
    let (ci_lo, ci_hi) = wilson_interval(tally.survivals, trials);
    Ok(ThetaEstimate {
        d: params.d,
        k: params.k,
        p: params.p,
        q: params.q,
        l,
        trials,
        survivals: tally.survivals,
        theta_hat: tally.survivals as f64 / trials as f64,
        ci_lo,
        ci_hi,
        budget_hits: tally.budget_hits,
        seed,
    })
}

/// Settings for critical-curve bracketing.
#[derive(Clone, Copy, Debug)]
pub struct QcConfig {
    pub d: u32,
    pub k: u32,
    pub l: usize,
    /// Per-probe trial cap; probes start at a sixteenth of this and
    /// double while their interval straddles the decision threshold.
    pub trials_max: u64,
    /// Target bracket width in `q`.
    pub tol: f64,
    pub budget: usize,
    pub seed: u64,
    /// Decision threshold override; `None` derives plateau + margin.
    pub theta_min: Option<f64>,
}

impl QcConfig {
    pub fn new(d: u32, k: u32, seed: u64) -> QcConfig {
        QcConfig {
            d,
            k,
            l: DEFAULT_L,
            trials_max: DEFAULT_TRIALS_MAX,
            tol: DEFAULT_TOL,
            budget: DEFAULT_BUDGET,
            seed,
            theta_min: None,
        }
    }

    pub fn effective_theta_min(&self) -> f64 {
        self.theta_min
            .unwrap_or_else(|| critical_plateau(self.d, self.k, self.l) + THETA_MARGIN)
    }
}

/// A confidence bracket `[qc_lo, qc_hi]` for the critical probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QcBracket {
    pub p: f64,
    pub qc_lo: f64,
    pub qc_hi: f64,
    /// Some probe stayed straddling the threshold at the trial cap; the
    /// bracket was returned early and may be wider than the tolerance.
    pub undecided: bool,
    pub budget_hits: u64,
    pub probes: u32,
}

#[derive(Clone, Copy, PartialEq)]
enum ProbeClass {
    Supercritical,
    Subcritical,
    Undecided,
}

/// Brackets `q_c(p)` by bisection on `[0, d^-k]`.
///
/// A probe is supercritical when the Wilson lower bound of its survival
/// rate clears the decision threshold, subcritical when the upper bound
/// stays below; otherwise trials double up to the cap and the bisection
/// stops early with the `undecided` flag.
pub fn estimate_qc<P: TrialPool>(
    p: f64,
    cfg: &QcConfig,
    pool: &P,
) -> Result<QcBracket, EstimateError> {
    if cfg.tol < 1e-3 {
        return Err(EstimateError::ToleranceTooFine);
    }
    // Above 1/d the short edges percolate on their own.
    if p >= 1.0 / cfg.d as f64 {
        ModelParams::new(cfg.d, cfg.k, p, 0.0)?;
        return Ok(QcBracket { p, qc_lo: 0.0, qc_hi: 0.0, undecided: false, budget_hits: 0, probes: 0 });
    }
    let theta_min = cfg.effective_theta_min();
    let base = (cfg.trials_max / 16).max(1);

    let mut lo = 0.0f64;
    let mut hi = 1.0 / powu(cfg.d as f64, cfg.k as u64);
    let mut budget_hits = 0u64;
    let mut probes = 0u32;
    let mut undecided = false;

    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let params = ModelParams::new(cfg.d, cfg.k, p, mid)?;
        let probe_stream = substream(cfg.seed, &[STREAM_PROBE, probes as u64]);

        let mut tally = Tally::default();
        let class = loop {
            let target = (tally.trials.max(base / 2) * 2).clamp(base, cfg.trials_max);
            let fresh = pool.run(tally.trials..target, &move |i| {
                survival_trial(params, cfg.l, cfg.budget, cfg.seed, probe_stream, i)
            });
            tally = tally.merge(fresh);
            let (ci_lo, ci_hi) = wilson_interval(tally.survivals, tally.trials);
            if ci_lo > theta_min {
                break ProbeClass::Supercritical;
            }
            if ci_hi < theta_min {
                break ProbeClass::Subcritical;
            }
            if tally.trials >= cfg.trials_max {
                break ProbeClass::Undecided;
            }
        };
        budget_hits += tally.budget_hits;
        probes += 1;
        match class {
            ProbeClass::Supercritical => hi = mid,
            ProbeClass::Subcritical => lo = mid,
            ProbeClass::Undecided => {
                undecided = true;
                break;
            }
        }
    }

    debug_assert!(
        hi + 1e-12 >= lower_bound_qc(p, cfg.d, cfg.k),
        "bracket fell below the branching-process bound"
    );
    Ok(QcBracket { p, qc_lo: lo, qc_hi: hi, undecided, budget_hits, probes })
}

/// One row of a critical-curve sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    pub p: f64,
    pub qc_lo: f64,
    pub qc_hi: f64,
    pub undecided: bool,
    /// Raw upper bracket rose against the sweep direction and was
    /// clipped to keep `qc_hi` non-increasing.
    pub isotonic_clipped: bool,
    pub budget_hits: u64,
}

/// A swept critical curve with its estimation metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveEstimate {
    pub d: u32,
    pub k: u32,
    pub l: usize,
    pub theta_min: f64,
    pub trials_max: u64,
    pub tol: f64,
    pub rows: Vec<CurveRow>,
}

/// Evenly spaced grid of `points` values on `[0, 1/d]`.
pub fn default_p_grid(d: u32, points: usize) -> Vec<f64> {
    assert!(points >= 2);
    let hi = 1.0 / d as f64;
    (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect()
}

/// Brackets the critical curve over a grid of `p` values. Rows come out
/// sorted by `p` with `qc_hi` made non-increasing by isotonic clipping
/// (violations are flagged, not hidden).
pub fn sweep_curve<P: TrialPool>(
    cfg: &QcConfig,
    p_grid: &[f64],
    pool: &P,
) -> Result<CurveEstimate, EstimateError> {
    let mut grid: Vec<f64> = p_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("grid must not contain NaN"));
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &p) in grid.iter().enumerate() {
        let point_cfg = QcConfig { seed: substream(cfg.seed, &[0x6772_6964, i as u64]), ..*cfg };
        let b = estimate_qc(p, &point_cfg, pool)?;
        rows.push(CurveRow {
            p,
            qc_lo: b.qc_lo,
            qc_hi: b.qc_hi,
            undecided: b.undecided,
            isotonic_clipped: false,
            budget_hits: b.budget_hits,
        });
    }
    for i in 1..rows.len() {
        if rows[i].qc_hi > rows[i - 1].qc_hi {
            rows[i].qc_hi = rows[i - 1].qc_hi;
            rows[i].isotonic_clipped = true;
        }
        if rows[i].qc_lo > rows[i].qc_hi {
            rows[i].qc_lo = rows[i].qc_hi;
        }
    }
    Ok(CurveEstimate {
        d: cfg.d,
        k: cfg.k,
        l: cfg.l,
        theta_min: cfg.effective_theta_min(),
        trials_max: cfg.trials_max,
        tol: cfg.tol,
        rows,
    })
}
