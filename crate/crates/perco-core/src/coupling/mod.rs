//! Coupling constructions.
//!
//! Everything here builds two random objects on one probability space so
//! that a samplewise comparison holds, and every sample carries enough
//! data to *check* that comparison rather than assume it:
//!
//! * [`law`] — the three-outcome pivot coupling of two finite laws:
//!   `X = Y` unless one of them equals the distinguished pivot outcome;
//! * [`layered`] — the same coupling on product-Bernoulli spaces too
//!   large to enumerate, sampled exactly through count exchangeability;
//! * [`tile`] — couplings of finite tile configurations where a boost in
//!   one edge kind compensates a small loss in the other, with the
//!   reach-set inclusion verified per sample;
//! * [`compare`] — the range-comparison coupling: exit batches of the
//!   range-`k` model embed into exit batches of the range-`k+1` model at
//!   a strictly smaller long-edge probability;
//! * [`joint`] — the embedded joint exploration of whole clusters built
//!   level by level from the range comparison.

mod compare;
mod joint;
mod law;
mod layered;
mod tile;

pub use compare::{exit_points, range_coupling, DominationWitness, RangeCoupling, RangeSample};
pub use joint::{joint_exploration, HubWitness, JointExploration};
pub use law::{pivot_coupling, Coupling, FiniteLaw};
pub use layered::{CouplingBranch, Layer, LayeredCoupling, ProductConfig};
pub use tile::{
    admissible_seed_sets, tile_reach, Tile, TileConfig, TileCoupling, TileSample, TileVariant,
};

use core::fmt;

use crate::explore::ExploreError;
use crate::tree::ModelError;

pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest per-child exit space for which the exact range coupling is
/// constructed.
pub const EXIT_SPACE_CAP: usize = 20;

/// Minimum residual pivot mass accepted when searching the long-edge
/// perturbation for the range coupling.
pub const MIN_RESIDUAL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum CouplingError {
    Model(ModelError),
    Explore(ExploreError),
    /// Probabilities do not sum to one within the tolerance.
    NotNormalized { sum: f64 },
    NegativeProbability { index: usize },
    LengthMismatch,
    PivotOutOfRange,
    /// The three-outcome construction has negative residual mass.
    LawsTooFarApart { deficit: f64 },
    /// No admissible perturbation at the requested size; the largest
    /// feasible symmetric perturbation is reported.
    WindowEmpty { max_feasible: f64 },
    /// Exit space too large for the exact construction; sample the two
    /// sides independently instead of coupling them.
    OutcomeSpaceTooLarge { size: usize, cap: usize },
    /// Coupled layers need probabilities strictly inside (0, 1).
    DegenerateProbability(&'static str),
    /// Perturbed parameters do not straddle the base point as required.
    BadPerturbation(&'static str),
    /// Tile seeds must sit at depths below `k`.
    SeedsOutsideTile,
    /// Offsets must be distinct values in `1..=k+1`.
    BadOffsets,
}

impl fmt::Display for CouplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingError::Model(e) => write!(f, "{e}"),
            CouplingError::Explore(e) => write!(f, "{e}"),
            CouplingError::NotNormalized { sum } => {
                write!(f, "probabilities sum to {sum}, not 1")
            }
            CouplingError::NegativeProbability { index } => {
                write!(f, "negative probability at outcome {index}")
            }
            CouplingError::LengthMismatch => write!(f, "laws live on different outcome spaces"),
            CouplingError::PivotOutOfRange => write!(f, "pivot outcome outside the space"),
            CouplingError::LawsTooFarApart { deficit } => {
                write!(f, "laws too far apart: residual mass short by {deficit:e}")
            }
            CouplingError::WindowEmpty { max_feasible } => {
                write!(
                    f,
                    "perturbation outside the coupling window (max feasible ~{max_feasible:e})"
                )
            }
            CouplingError::OutcomeSpaceTooLarge { size, cap } => {
                write!(f, "exit space has {size} points, exact construction capped at {cap}")
            }
            CouplingError::DegenerateProbability(name) => {
                write!(f, "{name} must lie strictly inside (0, 1)")
            }
            CouplingError::BadPerturbation(what) => write!(f, "{what}"),
            CouplingError::SeedsOutsideTile => {
                write!(f, "tile seeds must lie at depths below k")
            }
            CouplingError::BadOffsets => write!(f, "offsets must be distinct values in 1..=k+1"),
        }
    }
}

impl core::error::Error for CouplingError {}

impl From<ModelError> for CouplingError {
    fn from(e: ModelError) -> Self {
        CouplingError::Model(e)
    }
}

impl From<ExploreError> for CouplingError {
    fn from(e: ExploreError) -> Self {
        CouplingError::Explore(e)
    }
}
