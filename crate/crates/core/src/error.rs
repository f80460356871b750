//! Error types shared across the crate.
//!
//! Every analysis routine returns `Result<_, Error>`. The variants split into
//! three families: malformed input (axis specs, shapes, non-finite entries),
//! desk-scale limits (dense synthesis would be too large), and genuine
//! mathematical verdicts (the states differ, the gauge is not unique, the map
//! is not a Kronecker product). Callers that want to distinguish "the theorem
//! says no" from "the input was bad" can match on the variant.

use thiserror::Error;

/// Unified error type for all tensor-network analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Axis lists for a matricization do not form a disjoint cover of the
    /// tensor's axes.
    #[error("invalid axis specification: {0}")]
    AxisSpec(String),

    /// Dimensions of the inputs are inconsistent with the operation.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A NaN or infinity showed up where a finite number was required.
    #[error("non-finite entry at flat index {index}")]
    NonFinite { index: usize },

    /// Synthesizing the requested dense object would exceed the configured
    /// amplitude cap.
    #[error("desk-scale cap exceeded: {needed} amplitudes needed, cap is {cap}")]
    DeskScaleExceeded { needed: u128, cap: u64 },

    /// A matrix that had to be a Kronecker product of the requested factor
    /// shapes is not one; carries the relative rank-1 residual of the failing
    /// reshuffle.
    #[error("not a Kronecker product (relative residual {residual:.3e})")]
    NotAKroneckerProduct { residual: f64 },

    /// Input claimed to be a density matrix is not Hermitian positive
    /// semidefinite within tolerance.
    #[error("not a density matrix: {0}")]
    NotADensityMatrix(String),

    /// The contracted network is numerically the zero vector.
    #[error("the network contracts to the zero state")]
    ZeroState,

    /// Two specs that were required to represent the same physical state do
    /// not, up to a global scalar.
    #[error("states are not equal up to a scalar (relative residual {residual:.3e})")]
    NotSameState { residual: f64 },

    /// The intertwiner space has the wrong dimension, so no unique gauge
    /// exists. `dim` is the computed dimension (0 means no solution at all).
    #[error("gauge is not unique: intertwiner space has dimension {dim}")]
    NonUniqueGauge { dim: usize },

    /// The recovered gauge matrix is singular or numerically unusable.
    #[error("gauge matrix is ill conditioned (condition number {cond:.3e})")]
    IllConditionedGauge { cond: f64 },

    /// A rank precondition failed (for example the split lemma needs full
    /// row rank on the inner factors).
    #[error("rank precondition failed: {0}")]
    RankDeficient(String),

    /// The factorization identities could not be verified within tolerance.
    #[error("factorization failed verification (relative residual {residual:.3e})")]
    NotFactorizable { residual: f64 },

    /// An invertible map on a tensor product space does not send product
    /// vectors to product vectors.
    #[error("map is not product preserving")]
    NotProductPreserving,

    /// The candidate operation does not leave the state invariant.
    #[error("not a symmetry of the state (relative residual {residual:.3e})")]
    NotASymmetry { residual: f64 },

    /// Leg dimensions are incompatible with the requested transformation
    /// (for example a quarter rotation needs equal horizontal and vertical
    /// bond dimensions).
    #[error("incompatible bond dimensions: {0}")]
    IncompatibleBonds(String),

    /// A search (for example for the minimal injective region) exhausted its
    /// cap without success.
    #[error("not found below cap {cap}: best rank {best_rank} of target {target}")]
    NotFoundBelowCap {
        cap: usize,
        best_rank: usize,
        target: usize,
    },

    /// The operation is not defined for this kind of spec.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// A LAPACK or BLAS call failed.
    #[error(transparent)]
    LinAlg(#[from] ndarray_linalg::error::LinalgError),
}

pub type Result<T> = std::result::Result<T, Error>;
