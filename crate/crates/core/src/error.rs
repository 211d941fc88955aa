//! Error type shared across the crate.

use thiserror::Error;

/// Unified error type for model validation, quadrature, residue
/// evaluation, simulation, and the recursive estimator.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Frequency outside [-pi, pi].
    #[error("frequency {omega} outside [-pi, pi]")]
    OmegaOutOfDomain { omega: f64 },

    /// Coefficient outside the open interval the functionals accept.
    #[error("theta {theta} outside |theta| <= {limit}")]
    ThetaOutOfDomain { theta: f64, limit: f64 },

    /// Mixing weight outside [0, 1].
    #[error("beta {beta} outside [0, 1]")]
    BetaOutOfDomain { beta: f64 },

    /// Model violates a structural invariant (root locations, variance
    /// positivity, coefficient sanity).
    #[error("invalid model: {reason}")]
    InvalidModel { reason: String },

    /// Operation requires a rational (ARMA) spectrum.
    #[error("operation requires an ARMA model")]
    NotArma,

    /// Node doubling exhausted without meeting the relative tolerance.
    #[error("quadrature did not converge: last change {last_change:e} > tol {tol:e} after {doublings} doublings")]
    QuadratureNoConvergence {
        last_change: f64,
        tol: f64,
        doublings: u32,
    },

    /// A root-finding step failed to produce usable roots.
    #[error("root finding failed: {reason}")]
    RootFinding { reason: String },

    /// Pole inventory is numerically ambiguous: a reflected AR root sits
    /// within 1e-9 of another pole location.
    #[error("degenerate pole configuration: {detail}")]
    DegeneratePoles { detail: String },

    /// Residue sum came out with a non-negligible imaginary part.
    #[error("residue sum not real: imaginary part {imag:e}")]
    ResidueNotReal { imag: f64 },

    /// Innovation law variance does not match the model's innovation
    /// variance; the simulated spectrum would be off by the ratio.
    #[error("innovation variance {law_var} != model sigma2 {sigma2}")]
    InnovationVarianceMismatch { law_var: f64, sigma2: f64 },

    /// Path shorter than the operation requires.
    #[error("path length {len} below minimum {min}")]
    PathTooShort { len: usize, min: usize },

    /// First observation is exactly zero; the recursion's gain would be
    /// undefined at t = 2.
    #[error("first observation is exactly zero")]
    ZeroFirstSample,

    /// Running gain denominator hit zero.
    #[error("P-bar is zero at t = {t}; cannot form the update gain")]
    GainDenominatorZero { t: usize },

    /// Regression-form replay is only an identity on unclipped runs.
    #[error("trajectory has {count} clip events; regression form requires an unclipped run")]
    ClippedTrajectory { count: usize },

    /// Requested kernel truncation leaves too much coefficient mass.
    #[error("kernel truncation too small: tail mass {tail:e} > {limit:e}")]
    KernelTruncation { tail: f64, limit: f64 },

    /// Iterates left the guard interval; the supplied field is unusable.
    #[error("iterate diverged: |theta| = {value:e} > 1e6 at step {step}")]
    IterateDiverged { step: u64, value: f64 },

    /// The step-size/bias decomposition failed to rebuild the averaged
    /// sequence it was derived from; indicates an implementation bug.
    #[error("decomposition reconstruction off by {error:e} at t = {t}")]
    ReconstructionMismatch { t: usize, error: f64 },

    /// Zero scan found no sign change; contradicts the boundary blow-up
    /// guarantee and indicates a model or quadrature defect.
    #[error("no sign change of the mean field found on the scan grid (beta = {beta})")]
    NoSignChange { beta: f64 },

    /// Generic configuration problem (harness-level validation).
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad inputs or configuration rather than
    /// by a numerical failure at runtime.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::OmegaOutOfDomain { .. }
                | Error::ThetaOutOfDomain { .. }
                | Error::BetaOutOfDomain { .. }
                | Error::InvalidModel { .. }
                | Error::NotArma
                | Error::InnovationVarianceMismatch { .. }
                | Error::PathTooShort { .. }
                | Error::InvalidConfig { .. }
        )
    }
}
