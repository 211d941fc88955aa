//! Numerical laboratory for recursive MA(1) coefficient estimation under
//! possible model misspecification.
//!
//! The observed series y_t is fit by an MA(1) whether or not it came from
//! one. A single recursion family, indexed by beta in [0, 1], spans
//! pseudolinear regression (beta = 0) and recursive maximum likelihood with
//! filtered regressors (beta = 1). The crate provides:
//!
//! - [`model`]: data-generating processes (ARMA, exponential-spectrum,
//!   white noise) and their linear representations;
//! - [`spectral`]: the population functionals driving the analysis -- the
//!   prediction-error loss, the mean field f(theta, beta) whose zeros are
//!   the possible estimator limits, and the stationary moments;
//! - [`residue`]: closed-form evaluation of the mean field for rational
//!   spectra by residue calculus, an independent cross-check on quadrature;
//! - [`zero_set`]: bracketing/bisection solvers for zero sets of the mean
//!   field and for loss minimizers;
//! - [`sim`]: seeded simulation of data paths with bounded innovations,
//!   plus the fixed-theta filter series used as references;
//! - [`estimator`]: the online recursion itself with optional monitoring,
//!   its regression-form replay, kernel-coefficient diagnostics, and the
//!   averaged-moment approximating sequence with its Robbins-Monro
//!   decomposition;
//! - [`rm`]: a deterministic Robbins-Monro iterator used as a convergence
//!   oracle.

pub mod error;
pub mod estimator;
pub mod model;
pub mod poly;
pub mod quadrature;
pub mod residue;
pub mod rm;
pub mod sim;
pub mod spectral;
pub mod zero_set;

pub use error::{Error, Result};
pub use model::SpectralModel;
pub use quadrature::QuadratureSpec;
