use thiserror::Error;

/// Errors produced by the library.
///
/// Numerical failures are always reported as a typed variant; no operation
/// hands back a NaN in place of an error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated its documented invariant.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// A point lies outside the region where an operation is defined.
    #[error("{what} outside its domain: {detail}")]
    Domain { what: &'static str, detail: String },

    /// A quantity could not be represented in double precision.
    #[error("value out of range while evaluating {context}")]
    OutOfRange { context: &'static str },

    /// Newton iteration for a resonance pole did not settle.
    #[error("pole n = {index} did not converge after {iterations} iterations (residual {residual:.3e})")]
    PoleNotConverged {
        index: usize,
        iterations: usize,
        residual: f64,
    },

    /// Two pole indices converged to the same point.
    #[error("poles n = {first} and n = {second} converged to the same root")]
    PoleCollision { first: usize, second: usize },

    /// A pole lies outside the fourth quadrant (e.g. an antibound pole at very low opacity).
    #[error("pole n = {index} at {re:+.6e}{im:+.6e}i is not in the fourth quadrant")]
    PoleQuadrant { index: usize, re: f64, im: f64 },

    /// A pole or state does not belong to the barrier it is combined with.
    #[error("pole does not satisfy the resonance condition for this barrier (scaled residual {residual:.3e})")]
    PoleMismatch { residual: f64 },

    /// The resonance sum did not reach the requested tail tolerance.
    #[error("tail tolerance {tail_tol:.1e} not reached with {poles} poles (last pair ratio {achieved:.3e})")]
    TailNotReached {
        tail_tol: f64,
        poles: usize,
        achieved: f64,
    },

    /// |Ψ| is too small for a logarithmic derivative to be meaningful.
    #[error("wavefunction node at x = {x} nm, t = {t} fs (|psi| = {magnitude:.3e})")]
    NearNode { x: f64, t: f64, magnitude: f64 },

    /// A bisection bracket did not contain a sign change.
    #[error("no sign change of {quantity} on [{lo}, {hi}]")]
    Bracket {
        quantity: &'static str,
        lo: f64,
        hi: f64,
    },

    /// The finite-difference grid violates one of its contracts.
    #[error("grid: {0}")]
    Grid(String),

    /// Refinement errors of a convergence study did not decrease.
    #[error("non-monotone refinement errors in {axis}: {errors:?}")]
    NonMonotoneRefinement { axis: &'static str, errors: Vec<f64> },
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Domain { .. } | Error::Grid(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
