use thiserror::Error;

/// Errors raised by the exact and numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// Adaptive quadrature ran out of evaluation budget before meeting its tolerance.
    #[error("{what}: quadrature did not converge (estimate {estimate:e}, error {error:e}, tol {tol:e}, {evaluations} evaluations)")]
    NonConvergence {
        what: &'static str,
        estimate: f64,
        error: f64,
        tol: f64,
        evaluations: u64,
    },

    /// A least-squares fit whose design matrix is too close to singular.
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    /// The series does not determine the requested quantity below its truncation order.
    #[error("indeterminate: {0}")]
    Indeterminate(String),

    /// The element is infinite, so it has no standard part.
    #[error("infinite element has no standard part (leading exponent {leading})")]
    NoStandardPart { leading: i32 },
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
