use thiserror::Error;

use crate::quadrature::IntegrabilityVerdict;

/// Errors shared by the geometry, quadrature, form-evaluation, measure and
/// flow modules.
#[derive(Debug, Error)]
pub enum Error {
    /// The metric matrix failed the positive-definiteness cutoff at a point
    /// that is not inside any declared singular stratum.
    #[error("degenerate metric at {point:?}: eigenvalue ratio {ratio:.3e} below cutoff")]
    DegenerateMetric { point: Vec<f64>, ratio: f64 },

    /// Evaluation was requested inside a stratum's exclusion radius and the
    /// field has no analytic closure there.
    #[error("evaluation at {point:?} lies inside a singular exclusion radius and no analytic closure is available")]
    SingularEvaluation { point: Vec<f64> },

    /// Two fields that must live on the same chart do not.
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    /// A transition Jacobian was not invertible where it was needed.
    #[error("chart transition is degenerate at {point:?}")]
    ChartDegeneracy { point: Vec<f64> },

    /// An integrand produced NaN or infinity.
    #[error("integrand returned a non-finite value at {point:?}")]
    IntegrandFailure { point: Vec<f64> },

    /// An operation needed analytic data (derivative closure, Laplacian
    /// oracle, transition map, ...) that the input does not carry.
    #[error("missing analytic closure: {0}")]
    MissingClosure(String),

    /// The smooth-curvature oracle was invoked on a region touched by a
    /// singular stratum.
    #[error("smooth oracle ineligible: {0}")]
    OracleIneligible(String),

    /// Shell sums of the form integrand diverge: the connection is not tame
    /// on the given test data. Carries the full integrability diagnostic.
    #[error("tameness violation: form integrand has diverging shell sums")]
    TamenessViolation { verdict: Box<IntegrabilityVerdict> },

    /// A scheme or configuration value violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidScheme(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
