//! Integration of densities over chart boxes with adaptive refinement and
//! geometric shells toward singular strata, plus the shell-decay
//! integrability diagnostics.

pub mod diagnostic;
pub mod gauss;
mod integrate;
pub mod scheme;

pub use diagnostic::{
    fit_shell_decay, integrability_diagnostic, FitVerdict, IntegrabilityVerdict,
    StratumDiagnostic, Verdict, SLOPE_DEAD_ZONE,
};
pub use gauss::{adaptive_1d, gauss_legendre, integrate_1d};
pub use integrate::integrate;
pub use scheme::{IntegralResult, QuadratureScheme, ShellTrace};
