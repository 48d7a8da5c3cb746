//! Numerical evaluation of the curvature quadratic form of singular
//! torsion-free connections on coordinate charts.
//!
//! The crate computes the bilinear form
//!
//! ```text
//! Q(V, W) = int sum_ij [ (D_i V^i)(D_j W^j) - (D_i V^j)(D_j W^i) ]
//! ```
//!
//! over compactly supported Lipschitz vector-valued half-densities `V`, `W`,
//! where `D` is the covariant derivative induced on half-density coefficients
//! by a (possibly singular) torsion-free connection. Around declared singular
//! strata the integrals are resolved by geometrically refined shells, which
//! also yield local-integrability verdicts for the connection coefficients.
//! On top of the form sit the measure-extraction routines (vertex atoms,
//! curve densities, absolutely continuous curvature densities) and the weak
//! flow identity checker for time-dependent metric families.

// Index-paired tensor loops and NaN-rejecting negated comparisons are the
// house style of the numeric kernels.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod qform;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
