//! Chart-local representation and evaluation of metrics, Christoffel
//! symbols, conformal factors and vector-valued half-density test fields,
//! including singular-set bookkeeping.

pub mod builtins;
pub mod chart;
pub mod christoffel;
pub mod half_density;
pub mod metric;
pub mod singular;

pub use builtins::{ConformalFactor, CurvatureMeasure, KahlerMetric, PhiField, PhiSpec};
pub use chart::{BoxDomain, Chart, Transition};
pub use christoffel::{
    christoffel_from_metric, christoffel_transform, perturb, ChristoffelField,
    ConnectionPerturbation, DiffScheme, IntegrabilityClass,
};
pub use half_density::{
    covariant_matrix, half_density_covariant_derivative, plateau_field, radial_cutoff_field,
    sphere_killing_field, tube_cutoff_field, CoeffSpec, HalfDensityField,
};
pub use metric::{MetricField, Regularity, DEGENERACY_RATIO};
pub use singular::{SingularSet, Stratum};
