//! Killing defect of a half-density field: the sup over a sample grid of
//! the symmetrized, metric-lowered covariant derivative
//! `sum_k ( g_jk D_i V^k + g_ik D_j V^k )`.

use crate::error::Result;
use crate::geometry::christoffel::ChristoffelField;
use crate::geometry::half_density::{covariant_matrix, HalfDensityField};
use crate::geometry::metric::MetricField;
use crate::linalg::Mat;

/// Maximum Frobenius norm of the Killing expression over the grid points;
/// grid points inside stratum exclusion radii are skipped.
pub fn killing_defect(
    g: &MetricField,
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    grid: &[Vec<f64>],
) -> Result<f64> {
    let n = g.dim();
    let mut worst = 0.0f64;
    for p in grid {
        if g.singular.excludes(p) {
            continue;
        }
        let gm = g.eval(p);
        let ga = gamma.eval(p)?;
        let d = covariant_matrix(&ga, &v.coeffs_at(p), &v.d_coeffs_at(p));
        let k = Mat::from_fn(n, |i, j| {
            let mut s = 0.0;
            for kk in 0..n {
                s += gm.get(j, kk) * d.get(i, kk) + gm.get(i, kk) * d.get(j, kk);
            }
            s
        });
        worst = worst.max(k.frobenius_norm());
    }
    Ok(worst)
}
