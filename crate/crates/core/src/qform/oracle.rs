//! Smooth-region curvature oracle: the symmetrized curvature contraction by
//! finite differences of the symbols, paired directly against test-field
//! coefficients. An independent evaluation path for the quadratic form
//! wherever the connection is C^1 on the supports.

use crate::error::{Error, Result};
use crate::geometry::christoffel::ChristoffelField;
use crate::geometry::half_density::HalfDensityField;
use crate::linalg::Mat;
use crate::quadrature::{integrate, IntegralResult, QuadratureScheme};

/// `R_(kl) = sum_i [ d_i G^i_kl - 1/2 d_k G^i_il - 1/2 d_l G^i_ik ] +
/// sum_ij [ G^i_kl G^j_ji - G^j_ki G^i_lj ]` by central differences of the
/// symbols, optionally Richardson-swept.
pub fn ricci_tensor_fd(
    gamma: &ChristoffelField,
    x: &[f64],
    step: f64,
    richardson: bool,
) -> Result<Mat> {
    let n = gamma.dim();
    let assemble = |h: f64| -> Result<Mat> {
        // dg[(d, i, j, k)] = d_d G^i_jk.
        let mut dg = vec![0.0; n * n * n * n];
        for d in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[d] += h;
            xm[d] -= h;
            let gp = gamma.eval(&xp)?;
            let gm = gamma.eval(&xm)?;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        dg[((d * n + i) * n + j) * n + k] =
                            (gp.get(i, j, k) - gm.get(i, j, k)) / (2.0 * h);
                    }
                }
            }
        }
        let at = |d: usize, i: usize, j: usize, k: usize| dg[((d * n + i) * n + j) * n + k];
        let g0 = gamma.eval(x)?;
        let combo = ChristoffelField::quadratic_combination(&g0);
        Ok(Mat::symmetric_from_fn(n, |k, l| {
            let mut s = 0.0;
            for i in 0..n {
                s += at(i, i, k, l) - 0.5 * at(k, i, i, l) - 0.5 * at(l, i, i, k);
            }
            s + combo.get(k, l)
        }))
    };
    if richardson {
        let a = assemble(step)?;
        let b = assemble(0.5 * step)?;
        Ok(Mat::from_fn(n, |i, j| (4.0 * b.get(i, j) - a.get(i, j)) / 3.0))
    } else {
        assemble(step)
    }
}

/// Pairs the finite-difference curvature tensor against the coefficient
/// fields: `int sum_kl v^k R_(kl) w^l dx`. Requires the supports to stay
/// clear of every singular stratum.
pub fn smooth_ricci_oracle(
    gamma: &ChristoffelField,
    v: &HalfDensityField,
    w: &HalfDensityField,
    scheme: &QuadratureScheme,
    fd_step: f64,
) -> Result<IntegralResult> {
    let domain = match v.support.intersect(&w.support).and_then(|b| b.intersect(&gamma.chart.domain)) {
        Some(b) => b,
        None => return Ok(IntegralResult::exact_zero()),
    };
    if !gamma.singular.restricted_to(&domain).is_empty() {
        return Err(Error::OracleIneligible(
            "a singular stratum meets the test-field supports".into(),
        ));
    }
    for s in &gamma.singular.strata {
        // Finite-difference stencils must not reach across the exclusion
        // radius either.
        let margin = 4.0 * fd_step;
        let closest = domain_distance_to_stratum(&domain, s);
        if closest < s.exclusion() + margin {
            return Err(Error::OracleIneligible(format!(
                "stratum within {closest:.3e} of the supports; stencil needs {margin:.3e} clearance beyond the exclusion radius"
            )));
        }
    }
    let f = |x: &[f64]| -> Result<f64> {
        let r = ricci_tensor_fd(gamma, x, fd_step, true)?;
        Ok(r.pair(&v.coeffs_at(x), &w.coeffs_at(x)))
    };
    integrate(&f, &domain, &crate::geometry::singular::SingularSet::empty(), scheme)
}

fn domain_distance_to_stratum(
    domain: &crate::geometry::chart::BoxDomain,
    s: &crate::geometry::singular::Stratum,
) -> f64 {
    // Sampled lower bound; the built-in strata are convex loci so a coarse
    // grid is reliable.
    domain
        .interior_grid(5)
        .iter()
        .map(|p| s.distance(p))
        .fold(f64::INFINITY, f64::min)
}

/// The curvature tensor sampled on a grid (flows verify their closed-form
/// time derivatives against it, and the measure module samples its
/// absolutely continuous part this way).
pub fn ricci_on_grid(
    gamma: &ChristoffelField,
    points: &[Vec<f64>],
    step: f64,
) -> Result<Vec<(Vec<f64>, Mat)>> {
    points
        .iter()
        .map(|p| Ok((p.clone(), ricci_tensor_fd(gamma, p, step, true)?)))
        .collect()
}
