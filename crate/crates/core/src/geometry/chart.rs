//! Coordinate charts: axis-aligned box domains and Lipschitz transitions
//! between charts.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist, Mat, Tensor3};

/// Axis-aligned box in chart coordinates, one `[lo, hi]` pair per axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidScheme("box needs matching nonempty lo/hi".into()));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a < b) {
                return Err(Error::InvalidScheme(format!("box side [{a}, {b}] has no volume")));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// Centered cube `[-h, h]^n`.
    pub fn centered_cube(n: usize, h: f64) -> Self {
        BoxDomain::new(vec![-h; n], vec![h; n]).expect("positive half-width")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn diagonal(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= a - tol && *v <= b + tol)
    }

    /// Distance from `x` to the box boundary (positive inside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Intersection with another box, if it has positive volume.
    pub fn intersect(&self, other: &BoxDomain) -> Option<BoxDomain> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        BoxDomain::new(lo, hi).ok()
    }

    /// Uniformly shrinks every side by `frac` of its length on each end.
    pub fn shrunk(&self, frac: f64) -> BoxDomain {
        let lo: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + frac * (b - a))
            .collect();
        let hi: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - frac * (b - a))
            .collect();
        BoxDomain { lo, hi }
    }

    /// Regular interior grid with `per_axis` points along each side.
    pub fn interior_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut points = vec![vec![]];
        for axis in 0..n {
            let mut next = Vec::with_capacity(points.len() * per_axis);
            for p in &points {
                for i in 0..per_axis {
                    let t = (i as f64 + 1.0) / (per_axis as f64 + 1.0);
                    let mut q = p.clone();
                    q.push(self.lo[axis] + t * (self.hi[axis] - self.lo[axis]));
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> Tensor3 + Send + Sync>;

/// Lipschitz-evaluable change of coordinates to another chart.
///
/// `forward` maps this chart's coordinates `x` to target coordinates `y`,
/// `jacobian` is `dy/dx` at `x`, and `inverse_hessian`, when present, gives
/// the second derivatives `d2 x^a / dy^j dy^k` of the inverse map at `y`
/// (otherwise they are obtained by central differences of `inverse`).
#[derive(Clone)]
pub struct Transition {
    pub forward: MapFn,
    pub inverse: MapFn,
    pub jacobian: JacobianFn,
    pub inverse_hessian: Option<HessianFn>,
    pub roundtrip_tol: f64,
}

impl Transition {
    pub fn new(forward: MapFn, inverse: MapFn, jacobian: JacobianFn) -> Self {
        Transition {
            forward,
            inverse,
            jacobian,
            inverse_hessian: None,
            roundtrip_tol: 1e-9,
        }
    }

    pub fn with_inverse_hessian(mut self, h: HessianFn) -> Self {
        self.inverse_hessian = Some(h);
        self
    }

    pub fn with_roundtrip_tol(mut self, tol: f64) -> Self {
        self.roundtrip_tol = tol;
        self
    }

    /// Jacobian of the inverse map at `y`, computed as the matrix inverse of
    /// the forward Jacobian at `x = inverse(y)`.
    pub fn inverse_jacobian_at(&self, y: &[f64]) -> Result<(Vec<f64>, Mat, Mat)> {
        let x = (self.inverse)(y);
        let j = (self.jacobian)(&x);
        let jinv = j
            .inverse()
            .ok_or_else(|| Error::ChartDegeneracy { point: y.to_vec() })?;
        Ok((x, j, jinv))
    }

    /// `d2 x^a / dy^j dy^k` at `y`, from the closure or by central
    /// differences of the inverse map.
    pub fn inverse_hessian_at(&self, y: &[f64], step: f64) -> Tensor3 {
        if let Some(h) = &self.inverse_hessian {
            return h(y);
        }
        let n = y.len();
        let f = &self.inverse;
        Tensor3::symmetric_lower_from_fn(n, |a, j, k| {
            if j == k {
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[j] += step;
                ym[j] -= step;
                (f(&yp)[a] - 2.0 * f(y)[a] + f(&ym)[a]) / (step * step)
            } else {
                let mut ypp = y.to_vec();
                let mut ypm = y.to_vec();
                let mut ymp = y.to_vec();
                let mut ymm = y.to_vec();
                ypp[j] += step;
                ypp[k] += step;
                ypm[j] += step;
                ypm[k] -= step;
                ymp[j] -= step;
                ymp[k] += step;
                ymm[j] -= step;
                ymm[k] -= step;
                (f(&ypp)[a] - f(&ypm)[a] - f(&ymp)[a] + f(&ymm)[a]) / (4.0 * step * step)
            }
        })
    }
}

/// Chart-local view of the manifold: a dimension, a box domain and an
/// optional transition to another chart.
#[derive(Clone)]
pub struct Chart {
    pub dim: usize,
    pub domain: BoxDomain,
    pub transition: Option<Transition>,
}

impl Chart {
    pub fn new(domain: BoxDomain) -> Self {
        Chart { dim: domain.dim(), domain, transition: None }
    }

    pub fn with_transition(mut self, t: Transition) -> Self {
        self.transition = Some(t);
        self
    }

    pub fn compatible_with(&self, other: &Chart) -> bool {
        self.dim == other.dim && self.domain == other.domain
    }

    /// Checks the forward-then-inverse round trip on an interior sample grid
    /// against the transition's declared tolerance.
    pub fn validate_roundtrip(&self, per_axis: usize) -> Result<()> {
        let t = self
            .transition
            .as_ref()
            .ok_or_else(|| Error::MissingClosure("chart has no transition".into()))?;
        for p in self.domain.interior_grid(per_axis) {
            let back = (t.inverse)(&(t.forward)(&p));
            let err = dist(&back, &p);
            if err > t.roundtrip_tol {
                return Err(Error::ChartDegeneracy { point: p });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_rejects_empty_sides() {
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn volume_and_diagonal() {
        let b = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert!((b.volume() - 4.0).abs() < 1e-15);
        assert!((b.diagonal() - (4.0f64 + 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn roundtrip_validation_catches_mismatched_inverse() {
        let fwd: MapFn = Arc::new(|x: &[f64]| vec![x[0] + 1.0, x[1]]);
        let bad_inv: MapFn = Arc::new(|y: &[f64]| vec![y[0], y[1]]);
        let jac: JacobianFn = Arc::new(|_: &[f64]| Mat::identity(2));
        let chart = Chart::new(BoxDomain::centered_cube(2, 1.0))
            .with_transition(Transition::new(fwd, bad_inv, jac));
        assert!(chart.validate_roundtrip(3).is_err());
    }

    #[test]
    fn fd_inverse_hessian_of_quadratic_map() {
        // forward y = (x0 + x1^2, x1): inverse x = (y0 - y1^2, y1), so
        // d2 x0 / dy1 dy1 = -2.
        let fwd: MapFn = Arc::new(|x: &[f64]| vec![x[0] + x[1] * x[1], x[1]]);
        let inv: MapFn = Arc::new(|y: &[f64]| vec![y[0] - y[1] * y[1], y[1]]);
        let jac: JacobianFn = Arc::new(|x: &[f64]| {
            let mut j = Mat::identity(2);
            j.set(0, 1, 2.0 * x[1]);
            j
        });
        let t = Transition::new(fwd, inv, jac);
        let h = t.inverse_hessian_at(&[0.3, -0.4], 1e-4);
        assert!((h.get(0, 1, 1) + 2.0).abs() < 1e-6);
        assert!(h.get(1, 0, 0).abs() < 1e-6);
    }
}
