//! Bookkeeping for where a metric fails to be C^1: isolated points, curves
//! (arc-length polylines) and axis-aligned hyperplane pieces, each with an
//! exclusion-radius hint below which finite differencing is unreliable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::chart::BoxDomain;
use crate::linalg::{dist, norm, sub};

/// One singular stratum. Exclusion radii are strictly positive hints; they
/// bound the region where only analytic closures may be evaluated.
#[derive(Clone, Debug, Serialize)]
pub enum Stratum {
    Point {
        at: Vec<f64>,
        exclusion: f64,
    },
    /// Arc-length-parametrized polyline; per-vertex tangents come from the
    /// segment directions. Transverse tube coordinates are exact for the
    /// straight segments used by the built-in scenarios.
    Curve {
        vertices: Vec<Vec<f64>>,
        exclusion: f64,
    },
    /// Axis-aligned affine piece `{ x[axis] = value }` spanning the chart box.
    HyperplanePiece {
        axis: usize,
        value: f64,
        exclusion: f64,
    },
}

impl Stratum {
    pub fn exclusion(&self) -> f64 {
        match self {
            Stratum::Point { exclusion, .. }
            | Stratum::Curve { exclusion, .. }
            | Stratum::HyperplanePiece { exclusion, .. } => *exclusion,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Stratum::Point { .. } => "point",
            Stratum::Curve { .. } => "curve",
            Stratum::HyperplanePiece { .. } => "hyperplane-piece",
        }
    }

    /// Euclidean coordinate distance from `x` to the stratum.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Stratum::Point { at, .. } => dist(x, at),
            Stratum::Curve { vertices, .. } => {
                let mut best = f64::INFINITY;
                for seg in vertices.windows(2) {
                    best = best.min(segment_distance(x, &seg[0], &seg[1]));
                }
                best
            }
            Stratum::HyperplanePiece { axis, value, .. } => (x[*axis] - value).abs(),
        }
    }

    /// Total polyline length (curve strata only).
    pub fn curve_length(&self) -> Option<f64> {
        match self {
            Stratum::Curve { vertices, .. } => Some(
                vertices
                    .windows(2)
                    .map(|seg| dist(&seg[0], &seg[1]))
                    .sum(),
            ),
            _ => None,
        }
    }

    /// Point and unit tangent at arc length `s` along a curve stratum.
    pub fn curve_point_tangent(&self, s: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Stratum::Curve { vertices, .. } => {
                let mut remaining = s.max(0.0);
                let last = vertices.len().checked_sub(2)?;
                for (i, seg) in vertices.windows(2).enumerate() {
                    let d = sub(&seg[1], &seg[0]);
                    let len = norm(&d);
                    if remaining <= len || i == last {
                        let t = (remaining / len).min(1.0);
                        let p: Vec<f64> =
                            seg[0].iter().zip(&d).map(|(a, v)| a + t * v).collect();
                        let tangent: Vec<f64> = d.iter().map(|v| v / len).collect();
                        return Some((p, tangent));
                    }
                    remaining -= len;
                }
                None
            }
            _ => None,
        }
    }

    fn is_inside(&self, domain: &BoxDomain, tol: f64) -> bool {
        match self {
            Stratum::Point { at, .. } => domain.contains(at, tol),
            Stratum::Curve { vertices, .. } => vertices.iter().all(|v| domain.contains(v, tol)),
            Stratum::HyperplanePiece { axis, value, .. } => {
                *axis < domain.dim()
                    && *value >= domain.lo[*axis] - tol
                    && *value <= domain.hi[*axis] + tol
            }
        }
    }
}

fn segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ax = sub(x, a);
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return dist(x, a);
    }
    let t = (ax.iter().zip(&ab).map(|(p, q)| p * q).sum::<f64>() / len2).clamp(0.0, 1.0);
    let proj: Vec<f64> = a.iter().zip(&ab).map(|(p, q)| p + t * q).collect();
    dist(x, &proj)
}

/// The singular locus of a field: a list of declared strata.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SingularSet {
    pub strata: Vec<Stratum>,
}

impl SingularSet {
    pub fn empty() -> Self {
        SingularSet { strata: vec![] }
    }

    pub fn point(at: Vec<f64>, exclusion: f64) -> Self {
        SingularSet { strata: vec![Stratum::Point { at, exclusion }] }
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    /// Minimum distance from `x` to any stratum (infinite when empty).
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.strata
            .iter()
            .map(|s| s.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `x` is within the exclusion radius of some stratum.
    pub fn excludes(&self, x: &[f64]) -> bool {
        self.strata.iter().any(|s| s.distance(x) < s.exclusion())
    }

    pub fn validate(&self, domain: &BoxDomain) -> Result<()> {
        for (i, s) in self.strata.iter().enumerate() {
            if s.exclusion() <= 0.0 {
                return Err(Error::InvalidScheme(format!(
                    "stratum {i} has non-positive exclusion radius"
                )));
            }
            if !s.is_inside(domain, 1e-12) {
                return Err(Error::InvalidScheme(format!(
                    "stratum {i} ({}) lies outside the chart domain",
                    s.kind()
                )));
            }
        }
        Ok(())
    }

    /// Strata whose locus touches the given box. Shell windows must fit
    /// inside the box, so only strata actually meeting it count.
    pub fn restricted_to(&self, b: &BoxDomain) -> SingularSet {
        let strata = self
            .strata
            .iter()
            .filter(|s| match s {
                Stratum::Point { at, .. } => b.contains(at, 0.0),
                Stratum::Curve { vertices, .. } => vertices
                    .windows(2)
                    .any(|seg| segment_touches_box(&seg[0], &seg[1], b, 0.0)),
                Stratum::HyperplanePiece { axis, value, .. } => {
                    *value >= b.lo[*axis] && *value <= b.hi[*axis]
                }
            })
            .cloned()
            .collect();
        SingularSet { strata }
    }
}

fn segment_touches_box(a: &[f64], b: &[f64], domain: &BoxDomain, margin: f64) -> bool {
    // Sampling test; exact enough for declaring which strata a sub-box sees.
    let steps = 32;
    (0..=steps).any(|i| {
        let t = i as f64 / steps as f64;
        let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        domain.contains(&p, margin)
    })
}
