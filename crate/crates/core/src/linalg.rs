//! Small dense matrices and rank-3 arrays sized by the chart dimension.
//!
//! Chart dimensions are tiny (2 or 3 in every built-in scenario), so the
//! types here are flat `Vec<f64>` buffers with hand-rolled Gauss-Jordan
//! inversion and a Jacobi eigenvalue sweep for the symmetric checks.

/// Dense row-major `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a symmetric matrix from the upper triangle of `f`.
    pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn symmetrize(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| {
            (0..self.n).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat { n: self.n, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j) - other.get(i, j))
    }

    /// Bilinear pairing `a^T M b`.
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += a[i] * self.get(i, j) * b[j];
            }
        }
        s
    }

    pub fn det(&self) -> f64 {
        // LU with partial pivoting; n is tiny so no blocking.
        let n = self.n;
        let mut a = self.a.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for c in 0..n {
                    a.swap(col * n + c, piv * n + c);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / a[col * n + col];
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse with partial pivoting. Returns `None` when a
    /// pivot degenerates relative to the largest entry.
    pub fn inverse(&self) -> Option<Mat> {
        let n = self.n;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a = self.a.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col].abs() < 1e-300 || a[piv * n + col].abs() < 1e-15 * scale {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    a.swap(col * n + c, piv * n + c);
                    inv.a.swap(col * n + c, piv * n + c);
                }
            }
            let d = a[col * n + col];
            for c in 0..n {
                a[col * n + c] /= d;
                inv.a[col * n + c] /= d;
            }
            for r in 0..n {
                if r != col {
                    let factor = a[r * n + col];
                    if factor != 0.0 {
                        for c in 0..n {
                            a[r * n + c] -= factor * a[col * n + c];
                            inv.a[r * n + c] -= factor * inv.a[col * n + c];
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.symmetrize();
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a.get(p, q).abs();
                }
            }
            if off < 1e-15 * (1.0 + a.max_abs()) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }
}

/// Rank-3 array indexed as `t[i][j][k]`, used for Christoffel symbols
/// (upper index first) and metric derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    n: usize,
    a: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 { n, a: vec![0.0; n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    /// Builds a tensor symmetric in the last two indices from `j <= k` values.
    pub fn symmetric_lower_from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let v = f(i, j, k);
                    t.set(i, j, k, v);
                    t.set(i, k, j, v);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.a[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.a[(i * self.n + j) * self.n + k] = v;
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        Tensor3 {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn abs_sum(&self) -> f64 {
        self.a.iter().map(|v| v.abs()).sum()
    }

    pub fn sq_sum(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum()
    }

    /// Largest asymmetry `|t_ijk - t_ikj|` over the lower index pair.
    pub fn lower_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in j + 1..self.n {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    /// Trace over the upper and first lower index: `sum_i t[i][i][k]`.
    pub fn contracted_trace(&self, k: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, i, k)).sum()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat::from_fn(3, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 * (i + j) as f64 });
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let mut m = Mat::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, 2.0);
        m.set(1, 0, 2.0);
        m.set(1, 1, 4.0);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn jacobi_eigenvalues_of_diagonal_plus_rotation() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let m = Mat::symmetric_from_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let eig = m.sym_eigenvalues();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_matches_eigenvalue_product() {
        let m = Mat::symmetric_from_fn(3, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let eig = m.sym_eigenvalues();
        let prod: f64 = eig.iter().product();
        assert!((m.det() - prod).abs() < 1e-10);
    }
}
