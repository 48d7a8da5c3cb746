//! Gauss-Legendre nodes and weights on `[-1, 1]`, cached per order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Cached nodes and weights of one rule.
pub type Rule = Arc<(Vec<f64>, Vec<f64>)>;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[-1, 1]`.
/// Exact for polynomials of degree `2 * order - 1`.
pub fn gauss_legendre(order: usize) -> Rule {
    assert!(order >= 1, "rule needs at least one node");
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(order)
        .or_insert_with(|| Arc::new(compute_nodes(order)))
        .clone()
}

fn compute_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_deriv(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate_1d(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        s += w * f(mid + half * x);
    }
    s * half
}

/// Adaptive 1-d Gauss-Legendre: bisects until the order-`p` versus
/// two-half-panels comparison meets `tol`.
pub fn adaptive_1d(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    order: usize,
    tol: f64,
    max_depth: usize,
) -> (f64, f64) {
    fn recurse(
        f: &mut dyn FnMut(f64) -> f64,
        a: f64,
        b: f64,
        order: usize,
        tol: f64,
        depth: usize,
        coarse: f64,
    ) -> (f64, f64) {
        let mid = 0.5 * (a + b);
        let left = integrate_1d(f, a, mid, order);
        let right = integrate_1d(f, mid, b, order);
        let fine = left + right;
        let err = (fine - coarse).abs();
        if err <= tol || depth == 0 {
            return (fine, err);
        }
        let (lv, le) = recurse(f, a, mid, order, 0.5 * tol, depth - 1, left);
        let (rv, re) = recurse(f, mid, b, order, 0.5 * tol, depth - 1, right);
        (lv + rv, le + re)
    }
    let coarse = integrate_1d(f, a, b, order);
    recurse(f, a, b, order, tol, max_depth, coarse)
}
