//! Independent reference computations shared by the integration tests. Nothing
//! here calls the solver's own update formulas.

#![allow(dead_code)]

use awls_rpca::{DenseMatrix, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi)).unwrap()
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
/// `below(a, b)` must report whether the function is smaller at `a` than at `b`.
pub fn golden_section(below: impl Fn(f64, f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    while hi - lo > tol {
        if below(c, d) {
            hi = d;
            d = c;
            c = hi - inv_phi * (hi - lo);
        } else {
            lo = c;
            c = d;
            d = lo + inv_phi * (hi - lo);
        }
    }
    (lo + hi) / 2.0
}

/// Entrywise minimizer of `(r - s)² + λ w² s²` by golden-section search.
///
/// Candidates are compared through the factored cost difference
/// `f(a) - f(b) = (a - b) ((a + b)(1 + λ w²) - 2 r)`, which stays accurate
/// where the raw costs agree to machine precision.
pub fn l2_sparse_oracle(residual: &DenseMatrix, w: &DenseMatrix, lambda: f64) -> DenseMatrix {
    DenseMatrix::from_fn(residual.rows(), residual.cols(), |i, j| {
        let (r, wv) = (residual.get(i, j), w.get(i, j));
        let k = lambda * wv * wv;
        let below = |a: f64, b: f64| (a - b) * ((a + b) * (1.0 + k) - 2.0 * r) < 0.0;
        let bound = r.abs() + 1.0;
        golden_section(below, -bound, bound, 1e-13)
    })
    .unwrap()
}

/// Entrywise minimizer of `(r - s)² + λ w² [s ≠ 0]` by comparing the only two
/// candidates, `s = 0` and `s = r`. Ties keep zero.
pub fn l0_sparse_oracle(residual: &DenseMatrix, w: &DenseMatrix, lambda: f64) -> DenseMatrix {
    DenseMatrix::from_fn(residual.rows(), residual.cols(), |i, j| {
        let (r, wv) = (residual.get(i, j), w.get(i, j));
        let cost_zero = r * r;
        let cost_keep = lambda * wv * wv;
        if cost_keep < cost_zero {
            r
        } else {
            0.0
        }
    })
    .unwrap()
}

/// Naive triple-loop product, independent of the library kernels.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum())
        .unwrap()
}

/// Fidelity term `||Y - U V - S||_F²` evaluated elementwise from scratch.
pub fn fidelity(y: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, s: &DenseMatrix) -> f64 {
    let uv = naive_matmul(u, v);
    let mut acc = 0.0;
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            acc += (y.get(i, j) - uv.get(i, j) - s.get(i, j)).powi(2);
        }
    }
    acc
}

/// Central finite-difference gradient of `f` with respect to every entry of `x`.
pub fn fd_gradient(x: &DenseMatrix, h: f64, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
    let mut data = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let bump = |delta: f64| {
            let mut v = x.as_slice().to_vec();
            v[k] += delta;
            f(&DenseMatrix::from_vec(x.rows(), x.cols(), v).unwrap())
        };
        data.push((bump(h) - bump(-h)) / (2.0 * h));
    }
    DenseMatrix::from_vec(x.rows(), x.cols(), data).unwrap()
}

/// Residual of the U-step optimality condition
/// `(U⁺ V - (Y - S)) Vᵀ + t (U⁺ - U) = 0`.
pub fn u_optimality_residual(
    y: &DenseMatrix,
    s: &DenseMatrix,
    u_prev: &DenseMatrix,
    v: &DenseMatrix,
    u_next: &DenseMatrix,
    t: f64,
) -> Result<f64> {
    let fit = naive_matmul(u_next, v).sub(&y.sub(s)?)?;
    let grad = naive_matmul(&fit, &v.transpose());
    Ok(grad.add(&u_next.sub(u_prev)?.scale(t)?)?.frob_norm())
}

/// Residual of the V-step optimality condition
/// `Uᵀ (U V⁺ - (Y - S)) + t (V⁺ - V) = 0`.
pub fn v_optimality_residual(
    y: &DenseMatrix,
    s: &DenseMatrix,
    u: &DenseMatrix,
    v_prev: &DenseMatrix,
    v_next: &DenseMatrix,
    t: f64,
) -> Result<f64> {
    let fit = naive_matmul(u, v_next).sub(&y.sub(s)?)?;
    let grad = naive_matmul(&u.transpose(), &fit);
    Ok(grad.add(&v_next.sub(v_prev)?.scale(t)?)?.frob_norm())
}
