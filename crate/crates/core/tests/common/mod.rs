//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// All multi-indices of `dims` with the first index varying fastest.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut lin in 0..total {
        let mut idx = Vec::with_capacity(dims.len());
        for &n in dims {
            idx.push(lin % n);
            lin /= n;
        }
        out.push(idx);
    }
    out
}

/// Row of entry `idx` in the mode-`d` unfolding: the remaining modes in
/// ascending order with the last one varying fastest.
pub fn unfolding_row(dims: &[usize], idx: &[usize], d: usize) -> usize {
    let mut row = 0;
    for (j, (&i, &n)) in idx.iter().zip(dims).enumerate() {
        if j != d {
            row = row * n + i;
        }
    }
    row
}

/// Unfolding by direct placement of every entry.
pub fn unfold(dims: &[usize], values: &[f64], d: usize) -> Array2<f64> {
    let rows: usize = dims
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != d)
        .map(|(_, &n)| n)
        .product();
    let mut m = Array2::zeros((rows, dims[d]));
    for (lin, idx) in all_indices(dims).into_iter().enumerate() {
        m[[unfolding_row(dims, &idx, d), idx[d]]] = values[lin];
    }
    m
}

/// Column-wise Kronecker product, first matrix varying slowest.
pub fn kron_columns(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let k = a.ncols();
    let mut out = Array2::zeros((a.nrows() * b.nrows(), k));
    for c in 0..k {
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                out[[i * b.nrows() + j, c]] = a[[i, c]] * b[[j, c]];
            }
        }
    }
    out
}

/// Khatri-Rao product of every factor except `d`, in ascending mode order.
pub fn explicit_kr_skip(factors: &[Array2<f64>], d: usize) -> Array2<f64> {
    let mut acc: Option<Array2<f64>> = None;
    for (j, h) in factors.iter().enumerate() {
        if j == d {
            continue;
        }
        acc = Some(match acc {
            None => h.clone(),
            Some(a) => kron_columns(&a, h),
        });
    }
    acc.expect("at least two modes")
}

/// Model tensor values by summing rank-one terms entry by entry.
pub fn explicit_full(factors: &[Array2<f64>]) -> Vec<f64> {
    let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let k = factors[0].ncols();
    all_indices(&dims)
        .iter()
        .map(|idx| {
            (0..k)
                .map(|c| {
                    idx.iter()
                        .zip(factors)
                        .map(|(&i, f)| f[[i, c]])
                        .product::<f64>()
                })
                .sum()
        })
        .collect()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rel_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    max_abs_diff(a, b) / scale
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Euclidean projection onto the probability simplex by bisection on the
/// threshold `τ` solving `Σ max(v_i − τ, 0) = 1`.
pub fn simplex_by_bisection(v: &[f64]) -> Vec<f64> {
    let mass = |t: f64| v.iter().map(|&x| (x - t).max(0.0)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - t).max(0.0)).collect()
}
