//! Multilinear kernels: unfolding, Khatri-Rao products, Gram identities and MTTKRP.
//!
//! Mode indices are 0-based. Factor matrices are `n_d × k`.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::dense::{check_budget, DenseTensor, DEFAULT_ELEMENT_BUDGET};
use super::sparse::SparseTensor;
use super::TensorData;

fn check_mode(d: usize, order: usize) -> Result<()> {
    if d >= order {
        return Err(Error::ModeOutOfRange { mode: d, order });
    }
    Ok(())
}

/// Shared column count of a factor list.
pub fn common_rank<T>(factors: &[Array2<T>]) -> Result<usize> {
    let first = factors
        .first()
        .ok_or_else(|| Error::DimensionMismatch("empty factor list".into()))?;
    let k = first.ncols();
    for f in factors {
        if f.ncols() != k {
            return Err(Error::ColumnMismatch {
                expected: k,
                found: f.ncols(),
            });
        }
    }
    Ok(k)
}

pub(crate) fn check_conformable<T>(dims: &[usize], factors: &[Array2<T>]) -> Result<usize> {
    if dims.len() != factors.len() {
        return Err(Error::DimensionMismatch(format!(
            "tensor has {} modes but {} factors were given",
            dims.len(),
            factors.len()
        )));
    }
    for (d, (f, &n)) in factors.iter().zip(dims).enumerate() {
        if f.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "factor {} has {} rows, mode size is {n}",
                d + 1,
                f.nrows()
            )));
        }
    }
    common_rank(factors)
}

/// Row-major strides over the modes other than `d`, last mode fastest.
fn row_strides(dims: &[usize], d: usize) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut s = 1;
    for j in (0..dims.len()).rev() {
        if j != d {
            strides[j] = s;
            s *= dims[j];
        }
    }
    strides
}

/// Mode-`d` unfolding: a `(Π_{j≠d} n_j) × n_d` matrix whose columns are mode-`d` fibers.
///
/// Among the remaining indices the lowest mode varies slowest, matching the
/// row order of [`kr_skip`].
pub fn matricize<T: Scalar>(t: &DenseTensor<T>, d: usize) -> Result<Array2<T>> {
    check_mode(d, t.order())?;
    check_budget(t.dims(), DEFAULT_ELEMENT_BUDGET)?;
    let dims = t.dims();
    let rows = t.len() / dims[d];
    let strides = row_strides(dims, d);
    let mut out = Array2::zeros((rows, dims[d]));
    let mut idx = vec![0usize; dims.len()];
    for &v in t.values() {
        let row: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        out[[row, idx[d]]] = v;
        super::dense::advance_first_fastest(&mut idx, dims);
    }
    Ok(out)
}

/// Inverse of [`matricize`].
pub fn fold<T: Scalar>(m: &Array2<T>, dims: &[usize], d: usize) -> Result<DenseTensor<T>> {
    check_mode(d, dims.len())?;
    let rows: usize = dims
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != d)
        .map(|(_, &n)| n)
        .product();
    if m.dim() != (rows, dims[d]) {
        return Err(Error::DimensionMismatch(format!(
            "unfolding is {:?}, expected ({rows}, {})",
            m.dim(),
            dims[d]
        )));
    }
    let strides = row_strides(dims, d);
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        let row: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        m[[row, idx[d]]]
    })
}

/// Column-wise Kronecker product; the first matrix varies slowest across rows.
pub fn khatri_rao<T: Scalar>(matrices: &[ArrayView2<'_, T>]) -> Result<Array2<T>> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| Error::DimensionMismatch("khatri_rao of an empty list".into()))?;
    let k = first.ncols();
    let mut acc = first.to_owned();
    for m in rest {
        if m.ncols() != k {
            return Err(Error::ColumnMismatch {
                expected: k,
                found: m.ncols(),
            });
        }
        let (ra, rb) = (acc.nrows(), m.nrows());
        let mut next = Array2::zeros((ra * rb, k));
        for i in 0..ra {
            for j in 0..rb {
                let mut row = next.row_mut(i * rb + j);
                for c in 0..k {
                    row[c] = acc[[i, c]] * m[[j, c]];
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Khatri-Rao product of all factors except `d`, in ascending mode order.
pub fn kr_skip<T: Scalar>(factors: &[Array2<T>], d: usize) -> Result<Array2<T>> {
    check_mode(d, factors.len())?;
    let views: Vec<_> = factors
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != d)
        .map(|(_, f)| f.view())
        .collect();
    khatri_rao(&views)
}

/// Hadamard product of the Gram matrices of all factors except `d`.
///
/// Equals `kr_skip(factors, d)ᵀ · kr_skip(factors, d)` without forming the
/// Khatri-Rao product.
pub fn gram_hadamard<T: Scalar>(factors: &[Array2<T>], d: usize) -> Result<Array2<T>> {
    check_mode(d, factors.len())?;
    let k = common_rank(factors)?;
    let mut g = Array2::from_elem((k, k), T::one());
    for (j, f) in factors.iter().enumerate() {
        if j != d {
            g *= &f.t().dot(f);
        }
    }
    Ok(g)
}

/// Execution knobs for the MTTKRP kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelOptions {
    /// Partition the reduction across threads. The partition is fixed, so
    /// results do not depend on the thread count; turning this off gives a
    /// single sequential reduction.
    pub parallel: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { parallel: true }
    }
}

const DENSE_CHUNK_ROWS: usize = 256;
const SPARSE_CHUNK_ENTRIES: usize = 4096;

/// Matricized tensor times Khatri-Rao product: `kr_skip(H, d)ᵀ · matricize(t, d)`,
/// returned as a `k × n_d` matrix.
pub fn mttkrp<T: Scalar>(
    t: &TensorData<T>,
    factors: &[Array2<T>],
    d: usize,
    opts: KernelOptions,
) -> Result<Array2<T>> {
    match t {
        TensorData::Dense(t) => mttkrp_dense(t, factors, d, opts),
        TensorData::Sparse(t) => mttkrp_sparse(t, factors, d, opts),
    }
}

pub fn mttkrp_dense<T: Scalar>(
    t: &DenseTensor<T>,
    factors: &[Array2<T>],
    d: usize,
    opts: KernelOptions,
) -> Result<Array2<T>> {
    check_mode(d, t.order())?;
    let k = check_conformable(t.dims(), factors)?;
    let dims = t.dims();
    let nd = dims[d];
    let rows = t.len() / nd;
    let lin_strides = t.strides();
    let others: Vec<usize> = (0..dims.len()).filter(|&j| j != d).collect();
    let values = t.values();

    // Rows are the multi-indices over the other modes, last mode fastest.
    let chunk = |r0: usize, r1: usize| -> Array2<T> {
        let mut f = Array2::<T>::zeros((k, nd));
        let mut idx = vec![0usize; others.len()];
        let mut rem = r0;
        for (slot, &j) in others.iter().enumerate().rev() {
            idx[slot] = rem % dims[j];
            rem /= dims[j];
        }
        let mut krrow = vec![T::zero(); k];
        for _ in r0..r1 {
            krrow.iter_mut().for_each(|x| *x = T::one());
            let mut base = 0;
            for (slot, &j) in others.iter().enumerate() {
                let h = factors[j].row(idx[slot]);
                for (x, &hv) in krrow.iter_mut().zip(h.iter()) {
                    *x *= hv;
                }
                base += idx[slot] * lin_strides[j];
            }
            for i in 0..nd {
                let y = values[base + i * lin_strides[d]];
                if y != T::zero() {
                    let mut col = f.column_mut(i);
                    for (c, &w) in krrow.iter().enumerate() {
                        col[c] += y * w;
                    }
                }
            }
            for (slot, &j) in others.iter().enumerate().rev() {
                idx[slot] += 1;
                if idx[slot] < dims[j] {
                    break;
                }
                idx[slot] = 0;
            }
        }
        f
    };

    if !opts.parallel || rows <= DENSE_CHUNK_ROWS {
        return Ok(chunk(0, rows));
    }
    let bounds: Vec<(usize, usize)> = (0..rows)
        .step_by(DENSE_CHUNK_ROWS)
        .map(|r0| (r0, (r0 + DENSE_CHUNK_ROWS).min(rows)))
        .collect();
    let partials: Vec<Array2<T>> = bounds.par_iter().map(|&(a, b)| chunk(a, b)).collect();
    Ok(reduce_in_order(partials, k, nd))
}

pub fn mttkrp_sparse<T: Scalar>(
    t: &SparseTensor<T>,
    factors: &[Array2<T>],
    d: usize,
    opts: KernelOptions,
) -> Result<Array2<T>> {
    check_mode(d, t.order())?;
    let k = check_conformable(t.dims(), factors)?;
    sparse_mttkrp_values(t, t.values(), factors, d, k, opts)
}

/// MTTKRP over the support of `pattern` with replacement `values`.
pub(crate) fn sparse_mttkrp_values<T: Scalar>(
    pattern: &SparseTensor<T>,
    values: &[T],
    factors: &[Array2<T>],
    d: usize,
    k: usize,
    opts: KernelOptions,
) -> Result<Array2<T>> {
    let nd = pattern.dims()[d];
    let rows: Vec<_> = factors.iter().map(|f| f.as_standard_layout()).collect();
    let rows: Vec<&[T]> = rows
        .iter()
        .map(|f| f.as_slice().expect("standard layout"))
        .collect();
    let chunk = |e0: usize, e1: usize| -> Array2<T> {
        // Accumulated as n_d × k, transposed at the end.
        let mut f = vec![T::zero(); nd * k];
        let mut krrow = vec![T::zero(); k];
        for e in e0..e1 {
            let y = values[e];
            if y == T::zero() {
                continue;
            }
            let idx = pattern.index(e);
            krrow.iter_mut().for_each(|x| *x = y);
            for (j, h) in rows.iter().enumerate() {
                if j != d {
                    let i = idx[j];
                    for (x, &hv) in krrow.iter_mut().zip(&h[i * k..(i + 1) * k]) {
                        *x *= hv;
                    }
                }
            }
            let i = idx[d];
            for (acc, &w) in f[i * k..(i + 1) * k].iter_mut().zip(&krrow) {
                *acc += w;
            }
        }
        Array2::from_shape_vec((nd, k), f)
            .expect("buffer sized n_d × k")
            .reversed_axes()
            .as_standard_layout()
            .into_owned()
    };
    let nnz = values.len();
    if !opts.parallel || nnz <= SPARSE_CHUNK_ENTRIES {
        return Ok(chunk(0, nnz));
    }
    let bounds: Vec<(usize, usize)> = (0..nnz)
        .step_by(SPARSE_CHUNK_ENTRIES)
        .map(|e0| (e0, (e0 + SPARSE_CHUNK_ENTRIES).min(nnz)))
        .collect();
    let partials: Vec<Array2<T>> = bounds.par_iter().map(|&(a, b)| chunk(a, b)).collect();
    Ok(reduce_in_order(partials, k, nd))
}

fn reduce_in_order<T: Scalar>(partials: Vec<Array2<T>>, k: usize, nd: usize) -> Array2<T> {
    partials
        .into_iter()
        .fold(Array2::zeros((k, nd)), |acc, p| acc + p)
}

/// MTTKRP of a Kruskal-form tensor `[L_1, ..., L_N]` against factors `H`:
/// `(⊛_{j≠d} H_jᵀ L_j) · L_dᵀ`.
pub fn mttkrp_kruskal<T: Scalar>(
    model: &[Array2<T>],
    factors: &[Array2<T>],
    d: usize,
) -> Result<Array2<T>> {
    check_mode(d, factors.len())?;
    if model.len() != factors.len() {
        return Err(Error::DimensionMismatch(
            "Kruskal model and factors differ in order".into(),
        ));
    }
    let k = common_rank(factors)?;
    let kl = common_rank(model)?;
    let mut cross = Array2::from_elem((k, kl), T::one());
    for (j, (h, l)) in factors.iter().zip(model).enumerate() {
        if h.nrows() != l.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "mode {} sizes differ: {} vs {}",
                j + 1,
                h.nrows(),
                l.nrows()
            )));
        }
        if j != d {
            cross *= &h.t().dot(l);
        }
    }
    Ok(cross.dot(&model[d].t()))
}

/// Dense expansion `Σ_r Π_d H_d(i_d, r)` of a factor set.
pub fn full<T: Scalar>(factors: &[Array2<T>]) -> Result<DenseTensor<T>> {
    full_with_budget(factors, DEFAULT_ELEMENT_BUDGET)
}

pub fn full_with_budget<T: Scalar>(factors: &[Array2<T>], budget: usize) -> Result<DenseTensor<T>> {
    common_rank(factors)?;
    let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    super::dense::check_dims(&dims)?;
    check_budget(&dims, budget)?;
    // Rows of (H_N ⊙ … ⊙ H_2) run with H_N slowest, so (that)·H_1ᵀ laid out
    // row-major is exactly the first-fastest linear order.
    let views: Vec<_> = factors[1..].iter().rev().map(|f| f.view()).collect();
    let kr = khatri_rao(&views)?;
    let m = kr.dot(&factors[0].t());
    let values = if m.is_standard_layout() {
        m.into_raw_vec_and_offset().0
    } else {
        m.iter().copied().collect()
    };
    DenseTensor::new(dims, values)
}

/// Model value at one multi-index.
pub fn model_entry<T: Scalar>(factors: &[Array2<T>], idx: &[usize]) -> T {
    let k = factors[0].ncols();
    (0..k)
        .map(|r| {
            factors
                .iter()
                .zip(idx)
                .fold(T::one(), |acc, (f, &i)| acc * f[[i, r]])
        })
        .sum()
}

/// Model values at every listed entry of `pattern`.
pub fn model_at_entries<T: Scalar>(pattern: &SparseTensor<T>, factors: &[Array2<T>]) -> Vec<T> {
    let k = factors[0].ncols();
    let rows: Vec<_> = factors.iter().map(|f| f.as_standard_layout()).collect();
    let rows: Vec<&[T]> = rows
        .iter()
        .map(|f| f.as_slice().expect("standard layout"))
        .collect();
    let mut prod = vec![T::zero(); k];
    (0..pattern.nnz())
        .map(|e| {
            let idx = pattern.index(e);
            prod.iter_mut().for_each(|x| *x = T::one());
            for (h, &i) in rows.iter().zip(idx) {
                for (x, &hv) in prod.iter_mut().zip(&h[i * k..(i + 1) * k]) {
                    *x *= hv;
                }
            }
            prod.iter().copied().sum()
        })
        .collect()
}

/// Squared Frobenius norm of the model, `Σ (⊛_d H_dᵀH_d)`.
pub fn model_norm_sq<T: Scalar>(factors: &[Array2<T>]) -> Result<T> {
    let k = common_rank(factors)?;
    let mut g = Array2::from_elem((k, k), T::one());
    for f in factors {
        g *= &f.t().dot(f);
    }
    Ok(g.sum())
}

/// `‖Y − [H]‖_F / ‖Y‖_F`.
///
/// With `observed_only`, sparse data is compared on its stored entries only
/// and dense data on the entries marked in `mask`.
pub fn relative_error<T: Scalar>(
    t: &TensorData<T>,
    factors: &[Array2<T>],
    mask: Option<&[bool]>,
    observed_only: bool,
) -> Result<T> {
    check_conformable(t.dims(), factors)?;
    let (resid_sq, data_sq) = match t {
        TensorData::Dense(t) => {
            let m = full(factors)?;
            let mut r = T::zero();
            let mut y = T::zero();
            for (lin, (&a, &b)) in t.values().iter().zip(m.values()).enumerate() {
                if observed_only && mask.is_some_and(|mk| !mk[lin]) {
                    continue;
                }
                r += (a - b) * (a - b);
                y += a * a;
            }
            (r, y)
        }
        TensorData::Sparse(t) => {
            let data_sq = t.norm_sq();
            if observed_only {
                let r = t
                    .values()
                    .iter()
                    .zip(model_at_entries(t, factors))
                    .map(|(&y, m)| (y - m) * (y - m))
                    .sum();
                (r, data_sq)
            } else {
                let cross: T = t
                    .values()
                    .iter()
                    .zip(model_at_entries(t, factors))
                    .map(|(&y, m)| y * m)
                    .sum();
                let two = T::one() + T::one();
                let r = (data_sq - two * cross + model_norm_sq(factors)?).max(T::zero());
                (r, data_sq)
            }
        }
    };
    if data_sq <= T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok((resid_sq / data_sq).sqrt())
}
