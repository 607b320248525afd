//! Proximity operators for the factor regularizers.
//!
//! `prox_apply(spec, H̄, ρ)` returns `argmin_H r(H) + (ρ/2)‖H − H̄‖²_F`.

use ndarray::{Array2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which slices of a factor are constrained to the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimplexAxis {
    Rows,
    Columns,
}

/// Regularizer `r(H)` attached to one factor matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegularizerSpec {
    #[default]
    None,
    Nonneg,
    Box {
        lo: f64,
        hi: f64,
    },
    /// `λ‖H‖₁`
    L1 {
        lambda: f64,
    },
    Simplex {
        axis: SimplexAxis,
    },
    /// `(λ/2)‖T·H‖²_F` with `T` the second-difference tridiagonal operator
    /// acting on the rows of `H` (each column is smoothed).
    Smooth {
        lambda: f64,
    },
    /// `(λ/2)‖H‖²_F`
    Tikhonov {
        lambda: f64,
    },
    /// Every column inside the unit Euclidean ball.
    UnitNormColumns,
    /// Non-negativity intersected with `inner`; the negatives are zeroed
    /// before `inner` is applied. Exact for inner operators that commute with
    /// that clamp (`l1`, `unit-norm-columns`, `box` with `lo ≥ 0`, ...).
    NonnegComposed {
        inner: Box<RegularizerSpec>,
    },
    /// The listed columns (0-based) are pinned to the all-ones vector; the
    /// remaining columns follow `inner`, which must act column-separably.
    FixedOnes {
        columns: Vec<usize>,
        inner: Box<RegularizerSpec>,
    },
}

impl RegularizerSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} weight must be a finite nonnegative number, got {v}"
                )))
            }
        };
        match self {
            Self::None | Self::Nonneg | Self::Simplex { .. } | Self::UnitNormColumns => Ok(()),
            Self::Box { lo, hi } => {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    Err(Error::InvalidParameter(format!(
                        "box bounds need lo <= hi, got [{lo}, {hi}]"
                    )))
                } else {
                    Ok(())
                }
            }
            Self::L1 { lambda } => nonneg("l1", *lambda),
            Self::Smooth { lambda } => nonneg("smooth", *lambda),
            Self::Tikhonov { lambda } => nonneg("tikhonov", *lambda),
            Self::NonnegComposed { inner } => inner.validate(),
            Self::FixedOnes { columns, inner } => {
                let mut sorted = columns.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != columns.len() {
                    return Err(Error::InvalidParameter(
                        "fixed-ones columns must be distinct".into(),
                    ));
                }
                if matches!(
                    **inner,
                    Self::Simplex {
                        axis: SimplexAxis::Rows
                    }
                ) {
                    return Err(Error::InvalidParameter(
                        "fixed-ones cannot wrap a row-wise simplex constraint".into(),
                    ));
                }
                inner.validate()
            }
        }
    }

    /// Checks that the spec fits a factor with `cols` columns.
    pub fn validate_for(&self, cols: usize) -> Result<()> {
        self.validate()?;
        match self {
            Self::FixedOnes { columns, inner } => {
                if let Some(&c) = columns.iter().find(|&&c| c >= cols) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed-ones column {c} out of range for rank {cols}"
                    )));
                }
                inner.validate_for(cols)
            }
            Self::NonnegComposed { inner } => inner.validate_for(cols),
            _ => Ok(()),
        }
    }

    /// True for pure set indicators (the regularizer value is 0 or +∞).
    pub fn is_indicator(&self) -> bool {
        match self {
            Self::None
            | Self::Nonneg
            | Self::Box { .. }
            | Self::Simplex { .. }
            | Self::UnitNormColumns => true,
            Self::L1 { .. } | Self::Smooth { .. } | Self::Tikhonov { .. } => false,
            Self::NonnegComposed { inner } | Self::FixedOnes { inner, .. } => inner.is_indicator(),
        }
    }
}

/// Evaluates the proximity operator of `spec` at `hbar` with penalty `rho`.
pub fn prox_apply<T: Scalar>(
    spec: &RegularizerSpec,
    hbar: &Array2<T>,
    rho: T,
) -> Result<Array2<T>> {
    let mut h = hbar.clone();
    prox_in_place(spec, &mut h, rho)?;
    Ok(h)
}

/// In-place variant of [`prox_apply`].
pub fn prox_in_place<T: Scalar>(spec: &RegularizerSpec, h: &mut Array2<T>, rho: T) -> Result<()> {
    if !(rho > T::zero()) || !rho.is_finite() {
        return Err(Error::InvalidRho(rho.as_f64()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("proximal input"));
    }
    apply(spec, h, rho);
    Ok(())
}

fn apply<T: Scalar>(spec: &RegularizerSpec, h: &mut Array2<T>, rho: T) {
    match spec {
        RegularizerSpec::None => {}
        RegularizerSpec::Nonneg => h.mapv_inplace(|v| v.max(T::zero())),
        RegularizerSpec::Box { lo, hi } => {
            let (lo, hi) = (T::of(*lo), T::of(*hi));
            h.mapv_inplace(|v| v.max(lo).min(hi));
        }
        RegularizerSpec::L1 { lambda } => {
            let thr = T::of(*lambda) / rho;
            h.mapv_inplace(|v| soft_threshold(v, thr));
        }
        RegularizerSpec::Simplex { axis } => match axis {
            SimplexAxis::Columns => h.columns_mut().into_iter().for_each(project_simplex),
            SimplexAxis::Rows => h.rows_mut().into_iter().for_each(project_simplex),
        },
        RegularizerSpec::Smooth { lambda } => {
            let lambda = T::of(*lambda);
            if lambda > T::zero() {
                let band = SmoothBand::factor(h.nrows(), lambda, rho);
                for col in h.columns_mut() {
                    band.solve_scaled(col, rho);
                }
            }
        }
        RegularizerSpec::Tikhonov { lambda } => {
            let scale = rho / (T::of(*lambda) + rho);
            h.mapv_inplace(|v| v * scale);
        }
        RegularizerSpec::UnitNormColumns => {
            // Rounding slack keeps a normalized column a fixed point.
            let limit = T::one() + T::of(4.0 * h.nrows() as f64) * T::epsilon();
            for mut col in h.columns_mut() {
                let norm = col.iter().map(|&v| v * v).sum::<T>().sqrt();
                if norm > limit {
                    col.mapv_inplace(|v| v / norm);
                }
            }
        }
        RegularizerSpec::NonnegComposed { inner } => {
            h.mapv_inplace(|v| v.max(T::zero()));
            apply(inner, h, rho);
        }
        RegularizerSpec::FixedOnes { columns, inner } => {
            apply(inner, h, rho);
            for &c in columns {
                h.column_mut(c).fill(T::one());
            }
        }
    }
}

/// `sign(v)·max(|v| − thr, 0)`; exactly zero at `|v| = thr`.
#[inline]
pub fn soft_threshold<T: Scalar>(v: T, thr: T) -> T {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        T::zero()
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by sort and threshold.
pub fn project_simplex<T: Scalar>(mut v: ArrayViewMut1<'_, T>) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let sum: T = v.iter().copied().sum();
    let tol = T::of(4.0 * n as f64) * T::epsilon();
    if v.iter().all(|&x| x >= T::zero()) && (sum - T::one()).abs() <= tol {
        return;
    }
    let mut u: Vec<T> = v.iter().copied().collect();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - T::one()) / T::of((j + 1) as f64);
        if uj - t > T::zero() {
            theta = t;
        }
    }
    v.mapv_inplace(|x| (x - theta).max(T::zero()));
}

/// Banded Cholesky factor of `λ·TᵀT + ρ·I` (bandwidth 2).
struct SmoothBand<T> {
    diag: Vec<T>,
    sub1: Vec<T>,
    sub2: Vec<T>,
}

impl<T: Scalar> SmoothBand<T> {
    fn factor(n: usize, lambda: T, rho: T) -> Self {
        // TᵀT has 4 + (#neighbours) on the diagonal, −4 on the first and
        // +1 on the second off-diagonal.
        let a_diag = |i: usize| {
            let neighbours = usize::from(i > 0) + usize::from(i + 1 < n);
            lambda * T::of(4.0 + neighbours as f64) + rho
        };
        let a1 = lambda * T::of(-4.0);
        let a2 = lambda;
        let mut diag = vec![T::zero(); n];
        let mut sub1 = vec![T::zero(); n];
        let mut sub2 = vec![T::zero(); n];
        for i in 0..n {
            let l2 = if i >= 2 { a2 / diag[i - 2] } else { T::zero() };
            let l1 = if i >= 1 {
                let corr = if i >= 2 { l2 * sub1[i - 1] } else { T::zero() };
                (a1 - corr) / diag[i - 1]
            } else {
                T::zero()
            };
            diag[i] = (a_diag(i) - l1 * l1 - l2 * l2).sqrt();
            sub1[i] = l1;
            sub2[i] = l2;
        }
        Self { diag, sub1, sub2 }
    }

    /// Overwrites `b` with `ρ·(λTᵀT + ρI)⁻¹·b`.
    fn solve_scaled(&self, mut b: ArrayViewMut1<'_, T>, rho: T) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = b[i] * rho;
            if i >= 1 {
                s -= self.sub1[i] * b[i - 1];
            }
            if i >= 2 {
                s -= self.sub2[i] * b[i - 2];
            }
            b[i] = s / self.diag[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.sub1[i + 1] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.sub2[i + 2] * b[i + 2];
            }
            b[i] = s / self.diag[i];
        }
    }
}

/// Applies the second-difference operator `T` to each column of `h`.
pub fn second_difference<T: Scalar>(h: &Array2<T>) -> Array2<T> {
    let n = h.nrows();
    let two = T::of(2.0);
    Array2::from_shape_fn(h.dim(), |(i, c)| {
        let mut v = two * h[[i, c]];
        if i > 0 {
            v -= h[[i - 1, c]];
        }
        if i + 1 < n {
            v -= h[[i + 1, c]];
        }
        v
    })
}

/// Finite part of `r(H)`; indicator constraints contribute zero here and
/// are measured by [`violation`] instead.
pub fn value<T: Scalar>(spec: &RegularizerSpec, h: &Array2<T>) -> T {
    let half = T::of(0.5);
    match spec {
        RegularizerSpec::None
        | RegularizerSpec::Nonneg
        | RegularizerSpec::Box { .. }
        | RegularizerSpec::Simplex { .. }
        | RegularizerSpec::UnitNormColumns => T::zero(),
        RegularizerSpec::L1 { lambda } => T::of(*lambda) * h.iter().map(|v| v.abs()).sum::<T>(),
        RegularizerSpec::Smooth { lambda } => {
            half * T::of(*lambda) * second_difference(h).iter().map(|&v| v * v).sum::<T>()
        }
        RegularizerSpec::Tikhonov { lambda } => {
            half * T::of(*lambda) * h.iter().map(|&v| v * v).sum::<T>()
        }
        RegularizerSpec::NonnegComposed { inner } => value(inner, h),
        RegularizerSpec::FixedOnes { columns, inner } => {
            let mut free = h.clone();
            for &c in columns {
                free.column_mut(c).fill(T::zero());
            }
            value(inner, &free)
        }
    }
}

/// Frobenius distance from `h` to the constraint set of `spec` (zero when
/// feasible or when `spec` has no hard constraint).
pub fn violation<T: Scalar>(spec: &RegularizerSpec, h: &Array2<T>) -> T {
    let dist = |p: &Array2<T>| {
        h.iter()
            .zip(p.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    };
    match spec {
        RegularizerSpec::None
        | RegularizerSpec::L1 { .. }
        | RegularizerSpec::Smooth { .. }
        | RegularizerSpec::Tikhonov { .. } => T::zero(),
        RegularizerSpec::Nonneg
        | RegularizerSpec::Box { .. }
        | RegularizerSpec::Simplex { .. }
        | RegularizerSpec::UnitNormColumns => {
            let mut p = h.clone();
            apply(spec, &mut p, T::one());
            dist(&p)
        }
        RegularizerSpec::NonnegComposed { inner } => {
            let clamped = h.mapv(|v| v.max(T::zero()));
            dist(&clamped) + violation(inner, &clamped)
        }
        RegularizerSpec::FixedOnes { columns, inner } => {
            let mut pinned = h.clone();
            for &c in columns {
                pinned.column_mut(c).fill(T::one());
            }
            dist(&pinned) + violation(inner, h)
        }
    }
}
