//! Data-fidelity terms and their elementwise proximity operators.
//!
//! For a loss `l`, the auxiliary-variable update solves, entry by entry,
//! `ỹ = argmin l(y − ỹ) + ½(ỹ − ȳ)²` where `ȳ = WH̃ − V`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    full, model_at_entries, mttkrp_dense, mttkrp_kruskal, sparse_mttkrp_values, Dataset,
    DenseTensor, KernelOptions, TensorData,
};

/// Where the observed-entry set of a missing-value loss comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSource {
    /// Sparse input: entries absent from the file are missing.
    #[default]
    UnlistedEntries,
    /// Dense input: NaN entries are missing.
    NanEntries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossSpec {
    /// `½‖Y − M‖²_F`
    #[default]
    LeastSquares,
    /// `½ Σ_{observed} (y − m)²`
    Missing {
        #[serde(default)]
        mask_source: MaskSource,
    },
    /// `Σ |y − m|`
    L1,
    /// `Σ φ_λ(y − m)`
    Huber { lambda: f64 },
    /// Generalized Kullback-Leibler divergence `Σ y log(y/m) − y + m`.
    Kl,
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Huber { lambda } if !(lambda.is_finite() && *lambda > 0.0) => Err(
                Error::InvalidParameter(format!("huber lambda must be positive, got {lambda}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_least_squares(&self) -> bool {
        matches!(self, Self::LeastSquares)
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Self::Missing { .. })
    }

    /// Checks data compatibility (KL needs nonnegative data).
    pub fn check_data<T: Scalar>(&self, data: &Dataset<T>) -> Result<()> {
        self.validate()?;
        if matches!(self, Self::Kl) {
            if data.tensor.min_value() < T::zero() {
                return Err(Error::Infeasible(
                    "KL loss requires nonnegative data".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Scalar minimizer of `l(y − ỹ) + ½(ỹ − ȳ)²`.
#[inline]
///
/// Unobserved entries (`observed == false`) carry no loss except under least
/// squares, so their minimizer is `ȳ` itself.
pub fn y_prox_scalar<T: Scalar>(loss: &LossSpec, y: T, ybar: T, observed: bool) -> T {
    let half = T::of(0.5);
    if !observed && !loss.is_least_squares() {
        return ybar;
    }
    match loss {
        LossSpec::LeastSquares => half * (y + ybar),
        LossSpec::Missing { .. } => half * (y + ybar),
        LossSpec::L1 => {
            let diff = ybar - y;
            if diff > T::one() {
                ybar - T::one()
            } else if diff < -T::one() {
                ybar + T::one()
            } else {
                y
            }
        }
        LossSpec::Huber { lambda } => {
            let lambda = T::of(*lambda);
            let diff = ybar - y;
            let two_l = lambda + lambda;
            if diff > two_l {
                ybar - lambda
            } else if diff < -two_l {
                ybar + lambda
            } else {
                half * (ybar + y)
            }
        }
        LossSpec::Kl => kl_prox(y, ybar),
    }
}

/// Positive root of `ỹ² − (ȳ − 1)ỹ − y = 0`, evaluated without cancellation.
#[inline]
pub fn kl_prox<T: Scalar>(y: T, ybar: T) -> T {
    let a = ybar - T::one();
    if y <= T::zero() {
        return a.max(T::zero());
    }
    let disc = (a * a + T::of(4.0) * y).sqrt();
    if a >= T::zero() {
        T::of(0.5) * (a + disc)
    } else {
        // (a + disc)/2 = 2y / (disc − a)
        (y + y) / (disc - a)
    }
}

/// Scalar loss `l(y − m)`.
#[inline]
pub fn loss_scalar<T: Scalar>(loss: &LossSpec, y: T, m: T, observed: bool) -> T {
    let half = T::of(0.5);
    let z = y - m;
    if !observed && !loss.is_least_squares() {
        return T::zero();
    }
    match loss {
        LossSpec::LeastSquares => half * z * z,
        LossSpec::Missing { .. } => half * z * z,
        LossSpec::L1 => z.abs(),
        LossSpec::Huber { lambda } => {
            let lambda = T::of(*lambda);
            if z.abs() <= lambda {
                half * z * z
            } else {
                lambda * z.abs() - half * lambda * lambda
            }
        }
        LossSpec::Kl => {
            if y <= T::zero() {
                m
            } else {
                let m = m.max(T::min_positive_value());
                y * (y / m).ln() - y + m
            }
        }
    }
}

/// Elementwise `Ỹ` update over dense arrays; `mask` marks observed entries
/// and is ignored by least squares.
pub fn y_update<T: Scalar>(
    loss: &LossSpec,
    y: &[T],
    ybar: &[T],
    mask: Option<&[bool]>,
) -> Result<Vec<T>> {
    loss.validate()?;
    if y.len() != ybar.len() || mask.is_some_and(|m| m.len() != y.len()) {
        return Err(Error::DimensionMismatch(
            "y_update operand lengths differ".into(),
        ));
    }
    if matches!(loss, LossSpec::Kl) && y.iter().any(|&v| v < T::zero()) {
        return Err(Error::Infeasible(
            "KL loss requires nonnegative data".into(),
        ));
    }
    Ok(y.iter()
        .zip(ybar)
        .enumerate()
        .map(|(i, (&yv, &yb))| y_prox_scalar(loss, yv, yb, mask.is_none_or(|m| m[i])))
        .collect())
}

/// Scaled dual ascent `V ← V + Ỹ − WH̃`.
pub fn v_update<T: Scalar>(v: &mut [T], ytilde: &[T], model: &[T]) -> Result<()> {
    if v.len() != ytilde.len() || v.len() != model.len() {
        return Err(Error::DimensionMismatch(
            "v_update operand lengths differ".into(),
        ));
    }
    for ((vi, &yt), &m) in v.iter_mut().zip(ytilde).zip(model) {
        *vi += yt - m;
    }
    Ok(())
}

/// Auxiliary variable `Ỹ` and its scaled dual `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitState<T> {
    /// Both stored densely in the data's linear order.
    Dense {
        ytilde: DenseTensor<T>,
        v: DenseTensor<T>,
    },
    /// Missing-value loss over sparse data. Off the observed support `V` is
    /// identically zero and `Ỹ` equals the Kruskal model `low_rank` (zero
    /// when `None`); on the support both are stored per entry.
    SparseMissing {
        low_rank: Option<Vec<Array2<T>>>,
        /// `low_rank` evaluated on the support.
        low_rank_at: Vec<T>,
        ytilde: Vec<T>,
        v: Vec<T>,
    },
}

impl<T: Scalar> SplitState<T> {
    /// The usual start `Ỹ ← Y`, `V ← 0`.
    pub fn init(data: &Dataset<T>, loss: &LossSpec) -> Result<Self> {
        match &data.tensor {
            TensorData::Sparse(s) if loss.is_missing() => Ok(Self::SparseMissing {
                low_rank: None,
                low_rank_at: vec![T::zero(); s.nnz()],
                ytilde: s.values().to_vec(),
                v: vec![T::zero(); s.nnz()],
            }),
            TensorData::Sparse(s) => {
                let y = s.to_dense()?;
                let v = DenseTensor::zeros(y.dims().to_vec())?;
                Ok(Self::Dense { ytilde: y, v })
            }
            TensorData::Dense(t) => {
                let v = DenseTensor::zeros(t.dims().to_vec())?;
                Ok(Self::Dense {
                    ytilde: t.clone(),
                    v,
                })
            }
        }
    }

    /// Dense-state start regardless of the data layout.
    pub fn init_dense(data: &Dataset<T>) -> Result<Self> {
        match Self::init(data, &LossSpec::LeastSquares)? {
            s @ Self::Dense { .. } => Ok(s),
            Self::SparseMissing { .. } => unreachable!(),
        }
    }

    /// `Wᵀ(Ỹ + V)` as a `k × n_d` matrix.
    pub fn mttkrp(
        &self,
        data: &Dataset<T>,
        factors: &[Array2<T>],
        d: usize,
        opts: KernelOptions,
    ) -> Result<Array2<T>> {
        match self {
            Self::Dense { ytilde, v } => {
                let sum: Vec<T> = ytilde
                    .values()
                    .iter()
                    .zip(v.values())
                    .map(|(&a, &b)| a + b)
                    .collect();
                let t = DenseTensor::new(ytilde.dims().to_vec(), sum)?;
                mttkrp_dense(&t, factors, d, opts)
            }
            Self::SparseMissing {
                low_rank,
                low_rank_at,
                ytilde,
                v,
            } => {
                let TensorData::Sparse(pattern) = &data.tensor else {
                    return Err(Error::DimensionMismatch(
                        "sparse split state needs sparse data".into(),
                    ));
                };
                let k = factors[0].ncols();
                let correction: Vec<T> = ytilde
                    .iter()
                    .zip(v.iter())
                    .zip(low_rank_at.iter())
                    .map(|((&a, &b), &lr)| a + b - lr)
                    .collect();
                let mut f = sparse_mttkrp_values(pattern, &correction, factors, d, k, opts)?;
                if let Some(m) = low_rank {
                    f += &mttkrp_kruskal(m, factors, d)?;
                }
                Ok(f)
            }
        }
    }

    /// Updates `Ỹ` then `V` given the current model `[H_1, …, H̃ᵀ, …, H_N]`.
    pub fn update(
        &mut self,
        data: &Dataset<T>,
        loss: &LossSpec,
        model: &[Array2<T>],
    ) -> Result<()> {
        match self {
            Self::Dense { ytilde, v } => {
                let m = full(model)?;
                // Sparse data under a non-missing loss: unlisted entries are zeros.
                let densified;
                let y: &[T] = match &data.tensor {
                    TensorData::Dense(t) => t.values(),
                    TensorData::Sparse(s) => {
                        densified = s.to_dense()?;
                        densified.values()
                    }
                };
                let mask = data.mask().filter(|_| !loss.is_least_squares());
                let yt = ytilde.values_mut();
                let vv = v.values_mut();
                for lin in 0..yt.len() {
                    let model = m.values()[lin];
                    let ybar = model - vv[lin];
                    let observed = mask.is_none_or(|mk| mk[lin]);
                    let new = y_prox_scalar(loss, y[lin], ybar, observed);
                    yt[lin] = new;
                    vv[lin] += new - model;
                }
                Ok(())
            }
            Self::SparseMissing {
                low_rank,
                low_rank_at,
                ytilde,
                v,
            } => {
                let TensorData::Sparse(pattern) = &data.tensor else {
                    return Err(Error::DimensionMismatch(
                        "sparse split state needs sparse data".into(),
                    ));
                };
                let half = T::of(0.5);
                *low_rank_at = model_at_entries(pattern, model);
                for (e, &m) in low_rank_at.iter().enumerate() {
                    let ybar = m - v[e];
                    let new = half * (pattern.value(e) + ybar);
                    ytilde[e] = new;
                    v[e] += new - m;
                }
                *low_rank = Some(model.to_vec());
                Ok(())
            }
        }
    }

    /// Materializes `(Ỹ, V)` densely.
    pub fn to_dense(&self, data: &Dataset<T>) -> Result<(DenseTensor<T>, DenseTensor<T>)> {
        match self {
            Self::Dense { ytilde, v } => Ok((ytilde.clone(), v.clone())),
            Self::SparseMissing {
                low_rank,
                ytilde,
                v,
                ..
            } => {
                let TensorData::Sparse(pattern) = &data.tensor else {
                    return Err(Error::DimensionMismatch(
                        "sparse split state needs sparse data".into(),
                    ));
                };
                let mut yt = match low_rank {
                    Some(m) => full(m)?,
                    None => DenseTensor::zeros(pattern.dims().to_vec())?,
                };
                let mut vt = DenseTensor::zeros(pattern.dims().to_vec())?;
                for e in 0..pattern.nnz() {
                    yt.set(pattern.index(e), ytilde[e]);
                    vt.set(pattern.index(e), v[e]);
                }
                Ok((yt, vt))
            }
        }
    }
}

/// Total loss `l(Y − [H])` over the dataset.
pub fn loss_value<T: Scalar>(
    loss: &LossSpec,
    data: &Dataset<T>,
    factors: &[Array2<T>],
) -> Result<T> {
    match &data.tensor {
        TensorData::Dense(t) => {
            let m = full(factors)?;
            let mask = data.mask().filter(|_| !loss.is_least_squares());
            Ok(t.values()
                .iter()
                .zip(m.values())
                .enumerate()
                .map(|(lin, (&y, &mv))| loss_scalar(loss, y, mv, mask.is_none_or(|mk| mk[lin])))
                .sum())
        }
        TensorData::Sparse(s) => match loss {
            LossSpec::Missing { .. } => Ok(s
                .values()
                .iter()
                .zip(model_at_entries(s, factors))
                .map(|(&y, m)| loss_scalar(loss, y, m, true))
                .sum()),
            LossSpec::LeastSquares => {
                let cross: T = s
                    .values()
                    .iter()
                    .zip(model_at_entries(s, factors))
                    .map(|(&y, m)| y * m)
                    .sum();
                let norm = crate::tensor::model_norm_sq(factors)?;
                Ok((T::of(0.5) * (s.norm_sq() - (cross + cross) + norm)).max(T::zero()))
            }
            _ => {
                let dense = Dataset::new(TensorData::Dense(s.to_dense()?));
                loss_value(loss, &dense, factors)
            }
        },
    }
}
