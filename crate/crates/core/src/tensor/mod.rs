//! Dense and sparse tensor storage plus the multilinear kernels.

mod dense;
mod kernels;
mod sparse;

pub(crate) use dense::check_budget;
pub use dense::{DenseTensor, DEFAULT_ELEMENT_BUDGET};
pub use kernels::{
    common_rank, fold, full, full_with_budget, gram_hadamard, khatri_rao, kr_skip, matricize,
    model_at_entries, model_entry, model_norm_sq, mttkrp, mttkrp_dense, mttkrp_kruskal,
    mttkrp_sparse, relative_error, KernelOptions,
};
pub(crate) use sparse::cmp_canonical;
pub use sparse::SparseTensor;

pub(crate) use kernels::{check_conformable, sparse_mttkrp_values};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Either storage layout of an N-way data array.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData<T> {
    Dense(DenseTensor<T>),
    Sparse(SparseTensor<T>),
}

impl<T: Scalar> TensorData<T> {
    pub fn dims(&self) -> &[usize] {
        match self {
            Self::Dense(t) => t.dims(),
            Self::Sparse(t) => t.dims(),
        }
    }

    pub fn order(&self) -> usize {
        self.dims().len()
    }

    pub fn norm_sq(&self) -> T {
        match self {
            Self::Dense(t) => t.norm_sq(),
            Self::Sparse(t) => t.norm_sq(),
        }
    }

    pub fn to_dense(&self) -> Result<DenseTensor<T>> {
        match self {
            Self::Dense(t) => Ok(t.clone()),
            Self::Sparse(t) => t.to_dense(),
        }
    }

    /// Smallest stored value.
    pub fn min_value(&self) -> T {
        match self {
            Self::Dense(t) => t.values().iter().copied().fold(T::infinity(), T::min),
            Self::Sparse(t) => t.values().iter().copied().fold(T::infinity(), T::min),
        }
    }
}

impl<T> From<DenseTensor<T>> for TensorData<T> {
    fn from(t: DenseTensor<T>) -> Self {
        Self::Dense(t)
    }
}

impl<T> From<SparseTensor<T>> for TensorData<T> {
    fn from(t: SparseTensor<T>) -> Self {
        Self::Sparse(t)
    }
}

/// Data array plus the set of observed entries.
///
/// For sparse data the observed set is the stored support. Dense data carries
/// an optional bitmask in linear (first-fastest) order; `None` means every
/// entry is observed. Unobserved dense values are stored as zero, so losses
/// that ignore the mask see them as zeros, like unlisted sparse entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub tensor: TensorData<T>,
    pub mask: Option<Vec<bool>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(tensor: TensorData<T>) -> Self {
        Self { tensor, mask: None }
    }

    pub fn dense_with_mask(mut tensor: DenseTensor<T>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != tensor.len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries, tensor has {}",
                mask.len(),
                tensor.len()
            )));
        }
        for (v, &m) in tensor.values_mut().iter_mut().zip(&mask) {
            if !m {
                *v = T::zero();
            }
        }
        Ok(Self {
            tensor: TensorData::Dense(tensor),
            mask: Some(mask),
        })
    }

    pub fn dims(&self) -> &[usize] {
        self.tensor.dims()
    }

    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Builds a masked dataset from dense values where NaN marks a missing entry.
    pub fn dense_nan_missing(tensor: DenseTensor<T>) -> Result<Self> {
        let mask = tensor.values().iter().map(|v| !v.is_nan()).collect();
        Self::dense_with_mask(tensor, mask)
    }
}

impl<T: Scalar> From<DenseTensor<T>> for Dataset<T> {
    fn from(t: DenseTensor<T>) -> Self {
        Self::new(TensorData::Dense(t))
    }
}

impl<T: Scalar> From<SparseTensor<T>> for Dataset<T> {
    fn from(t: SparseTensor<T>) -> Self {
        Self::new(TensorData::Sparse(t))
    }
}

impl<T: Scalar> From<TensorData<T>> for Dataset<T> {
    fn from(t: TensorData<T>) -> Self {
        Self::new(t)
    }
}
