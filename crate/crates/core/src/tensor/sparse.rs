use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::dense::{check_budget, check_dims, DenseTensor, DEFAULT_ELEMENT_BUDGET};

/// Coordinate-format N-way array.
///
/// Entries are kept in canonical order (sorted by first-fastest linear
/// index) without duplicates. Indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor<T> {
    dims: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

/// Canonical order: the last mode is the most significant key.
pub(crate) fn cmp_canonical(a: &[usize], b: &[usize]) -> Ordering {
    a.iter().rev().cmp(b.iter().rev())
}

impl<T: Scalar> SparseTensor<T> {
    /// Builds a tensor from `(index, value)` pairs in any order.
    ///
    /// Duplicate indices are rejected rather than summed.
    pub fn new(dims: Vec<usize>, entries: Vec<(Vec<usize>, T)>) -> Result<Self> {
        check_dims(&dims)?;
        let order = dims.len();
        for (idx, v) in &entries {
            check_index(&dims, idx)?;
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse tensor value"));
            }
        }
        let mut perm: Vec<usize> = (0..entries.len()).collect();
        perm.sort_by(|&a, &b| cmp_canonical(&entries[a].0, &entries[b].0));
        for w in perm.windows(2) {
            if entries[w[0]].0 == entries[w[1]].0 {
                return Err(Error::InvalidTensor(format!(
                    "duplicate index {:?}",
                    entries[w[0]].0
                )));
            }
        }
        let mut indices = Vec::with_capacity(entries.len() * order);
        let mut values = Vec::with_capacity(entries.len());
        for &p in &perm {
            indices.extend_from_slice(&entries[p].0);
            values.push(entries[p].1);
        }
        Ok(Self {
            dims,
            indices,
            values,
        })
    }

    /// Collects the nonzero entries of a dense tensor.
    pub fn from_dense(t: &DenseTensor<T>) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (lin, &v) in t.values().iter().enumerate() {
            if v != T::zero() {
                indices.extend(t.multi_index(lin));
                values.push(v);
            }
        }
        Self {
            dims: t.dims().to_vec(),
            indices,
            values,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn index(&self, e: usize) -> &[usize] {
        let n = self.dims.len();
        &self.indices[e * n..(e + 1) * n]
    }

    pub fn value(&self, e: usize) -> T {
        self.values[e]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], T)> + '_ {
        self.indices
            .chunks_exact(self.dims.len())
            .zip(self.values.iter().copied())
    }

    /// A copy sharing this tensor's support with different values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            indices: self.indices.clone(),
            values,
        })
    }

    /// Restricts the support to the entries selected by `keep`.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> Self {
        let n = self.dims.len();
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for e in 0..self.nnz() {
            if keep(e) {
                indices.extend_from_slice(&self.indices[e * n..(e + 1) * n]);
                values.push(self.values[e]);
            }
        }
        Self {
            dims: self.dims.clone(),
            indices,
            values,
        }
    }

    /// Position of `idx` in the entry list, if stored.
    pub fn find(&self, idx: &[usize]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.nnz());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match cmp_canonical(self.index(mid), idx) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn to_dense(&self) -> Result<DenseTensor<T>> {
        self.to_dense_with_budget(DEFAULT_ELEMENT_BUDGET)
    }

    pub fn to_dense_with_budget(&self, budget: usize) -> Result<DenseTensor<T>> {
        let len = check_budget(&self.dims, budget)?;
        let mut values = vec![T::zero(); len];
        let mut t = DenseTensor::new(self.dims.clone(), std::mem::take(&mut values))?;
        for (idx, v) in self.iter() {
            t.set(idx, v);
        }
        Ok(t)
    }
}

fn check_index(dims: &[usize], idx: &[usize]) -> Result<()> {
    if idx.len() != dims.len() {
        return Err(Error::InvalidTensor(format!(
            "index {idx:?} has {} components, tensor order is {}",
            idx.len(),
            dims.len()
        )));
    }
    if idx.iter().zip(dims).any(|(&i, &n)| i >= n) {
        return Err(Error::InvalidTensor(format!(
            "index {idx:?} outside dims {dims:?}"
        )));
    }
    Ok(())
}
