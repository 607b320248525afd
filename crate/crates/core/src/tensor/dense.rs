use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default cap on the number of elements a dense materialization may allocate.
pub const DEFAULT_ELEMENT_BUDGET: usize = 100_000_000;

/// Dense N-way array stored with the first index varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    values: Vec<T>,
}

pub(crate) fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidTensor(format!(
            "tensor order must be at least 2, got {}",
            dims.len()
        )));
    }
    if let Some(pos) = dims.iter().position(|&n| n == 0) {
        return Err(Error::InvalidTensor(format!(
            "dimension {} is zero",
            pos + 1
        )));
    }
    Ok(())
}

/// Number of elements, or `None` on overflow.
pub(crate) fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
}

pub(crate) fn check_budget(dims: &[usize], budget: usize) -> Result<usize> {
    let requested: u128 = dims.iter().map(|&n| n as u128).product();
    if requested > budget as u128 {
        return Err(Error::ElementBudget { requested, budget });
    }
    Ok(requested as usize)
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(dims: Vec<usize>, values: Vec<T>) -> Result<Self> {
        check_dims(&dims)?;
        let len = element_count(&dims)
            .ok_or_else(|| Error::InvalidTensor("element count overflows usize".into()))?;
        if values.len() != len {
            return Err(Error::InvalidTensor(format!(
                "expected {len} values for dims {dims:?}, got {}",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims)?;
        let len = check_budget(&dims, DEFAULT_ELEMENT_BUDGET)?;
        Ok(Self {
            dims,
            values: vec![T::zero(); len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index (0-based).
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; t.dims.len()];
        for v in t.values.iter_mut() {
            *v = f(&idx);
            advance_first_fastest(&mut idx, &t.dims);
        }
        Ok(t)
    }

    /// A matrix viewed as a 2-way tensor: rows are mode 1, columns mode 2.
    pub fn from_matrix(m: &Array2<T>) -> Result<Self> {
        let (rows, cols) = m.dim();
        let mut values = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            values.extend(m.column(j).iter().copied());
        }
        Self::new(vec![rows, cols], values)
    }

    /// Inverse of [`DenseTensor::from_matrix`]; only valid for 2-way tensors.
    pub fn to_matrix(&self) -> Result<Array2<T>> {
        if self.order() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "to_matrix needs a 2-way tensor, got order {}",
                self.order()
            )));
        }
        let (rows, cols) = (self.dims[0], self.dims[1]);
        Ok(Array2::from_shape_fn((rows, cols), |(i, j)| {
            self.values[i + rows * j]
        }))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Strides of the first-fastest linear order.
    pub fn strides(&self) -> Vec<usize> {
        strides_first_fastest(&self.dims)
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(&self.dims) {
            debug_assert!(i < n);
            lin += i * stride;
            stride *= n;
        }
        lin
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&n| {
                let i = lin % n;
                lin /= n;
                i
            })
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.values[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let lin = self.linear_index(idx);
        self.values[lin] = v;
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }
}

pub(crate) fn strides_first_fastest(dims: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(dims.len());
    let mut s = 1;
    for &n in dims {
        strides.push(s);
        s *= n;
    }
    strides
}

/// Odometer step with the first index varying fastest.
pub(crate) fn advance_first_fastest(idx: &mut [usize], dims: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseTensor::<f64>::new(vec![3], vec![0.0; 3]).is_err());
        assert!(DenseTensor::<f64>::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::<f64>::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn linear_order_is_first_fastest() {
        let t = DenseTensor::from_fn(vec![2, 3, 4], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64)
            .unwrap();
        assert_eq!(t.values()[1], 1.0);
        assert_eq!(t.values()[2], 10.0);
        assert_eq!(t.values()[6], 100.0);
        for lin in 0..t.len() {
            assert_eq!(t.linear_index(&t.multi_index(lin)), lin);
        }
    }

    #[test]
    fn matrix_round_trip() {
        let m = ndarray::array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let t = DenseTensor::from_matrix(&m).unwrap();
        assert_eq!(t.get(&[1, 2]), 6.0);
        assert_eq!(t.to_matrix().unwrap(), m);
    }

    #[test]
    fn budget_guard() {
        assert!(matches!(
            DenseTensor::<f64>::zeros(vec![100_000, 100_000]),
            Err(Error::ElementBudget { .. })
        ));
    }
}
