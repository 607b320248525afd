use ndarray::Array2;

use crate::error::{Error, Result};

/// Mean absolute cosine between matched columns of `est` and `truth`.
///
/// Columns are normalized, so scale and sign do not matter. Matching is
/// greedy: the largest remaining |cosine| is paired first and both columns
/// leave the pool.
pub fn congruence(est: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            est.dim(),
            truth.dim()
        )));
    }
    let k = est.ncols();
    let a = normalized(est)?;
    let b = normalized(truth)?;
    let cos = a.t().dot(&b).mapv(f64::abs);
    let mut row_used = vec![false; k];
    let mut col_used = vec![false; k];
    let mut total = 0.0;
    for _ in 0..k {
        let mut best = (0, 0, -1.0);
        for i in (0..k).filter(|&i| !row_used[i]) {
            for j in (0..k).filter(|&j| !col_used[j]) {
                if cos[[i, j]] > best.2 {
                    best = (i, j, cos[[i, j]]);
                }
            }
        }
        row_used[best.0] = true;
        col_used[best.1] = true;
        total += best.2.min(1.0);
    }
    Ok(total / k as f64)
}

fn normalized(m: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = m.clone();
    for mut col in out.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        col /= norm;
    }
    Ok(out)
}
