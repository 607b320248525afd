use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{full, DenseTensor};

fn default_sparsify() -> f64 {
    0.5
}
fn default_variance() -> f64 {
    0.01
}
fn default_true() -> bool {
    true
}

/// Low-rank-plus-noise recipe: factor entries exponential with mean 1 (or
/// standard normal when `nonneg` is off), a fraction of each factor's
/// entries zeroed, Gaussian noise added to every tensor entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub dims: Vec<usize>,
    pub k_true: usize,
    #[serde(default = "default_sparsify")]
    pub sparsify: f64,
    #[serde(default = "default_variance")]
    pub noise_variance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub nonneg: bool,
}

impl SynthSpec {
    pub fn new(dims: Vec<usize>, k_true: usize) -> Self {
        Self {
            dims,
            k_true,
            sparsify: default_sparsify(),
            noise_variance: default_variance(),
            seed: 0,
            nonneg: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("bad dims {:?}", self.dims)));
        }
        if self.k_true == 0 {
            return Err(Error::InvalidParameter("k_true must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sparsify) {
            return Err(Error::InvalidParameter(format!(
                "sparsify must lie in [0, 1], got {}",
                self.sparsify
            )));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: DenseTensor<f64>,
    pub factors: Vec<Array2<f64>>,
    pub noise_norm: f64,
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.k_true;
    let mut factors = Vec::with_capacity(spec.dims.len());
    for &n in &spec.dims {
        let mut h = Array2::from_shape_simple_fn((n, k), || {
            if spec.nonneg {
                Exp1.sample(&mut rng)
            } else {
                StandardNormal.sample(&mut rng)
            }
        });
        let zeroed = (spec.sparsify * (n * k) as f64).round() as usize;
        let flat = h.as_slice_mut().expect("fresh arrays are contiguous");
        for pos in sample(&mut rng, n * k, zeroed) {
            flat[pos] = 0.0;
        }
        factors.push(h);
    }
    let mut data = full(&factors)?;
    let mut noise_sq = 0.0;
    if spec.noise_variance > 0.0 {
        let normal = Normal::new(0.0, spec.noise_variance.sqrt())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in data.values_mut() {
            let e = normal.sample(&mut rng);
            noise_sq += e * e;
            *v += e;
        }
    }
    Ok(Synthetic {
        data,
        factors,
        noise_norm: noise_sq.sqrt(),
    })
}
