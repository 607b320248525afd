use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admm::LemmaMode;
use crate::driver::{fit_with, IterationRecord, MuPolicy, ProblemConfig};
use crate::error::{Error, Result};
use crate::prox::RegularizerSpec;
use crate::tensor::{Dataset, DenseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DictInit {
    /// Normalized data columns picked at random.
    #[default]
    DataColumns,
    /// Normalized Gaussian columns.
    Random,
}

fn default_lambda() -> f64 {
    0.5
}
fn default_iters() -> usize {
    100
}
fn default_inner_eps() -> f64 {
    0.01
}
fn default_inner_max_iter() -> usize {
    10
}
fn default_lemma_ratio() -> f64 {
    0.5
}

/// `min ½‖Y − DS‖² + λ‖S‖₁` with the atoms in the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictSpec {
    pub k: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Nonnegative atoms and codes.
    #[serde(default)]
    pub nonneg: bool,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_inner_eps")]
    pub inner_eps: f64,
    #[serde(default = "default_inner_max_iter")]
    pub inner_max_iter: usize,
    #[serde(default)]
    pub lemma: LemmaMode,
    #[serde(default = "default_lemma_ratio")]
    pub lemma_ratio: f64,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub init: DictInit,
}

impl DictSpec {
    pub fn new(k: usize, lambda: f64) -> Self {
        Self {
            k,
            lambda,
            nonneg: false,
            iters: default_iters(),
            seed: 0,
            inner_eps: default_inner_eps(),
            inner_max_iter: default_inner_max_iter(),
            lemma: LemmaMode::Auto,
            lemma_ratio: default_lemma_ratio(),
            deterministic: false,
            init: DictInit::DataColumns,
        }
    }

    /// The equivalent two-mode problem: `Y ≈ D·(Sᵀ)ᵀ`.
    pub fn problem(&self) -> ProblemConfig {
        let wrap = |r: RegularizerSpec| {
            if self.nonneg {
                RegularizerSpec::NonnegComposed { inner: Box::new(r) }
            } else {
                r
            }
        };
        let mut cfg = ProblemConfig::new(self.k);
        cfg.regs = vec![
            wrap(RegularizerSpec::UnitNormColumns),
            wrap(RegularizerSpec::L1 {
                lambda: self.lambda,
            }),
        ];
        cfg.outer_max_iter = self.iters;
        cfg.inner_eps = self.inner_eps;
        cfg.inner_max_iter = self.inner_max_iter;
        cfg.mu = MuPolicy::Zero;
        cfg.seed = self.seed;
        cfg.deterministic = self.deterministic;
        // The lemma setting targets the code update, where W = D is short
        // and wide; the dictionary update keeps the automatic choice.
        cfg.lemma_modes = vec![LemmaMode::Auto, self.lemma];
        cfg.lemma_ratio = self.lemma_ratio;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictStats {
    /// Mean number of nonzero codes per sample.
    pub atoms_per_sample: f64,
    /// `1 − ‖Y − DS‖²/‖Y‖²`.
    pub energy_fraction: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DictResult {
    /// `m × k` dictionary.
    pub d: Array2<f64>,
    /// `k × n` codes.
    pub s: Array2<f64>,
    pub stats: DictStats,
    pub trace: Vec<IterationRecord>,
}

/// Learns a dictionary for the columns of `y` (`m × n`). The codes start at
/// `DᵀY` for the initial dictionary, which is `init_d` when given.
pub fn run_dictlearn(
    y: &Array2<f64>,
    spec: &DictSpec,
    init_d: Option<&Array2<f64>>,
    hook: &mut dyn FnMut(&[IterationRecord]),
) -> Result<DictResult> {
    if spec.k == 0 {
        return Err(Error::InvalidParameter(
            "dictionary size must be at least 1".into(),
        ));
    }
    let (m, n) = y.dim();
    let d0 = match init_d {
        Some(d) if d.dim() == (m, spec.k) => d.clone(),
        Some(d) => {
            return Err(Error::DimensionMismatch(format!(
                "initial dictionary is {:?}, expected {}x{}",
                d.dim(),
                m,
                spec.k
            )))
        }
        None => initial_dictionary(y, spec),
    };
    let s0 = y.t().dot(&d0);
    let cfg = spec.problem();
    let data: Dataset<f64> = DenseTensor::from_matrix(y)?.into();
    let res = fit_with(&data, &cfg, Some(vec![d0, s0]), hook)?;
    let d = res.factors[0].clone();
    let s = res.factors[1].t().to_owned();
    let resid = y - &d.dot(&s);
    let energy = y.iter().map(|v| v * v).sum::<f64>();
    let energy_fraction = if energy > 0.0 {
        1.0 - resid.iter().map(|v| v * v).sum::<f64>() / energy
    } else {
        0.0
    };
    let stats = DictStats {
        atoms_per_sample: s.iter().filter(|&&v| v != 0.0).count() as f64 / n as f64,
        energy_fraction,
        objective: res.trace.last().map_or(f64::NAN, |r| r.objective),
        iterations: res.trace.len(),
        converged: res.converged(),
    };
    Ok(DictResult {
        d,
        s,
        stats,
        trace: res.trace,
    })
}

fn initial_dictionary(y: &Array2<f64>, spec: &DictSpec) -> Array2<f64> {
    let (m, n) = y.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut d = Array2::zeros((m, spec.k));
    let picks: Vec<usize> = match spec.init {
        DictInit::DataColumns if n >= spec.k => sample(&mut rng, n, spec.k).into_vec(),
        DictInit::DataColumns => (0..spec.k).map(|j| j % n).collect(),
        DictInit::Random => Vec::new(),
    };
    for j in 0..spec.k {
        let mut col = d.column_mut(j);
        if let Some(&c) = picks.get(j) {
            col.assign(&y.column(c));
        }
        if spec.nonneg {
            col.mapv_inplace(|v| v.max(0.0));
        }
        if col.dot(&col) == 0.0 {
            for v in col.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = if spec.nonneg { z.abs() } else { z };
            }
        }
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dictionary_without_penalty() {
        let y = Array2::from_shape_fn((4, 9), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let mut spec = DictSpec::new(4, 0.0);
        spec.iters = 30;
        let res = run_dictlearn(&y, &spec, Some(&Array2::eye(4)), &mut |_| {}).unwrap();
        assert!((res.stats.energy_fraction - 1.0).abs() < 1e-8);
        let err = (&res.s - &y).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn huge_penalty_kills_codes() {
        let y = Array2::from_shape_fn((5, 12), |(i, j)| ((i + 2 * j) % 4) as f64);
        let spec = DictSpec::new(6, 1e6);
        let res = run_dictlearn(&y, &spec, None, &mut |_| {}).unwrap();
        assert_eq!(res.stats.atoms_per_sample, 0.0);
        assert_eq!(res.stats.energy_fraction, 0.0);
    }
}
