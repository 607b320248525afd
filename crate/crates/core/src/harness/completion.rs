use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{fit, fit_two_stage, FitResult, ProblemConfig};
use crate::error::{Error, Result};
use crate::io::GridPoint;
use crate::loss::{LossSpec, MaskSource};
use crate::prox::RegularizerSpec;
use crate::tensor::{model_entry, Dataset, DenseTensor, SparseTensor};

fn default_train_fraction() -> f64 {
    0.8
}
fn default_folds() -> usize {
    5
}

/// Train/test protocol.
///
/// Observations are shuffled once; fold `f` tests on the `f`-th block of
/// `round((1 − train_fraction)·nnz)` shuffled entries (wrapping around) and
/// trains on the rest, so five folds at 0.8 partition the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Pin column 1 of the first factor and column 2 of the second to ones.
    #[serde(default)]
    pub bias: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: default_train_fraction(),
            folds: default_folds(),
            seed: 0,
            bias: false,
        }
    }
}

/// Clamping of predictions before the MAE. `Auto` clamps to the observed
/// value range when every observation is an integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClampSpec {
    #[default]
    Auto,
    Off,
    Range([f64; 2]),
}

impl ClampSpec {
    pub fn resolve(&self, data: &SparseTensor<f64>) -> Option<(f64, f64)> {
        match *self {
            Self::Off => None,
            Self::Range([lo, hi]) => Some((lo, hi)),
            Self::Auto => {
                let v = data.values();
                if v.is_empty() || v.iter().any(|x| x.fract() != 0.0) {
                    return None;
                }
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: SparseTensor<f64>,
    pub test: SparseTensor<f64>,
}

pub fn split_folds(data: &SparseTensor<f64>, split: &SplitSpec) -> Result<Vec<Fold>> {
    if !(split.train_fraction > 0.0 && split.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {}",
            split.train_fraction
        )));
    }
    if split.folds == 0 {
        return Err(Error::InvalidParameter(
            "at least one fold is needed".into(),
        ));
    }
    let nnz = data.nnz();
    let test_len = ((1.0 - split.train_fraction) * nnz as f64).round() as usize;
    if test_len == 0 || test_len >= nnz {
        return Err(Error::InvalidParameter(format!(
            "{nnz} observations leave an empty train or test set"
        )));
    }
    let mut order: Vec<usize> = (0..nnz).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split.seed));
    (0..split.folds)
        .map(|f| {
            let mut in_test = vec![false; nnz];
            for j in 0..test_len {
                in_test[order[(f * test_len + j) % nnz]] = true;
            }
            Ok(Fold {
                train: data.select(|e| !in_test[e]),
                test: data.select(|e| in_test[e]),
            })
        })
        .collect()
}

/// Problem actually fitted for a grid point: least squares becomes the
/// missing-value loss over the training entries, and the bias flag wraps
/// the first two regularizers in fixed all-ones columns.
pub fn completion_problem(point: &ProblemConfig, bias: bool) -> Result<ProblemConfig> {
    let mut cfg = point.clone();
    if cfg.loss.is_least_squares() {
        cfg.loss = LossSpec::Missing {
            mask_source: MaskSource::UnlistedEntries,
        };
    }
    if bias {
        if cfg.rank < 2 {
            return Err(Error::InvalidParameter(
                "bias columns need rank >= 2".into(),
            ));
        }
        let mut regs = if cfg.regs.is_empty() {
            vec![RegularizerSpec::None; 2]
        } else {
            cfg.regs.clone()
        };
        if regs.len() != 2 {
            return Err(Error::InvalidParameter("bias columns need a matrix".into()));
        }
        for (d, r) in regs.iter_mut().enumerate() {
            *r = RegularizerSpec::FixedOnes {
                columns: vec![d],
                inner: Box::new(r.clone()),
            };
        }
        cfg.regs = regs;
    }
    Ok(cfg)
}

/// Mean absolute error of the model on the listed entries.
pub fn mae(factors: &[Array2<f64>], entries: &SparseTensor<f64>, clamp: Option<(f64, f64)>) -> f64 {
    if entries.nnz() == 0 {
        return 0.0;
    }
    let total: f64 = entries
        .iter()
        .map(|(idx, y)| {
            let mut p = model_entry(factors, idx);
            if let Some((lo, hi)) = clamp {
                p = p.clamp(lo, hi);
            }
            (p - y).abs()
        })
        .sum();
    total / entries.nnz() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaeRow {
    /// Fold number from 1, or `None` for the average over folds.
    pub fold: Option<usize>,
    pub config: String,
    pub train_mae: f64,
    pub test_mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionReport {
    pub rows: Vec<MaeRow>,
    pub means: Vec<MaeRow>,
    pub clamp: Option<(f64, f64)>,
}

fn train_dataset(train: &SparseTensor<f64>, loss: &LossSpec) -> Result<Dataset<f64>> {
    if loss.is_missing() {
        return Ok(train.clone().into());
    }
    // Other losses see unlisted sparse entries as zeros, so hold the
    // training set densely with an explicit mask instead.
    let dense = train.to_dense()?;
    let mut mask = vec![false; dense.len()];
    for (idx, _) in train.iter() {
        mask[dense.linear_index(idx)] = true;
    }
    Dataset::dense_with_mask(
        DenseTensor::new(dense.dims().to_vec(), dense.into_values())?,
        mask,
    )
}

fn fit_point(
    data: &Dataset<f64>,
    point: &GridPoint,
    cfg: &ProblemConfig,
) -> Result<FitResult<f64>> {
    match point.two_stage {
        Some(frac) if !cfg.loss.is_least_squares() && !cfg.loss.is_missing() => {
            fit_two_stage(data, cfg, frac)
        }
        _ => fit(data, cfg),
    }
}

pub fn run_completion_cv(
    data: &SparseTensor<f64>,
    split: &SplitSpec,
    grid: &[GridPoint],
    clamp: &ClampSpec,
) -> Result<CompletionReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty configuration grid".into()));
    }
    let folds = split_folds(data, split)?;
    let clamp = clamp.resolve(data);
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds.len()).map(move |f| (g, f)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(g, f)| {
            let point = &grid[g];
            let cfg = completion_problem(&point.problem, split.bias)?;
            let fold = &folds[f];
            let train = train_dataset(&fold.train, &cfg.loss)?;
            let res = fit_point(&train, point, &cfg)?;
            Ok(MaeRow {
                fold: Some(f + 1),
                config: point.name.clone(),
                train_mae: mae(&res.factors, &fold.train, clamp),
                test_mae: mae(&res.factors, &fold.test, clamp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let means = grid
        .iter()
        .map(|point| {
            let mine: Vec<&MaeRow> = rows.iter().filter(|r| r.config == point.name).collect();
            let n = mine.len() as f64;
            MaeRow {
                fold: None,
                config: point.name.clone(),
                train_mae: mine.iter().map(|r| r.train_mae).sum::<f64>() / n,
                test_mae: mine.iter().map(|r| r.test_mae).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(CompletionReport { rows, means, clamp })
}

/// CSV with columns `fold,config,train_mae,test_mae`; fold averages use the
/// fold label `mean`.
pub fn write_mae_csv<W: Write>(w: &mut W, report: &CompletionReport) -> Result<()> {
    writeln!(w, "fold,config,train_mae,test_mae")?;
    for r in report.rows.iter().chain(&report.means) {
        let fold = r.fold.map_or_else(|| "mean".to_string(), |f| f.to_string());
        writeln!(w, "{fold},{},{:?},{:?}", r.config, r.train_mae, r.test_mae)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratings() -> SparseTensor<f64> {
        let mut entries = Vec::new();
        for i in 0..6 {
            for j in 0..5 {
                entries.push((vec![i, j], ((i + 2 * j) % 5 + 1) as f64));
            }
        }
        SparseTensor::new(vec![6, 5], entries).unwrap()
    }

    #[test]
    fn folds_partition_the_data() {
        let data = ratings();
        let folds = split_folds(&data, &SplitSpec::default()).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = vec![0; data.nnz()];
        for f in &folds {
            assert_eq!(f.train.nnz() + f.test.nnz(), data.nnz());
            for (idx, _) in f.test.iter() {
                seen[data.find(idx).unwrap()] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn auto_clamp_for_integer_ratings() {
        let data = ratings();
        assert_eq!(ClampSpec::Auto.resolve(&data), Some((1.0, 5.0)));
        let frac = data
            .with_values(data.values().iter().map(|v| v + 0.5).collect())
            .unwrap();
        assert_eq!(ClampSpec::Auto.resolve(&frac), None);
        assert_eq!(ClampSpec::Off.resolve(&data), None);
    }

    #[test]
    fn bias_wraps_regularizers() {
        let mut p = ProblemConfig::new(3);
        p.regs = vec![RegularizerSpec::Nonneg; 2];
        let cfg = completion_problem(&p, true).unwrap();
        assert!(cfg.loss.is_missing());
        assert_eq!(
            cfg.regs[1],
            RegularizerSpec::FixedOnes {
                columns: vec![1],
                inner: Box::new(RegularizerSpec::Nonneg)
            }
        );
        assert!(completion_problem(&ProblemConfig::new(1), true).is_err());
    }
}
