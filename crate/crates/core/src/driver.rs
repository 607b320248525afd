//! Outer alternating-optimization loop.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::admm::{
    admm_general, admm_ls, build_cache, AdmmSettings, CacheOptions, Counters, KernelCache,
    LemmaMode,
};
use crate::error::{Error, Result};
use crate::loss::{loss_value, LossSpec, SplitState};
use crate::prox::{self, RegularizerSpec};
use crate::scalar::Scalar;
use crate::tensor::{check_conformable, gram_hadamard, relative_error, Dataset, KernelOptions};

/// Proximal weight schedule for the block updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MuPolicy {
    /// Adaptive for three or more modes, zero for matrices.
    #[default]
    Auto,
    Zero,
    Fixed(f64),
    /// `μ ← 1e-7 + 0.01·‖Y − [H]‖/‖Y‖` after every cycle.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    /// i.i.d. uniform(0, 1) entries.
    #[default]
    Uniform01,
    /// i.i.d. |N(0, 1)| entries.
    AbsGaussian,
    /// Factors saved by an earlier run, one Matrix Market file per mode.
    Provided(String),
}

/// How the general-loss auxiliaries `(Ỹ, V)` are kept across modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSharing {
    #[default]
    PerMode,
    Shared,
}

fn default_inner_eps() -> f64 {
    0.01
}
fn default_inner_max_iter() -> usize {
    10
}
fn default_outer_max_iter() -> usize {
    200
}
fn default_outer_tol() -> f64 {
    1e-7
}
fn default_lemma_ratio() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub rank: usize,
    #[serde(default)]
    pub loss: LossSpec,
    /// One regularizer per mode; empty means unregularized everywhere.
    #[serde(default)]
    pub regs: Vec<RegularizerSpec>,
    #[serde(default = "default_inner_eps")]
    pub inner_eps: f64,
    #[serde(default = "default_inner_max_iter")]
    pub inner_max_iter: usize,
    #[serde(default = "default_outer_max_iter")]
    pub outer_max_iter: usize,
    /// Relative objective change below which a cycle counts as stalled.
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default)]
    pub mu: MuPolicy,
    /// Weight `w` of the `(w/2)‖H_d‖²_F` term added for every mode.
    #[serde(default)]
    pub safeguard: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sequential kernel reductions.
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub split: SplitSharing,
    #[serde(default)]
    pub lemma: LemmaMode,
    #[serde(default = "default_lemma_ratio")]
    pub lemma_ratio: f64,
    /// Per-mode override of `lemma`; empty means `lemma` everywhere.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lemma_modes: Vec<LemmaMode>,
    /// Reject block updates that would increase the objective.
    #[serde(default = "default_true")]
    pub monotone_guard: bool,
    /// Keep a snapshot of the factors every this many outer iterations (0: never).
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl ProblemConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            loss: LossSpec::LeastSquares,
            regs: Vec::new(),
            inner_eps: default_inner_eps(),
            inner_max_iter: default_inner_max_iter(),
            outer_max_iter: default_outer_max_iter(),
            outer_tol: default_outer_tol(),
            mu: MuPolicy::Auto,
            safeguard: 0.0,
            seed: 0,
            deterministic: false,
            init: InitSpec::Uniform01,
            split: SplitSharing::PerMode,
            lemma: LemmaMode::Auto,
            lemma_ratio: default_lemma_ratio(),
            lemma_modes: Vec::new(),
            monotone_guard: true,
            checkpoint_every: 0,
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        // Config files store integers as i64.
        if i64::try_from(self.seed).is_err() {
            return bad(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        if !self.regs.is_empty() && self.regs.len() != order {
            return bad(format!(
                "{} regularizers given for a {order}-way tensor",
                self.regs.len()
            ));
        }
        for r in &self.regs {
            r.validate_for(self.rank)?;
        }
        self.loss.validate()?;
        if !(self.inner_eps > 0.0) || !(self.outer_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.inner_max_iter == 0 {
            return bad("inner_max_iter must be at least 1".into());
        }
        if !(self.safeguard >= 0.0) || !self.safeguard.is_finite() {
            return bad(format!(
                "safeguard weight must be >= 0, got {}",
                self.safeguard
            ));
        }
        if let MuPolicy::Fixed(mu) = self.mu {
            if !(mu >= 0.0) || !mu.is_finite() {
                return bad(format!("fixed mu must be >= 0, got {mu}"));
            }
        }
        if !self.lemma_modes.is_empty() && self.lemma_modes.len() != order {
            return bad(format!(
                "{} lemma modes given for a {order}-way tensor",
                self.lemma_modes.len()
            ));
        }
        if !(self.lemma_ratio >= 0.0) {
            return bad("lemma_ratio must be >= 0".into());
        }
        Ok(())
    }

    pub fn reg(&self, d: usize) -> &RegularizerSpec {
        static NONE: RegularizerSpec = RegularizerSpec::None;
        self.regs.get(d).unwrap_or(&NONE)
    }

    pub fn lemma_for(&self, d: usize) -> LemmaMode {
        self.lemma_modes.get(d).copied().unwrap_or(self.lemma)
    }

    fn resolved_mu_policy(&self, order: usize) -> MuPolicy {
        match self.mu {
            MuPolicy::Auto if order >= 3 => MuPolicy::Adaptive,
            MuPolicy::Auto => MuPolicy::Zero,
            p => p,
        }
    }

    fn kernel(&self) -> KernelOptions {
        KernelOptions {
            parallel: !self.deterministic,
        }
    }
}

/// One row of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub rel_error: f64,
    /// Distance of the factors from their hard constraint sets.
    pub violation: f64,
    pub inner_iters: Vec<usize>,
    /// Cumulative MTTKRP evaluations.
    pub mttkrp_calls: usize,
    pub mu: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub iter: usize,
    pub factors: Vec<Array2<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub factors: Vec<Array2<T>>,
    pub duals: Vec<Array2<T>>,
    pub trace: Vec<IterationRecord>,
    pub stop: StopReason,
    pub mu: f64,
    pub counters: Counters,
    pub checkpoints: Vec<Checkpoint<T>>,
}

impl<T> FitResult<T> {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

/// Objective split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub loss: f64,
    pub reg: f64,
    pub violation: f64,
}

/// `l(Y − [H]) + Σ r_d(H_d)` plus the safeguard term; hard constraints are
/// reported through `violation` instead of contributing `+∞`.
pub fn objective<T: Scalar>(
    data: &Dataset<T>,
    factors: &[Array2<T>],
    cfg: &ProblemConfig,
) -> Result<ObjectiveValue> {
    objective_with_loss(data, factors, cfg, &cfg.loss)
}

fn objective_with_loss<T: Scalar>(
    data: &Dataset<T>,
    factors: &[Array2<T>],
    cfg: &ProblemConfig,
    loss: &LossSpec,
) -> Result<ObjectiveValue> {
    let loss = loss_value(loss, data, factors)?.as_f64();
    let mut reg = 0.0;
    let mut violation = 0.0;
    for (d, h) in factors.iter().enumerate() {
        reg += block_penalty(cfg, d, h);
        violation += prox::violation(cfg.reg(d), h).as_f64();
    }
    Ok(ObjectiveValue {
        total: loss + reg,
        loss,
        reg,
        violation,
    })
}

fn block_penalty<T: Scalar>(cfg: &ProblemConfig, d: usize, h: &Array2<T>) -> f64 {
    let mut v = prox::value(cfg.reg(d), h).as_f64();
    if cfg.safeguard > 0.0 {
        v += 0.5 * cfg.safeguard * h.iter().map(|&x| x * x).sum::<T>().as_f64();
    }
    v
}

/// Next proximal weight under `policy`.
pub fn update_mu<T: Scalar>(
    data: &Dataset<T>,
    factors: &[Array2<T>],
    current: f64,
    policy: MuPolicy,
    observed_only: bool,
) -> Result<f64> {
    match policy {
        MuPolicy::Adaptive => {
            let rel = relative_error(&data.tensor, factors, data.mask(), observed_only)?;
            Ok(1e-7 + 0.01 * rel.as_f64())
        }
        MuPolicy::Zero => Ok(0.0),
        MuPolicy::Fixed(mu) => Ok(mu),
        MuPolicy::Auto => Ok(current),
    }
}

fn draw_factors<T: Scalar>(
    dims: &[usize],
    k: usize,
    init: &InitSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<Array2<T>> {
    dims.iter()
        .map(|&n| {
            Array2::from_shape_simple_fn((n, k), || match init {
                InitSpec::AbsGaussian => {
                    let z: f64 = StandardNormal.sample(rng);
                    T::of(z.abs())
                }
                _ => T::of(rng.random::<f64>()),
            })
        })
        .collect()
}

pub fn initial_factors<T: Scalar>(
    data: &Dataset<T>,
    cfg: &ProblemConfig,
) -> Result<Vec<Array2<T>>> {
    let dims = data.dims();
    if let InitSpec::Provided(dir) = &cfg.init {
        let loaded = crate::io::load_factors(std::path::Path::new(dir))?;
        let factors: Vec<Array2<T>> = loaded.into_iter().map(|m| m.mapv(T::of)).collect();
        check_init(dims, cfg.rank, &factors)?;
        return Ok(factors);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..5 {
        let factors = draw_factors(dims, cfg.rank, &cfg.init, &mut rng);
        if gram_traces_positive(&factors)? {
            return Ok(factors);
        }
    }
    Err(Error::ZeroTraceGram)
}

fn check_init<T: Scalar>(dims: &[usize], rank: usize, factors: &[Array2<T>]) -> Result<()> {
    let k = check_conformable(dims, factors)?;
    if k != rank {
        return Err(Error::ColumnMismatch {
            expected: rank,
            found: k,
        });
    }
    if factors.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("initial factors"));
    }
    Ok(())
}

fn gram_traces_positive<T: Scalar>(factors: &[Array2<T>]) -> Result<bool> {
    for d in 0..factors.len() {
        let g = gram_hadamard(factors, d)?;
        if !(g.diag().sum() > T::zero()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs the alternating loop with default initialization and no callback.
pub fn fit<T: Scalar>(data: &Dataset<T>, cfg: &ProblemConfig) -> Result<FitResult<T>> {
    fit_with(data, cfg, None, &mut |_| {})
}

/// Full-control entry point.
///
/// `initial` overrides `cfg.init`. `hook` runs once per outer iteration with
/// the trace so far.
pub fn fit_with<T: Scalar>(
    data: &Dataset<T>,
    cfg: &ProblemConfig,
    initial: Option<Vec<Array2<T>>>,
    hook: &mut dyn FnMut(&[IterationRecord]),
) -> Result<FitResult<T>> {
    cfg.validate(data.order())?;
    cfg.loss.check_data(data)?;
    let factors = match initial {
        Some(f) => {
            check_init(data.dims(), cfg.rank, &f)?;
            f
        }
        None => initial_factors(data, cfg)?,
    };
    let duals = factors.iter().map(|f| Array2::zeros(f.dim())).collect();
    let mut run = Run::new(data, cfg, factors, duals, None)?;
    run.iterate(data, cfg, &cfg.loss, cfg.outer_max_iter, hook)?;
    Ok(run.finish())
}

/// Least-squares warm-up for a fraction of the iteration budget, then the
/// configured loss from the warm-up factors. Missing or unlisted entries are
/// treated as zeros during the warm-up.
pub fn fit_two_stage<T: Scalar>(
    data: &Dataset<T>,
    cfg: &ProblemConfig,
    fraction: f64,
) -> Result<FitResult<T>> {
    fit_two_stage_with(data, cfg, fraction, None, &mut |_| {})
}

pub fn fit_two_stage_with<T: Scalar>(
    data: &Dataset<T>,
    cfg: &ProblemConfig,
    fraction: f64,
    initial: Option<Vec<Array2<T>>>,
    hook: &mut dyn FnMut(&[IterationRecord]),
) -> Result<FitResult<T>> {
    if cfg.loss.is_least_squares() {
        return Err(Error::InvalidParameter(
            "two-stage fitting needs a non-least-squares loss".into(),
        ));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "stage fraction must lie in [0, 1], got {fraction}"
        )));
    }
    cfg.validate(data.order())?;
    cfg.loss.check_data(data)?;
    let factors = match initial {
        Some(f) => {
            check_init(data.dims(), cfg.rank, &f)?;
            f
        }
        None => initial_factors(data, cfg)?,
    };
    let duals = factors.iter().map(|f| Array2::zeros(f.dim())).collect();
    let stage1 = (fraction * cfg.outer_max_iter as f64).round() as usize;
    let mut run = Run::new(data, cfg, factors, duals, Some(&LossSpec::LeastSquares))?;
    run.iterate(data, cfg, &LossSpec::LeastSquares, stage1, hook)?;
    let remaining = cfg.outer_max_iter - stage1;
    if remaining > 0 {
        run.stop = StopReason::MaxIterations;
        run.stall_streak = 0;
        run.splits.clear();
        run.prev_objective = objective(data, &run.factors, cfg)?.total;
        run.iterate(data, cfg, &cfg.loss, remaining, hook)?;
    }
    Ok(run.finish())
}

struct Run<T> {
    factors: Vec<Array2<T>>,
    duals: Vec<Array2<T>>,
    splits: Vec<SplitState<T>>,
    trace: Vec<IterationRecord>,
    checkpoints: Vec<Checkpoint<T>>,
    counters: Counters,
    mu: f64,
    mu_policy: MuPolicy,
    prev_objective: f64,
    stall_streak: usize,
    stop: StopReason,
    started: Instant,
}

impl<T: Scalar> Run<T> {
    fn new(
        data: &Dataset<T>,
        cfg: &ProblemConfig,
        factors: Vec<Array2<T>>,
        duals: Vec<Array2<T>>,
        first_loss: Option<&LossSpec>,
    ) -> Result<Self> {
        let mu_policy = cfg.resolved_mu_policy(data.order());
        let observed_only = observed_only(data, first_loss.unwrap_or(&cfg.loss));
        let mu = update_mu(data, &factors, 0.0, mu_policy, observed_only)?;
        let prev_objective =
            objective_with_loss(data, &factors, cfg, first_loss.unwrap_or(&cfg.loss))?.total;
        Ok(Self {
            factors,
            duals,
            splits: Vec::new(),
            trace: Vec::new(),
            checkpoints: Vec::new(),
            counters: Counters::default(),
            mu,
            mu_policy,
            prev_objective,
            stall_streak: 0,
            stop: StopReason::MaxIterations,
            started: Instant::now(),
        })
    }

    fn iterate(
        &mut self,
        data: &Dataset<T>,
        cfg: &ProblemConfig,
        solve_loss: &LossSpec,
        max_iter: usize,
        hook: &mut dyn FnMut(&[IterationRecord]),
    ) -> Result<()> {
        let order = data.order();
        let settings = AdmmSettings {
            eps: cfg.inner_eps,
            max_iter: cfg.inner_max_iter,
        };
        let kernel = cfg.kernel();
        let general = !solve_loss.is_least_squares();
        if general && self.splits.is_empty() {
            let copies = match cfg.split {
                SplitSharing::PerMode => order,
                SplitSharing::Shared => 1,
            };
            for _ in 0..copies {
                self.splits.push(SplitState::init(data, solve_loss)?);
            }
        }
        // Loss of the current factors, kept up to date for the guard.
        let mut current_loss = if general && cfg.monotone_guard {
            loss_value(solve_loss, data, &self.factors)?.as_f64()
        } else {
            0.0
        };

        for _ in 0..max_iter {
            let mut inner_iters = Vec::with_capacity(order);
            let mut moved = false;
            for d in 0..order {
                let opts = CacheOptions {
                    mu: self.mu,
                    ridge: cfg.safeguard,
                    lemma: cfg.lemma_for(d),
                    lemma_ratio: cfg.lemma_ratio,
                    kernel,
                };
                // Every other factor is zero: the data term does not depend
                // on this block, so it is left as is.
                let cache = match build_cache(
                    &self.factors,
                    d,
                    data,
                    solve_loss,
                    &opts,
                    &mut self.counters,
                ) {
                    Err(Error::ZeroTraceGram) => {
                        inner_iters.push(0);
                        continue;
                    }
                    other => other?,
                };
                let h_prev = self.factors[d].clone();
                let mut h = h_prev.clone();
                let mut u = self.duals[d].clone();
                let reg = cfg.reg(d);
                let report = if general {
                    let slot = match cfg.split {
                        SplitSharing::PerMode => d,
                        SplitSharing::Shared => 0,
                    };
                    admm_general(
                        &cache,
                        data,
                        &self.factors,
                        d,
                        &mut h,
                        &mut u,
                        &mut self.splits[slot],
                        reg,
                        solve_loss,
                        &settings,
                        Some(&h_prev),
                        kernel,
                        &mut self.counters,
                    )?
                } else {
                    admm_ls(
                        &cache,
                        &mut h,
                        &mut u,
                        reg,
                        &settings,
                        Some(&h_prev),
                        &mut self.counters,
                    )?
                };
                inner_iters.push(report.iterations);

                let accept = if !cfg.monotone_guard {
                    true
                } else if general {
                    let mut trial = self.factors.clone();
                    trial[d].assign(&h);
                    let new_loss = loss_value(solve_loss, data, &trial)?.as_f64();
                    let ok = improves(
                        cfg,
                        d,
                        &h,
                        &h_prev,
                        new_loss + block_penalty(cfg, d, &h),
                        current_loss + block_penalty(cfg, d, &h_prev),
                    );
                    if ok {
                        current_loss = new_loss;
                    }
                    ok
                } else {
                    let new = ls_block_objective(&cache, &h) + block_penalty(cfg, d, &h);
                    let old = ls_block_objective(&cache, &h_prev) + block_penalty(cfg, d, &h_prev);
                    improves(cfg, d, &h, &h_prev, new, old)
                };
                if accept {
                    moved |= h != h_prev;
                    self.factors[d] = h;
                }
                self.duals[d] = u;
            }

            let iter = self.trace.len() + 1;
            let obj = objective(data, &self.factors, cfg)?;
            let rel = relative_error(
                &data.tensor,
                &self.factors,
                data.mask(),
                observed_only(data, &cfg.loss),
            )?
            .as_f64();
            self.trace.push(IterationRecord {
                iter,
                objective: obj.total,
                rel_error: rel,
                violation: obj.violation,
                inner_iters,
                mttkrp_calls: self.counters.mttkrp_calls,
                mu: self.mu,
                elapsed_s: self.started.elapsed().as_secs_f64(),
            });
            if cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 {
                self.checkpoints.push(Checkpoint {
                    iter,
                    factors: self.factors.clone(),
                });
            }
            hook(&self.trace);

            if self.mu_policy == MuPolicy::Adaptive {
                self.mu = 1e-7 + 0.01 * rel;
            }
            let change = (self.prev_objective - obj.total).abs()
                / self.prev_objective.abs().max(f64::MIN_POSITIVE);
            self.prev_objective = obj.total;
            if !moved {
                // Every update was rejected by the guard, but the split and
                // dual states did move; this is not a sign of convergence.
            } else if change < cfg.outer_tol {
                self.stall_streak += 1;
                if self.stall_streak >= 2 {
                    self.stop = StopReason::Converged;
                    break;
                }
            } else {
                self.stall_streak = 0;
            }
        }
        Ok(())
    }

    fn finish(self) -> FitResult<T> {
        FitResult {
            factors: self.factors,
            duals: self.duals,
            trace: self.trace,
            stop: self.stop,
            mu: self.mu,
            counters: self.counters,
            checkpoints: self.checkpoints,
        }
    }
}

/// Whether the relative error is taken over observed entries only.
fn observed_only<T: Scalar>(data: &Dataset<T>, loss: &LossSpec) -> bool {
    loss.is_missing() || (data.mask().is_some() && !loss.is_least_squares())
}

/// Least-squares block objective up to a constant: `½⟨HG, H⟩ − ⟨H, Fᵀ⟩`.
fn ls_block_objective<T: Scalar>(cache: &KernelCache<T>, h: &Array2<T>) -> f64 {
    let f = cache.f.as_ref().expect("least-squares cache holds WᵀY");
    let hg = h.dot(&cache.g);
    let mut quad = T::zero();
    let mut lin = T::zero();
    for ((i, c), &v) in h.indexed_iter() {
        quad += hg[[i, c]] * v;
        lin += f[[c, i]] * v;
    }
    (T::of(0.5) * quad - lin).as_f64()
}

/// Feasibility first, then objective.
fn improves<T: Scalar>(
    cfg: &ProblemConfig,
    d: usize,
    h_new: &Array2<T>,
    h_old: &Array2<T>,
    new: f64,
    old: f64,
) -> bool {
    let v_new = prox::violation(cfg.reg(d), h_new).as_f64();
    let v_old = prox::violation(cfg.reg(d), h_old).as_f64();
    let tol = 1e-12 * (1.0 + v_old);
    if v_new < v_old - tol {
        return true;
    }
    v_new <= v_old + tol && new <= old
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{full, DenseTensor};

    #[test]
    fn config_validation() {
        let mut cfg = ProblemConfig::new(0);
        assert!(cfg.validate(2).is_err());
        cfg.rank = 2;
        cfg.regs = vec![RegularizerSpec::Nonneg];
        assert!(cfg.validate(2).is_err());
        cfg.regs = vec![RegularizerSpec::Nonneg; 2];
        assert!(cfg.validate(2).is_ok());
        cfg.inner_eps = 0.0;
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn zero_iterations_returns_init() {
        let data: Dataset<f64> = DenseTensor::from_fn(vec![4, 3], |i| (i[0] + i[1]) as f64 + 1.0)
            .unwrap()
            .into();
        let mut cfg = ProblemConfig::new(2);
        cfg.outer_max_iter = 0;
        let res = fit(&data, &cfg).unwrap();
        assert!(res.trace.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init: Vec<Array2<f64>> = draw_factors(data.dims(), 2, &cfg.init, &mut rng);
        assert_eq!(res.factors, init);
    }

    #[test]
    fn mu_formula() {
        let f = vec![
            ndarray::array![[1.0, 2.0], [0.5, 1.0]],
            ndarray::array![[1.0, 0.0], [2.0, 1.0], [1.0, 1.0]],
        ];
        let data: Dataset<f64> = full(&f).unwrap().into();
        let mu = update_mu(&data, &f, 0.0, MuPolicy::Adaptive, false).unwrap();
        assert!((mu - 1e-7).abs() < 1e-15);
        let zeros: Vec<Array2<f64>> = f.iter().map(|m| Array2::zeros(m.dim())).collect();
        let mu = update_mu(&data, &zeros, 0.0, MuPolicy::Adaptive, false).unwrap();
        assert!((mu - (1e-7 + 0.01)).abs() < 1e-15);
        assert_eq!(
            update_mu(&data, &f, 0.3, MuPolicy::Fixed(0.2), false).unwrap(),
            0.2
        );
        assert_eq!(
            update_mu(&data, &f, 0.3, MuPolicy::Zero, false).unwrap(),
            0.0
        );
    }

    #[test]
    fn objective_parts() {
        let f = vec![ndarray::array![[2.0]], ndarray::array![[1.0]]];
        let data: Dataset<f64> = full(&f).unwrap().into();
        let mut cfg = ProblemConfig::new(1);
        cfg.regs = vec![RegularizerSpec::L1 { lambda: 1.0 }, RegularizerSpec::Nonneg];
        let obj = objective(&data, &f, &cfg).unwrap();
        assert_eq!(obj.loss, 0.0);
        assert_eq!(obj.reg, 2.0);
        assert_eq!(obj.violation, 0.0);
    }

    #[test]
    fn mu_policy_serde() {
        #[derive(Serialize, Deserialize)]
        struct W {
            mu: MuPolicy,
        }
        let w: W = toml::from_str("mu = \"adaptive\"").unwrap();
        assert_eq!(w.mu, MuPolicy::Adaptive);
        let w: W = toml::from_str("mu = { fixed = 0.25 }").unwrap();
        assert_eq!(w.mu, MuPolicy::Fixed(0.25));
    }
}
