//! Inner ADMM solvers for one factor subproblem.
//!
//! The least-squares solver caches `G = WᵀW`, the Cholesky factor of
//! `G + (ρ + μ)I` and `F = WᵀY` once per subproblem; the general-loss
//! solver reuses the same factorization but recomputes `Wᵀ(Ỹ + V)` every
//! iteration.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::loss::{LossSpec, SplitState};
use crate::prox::{prox_in_place, RegularizerSpec};
use crate::scalar::Scalar;
use crate::tensor::{gram_hadamard, kr_skip, mttkrp, Dataset, KernelOptions};

/// Work counters surfaced in the convergence log.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub factorizations: usize,
    pub inner_iterations: usize,
    pub mttkrp_calls: usize,
}

/// When to solve through `(ρI + WWᵀ)` instead of `(WᵀW + ρI)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaMode {
    /// Use the inversion lemma when `rows(W) < ratio · k`.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheOptions {
    /// Proximal weight `μ` of the block update.
    pub mu: f64,
    /// Frobenius safeguard weight folded into the ridge.
    pub ridge: f64,
    pub lemma: LemmaMode,
    pub lemma_ratio: f64,
    pub kernel: KernelOptions,
}

impl Default for CacheOptions {
    fn default() -> Self {
        Self {
            mu: 0.0,
            ridge: 0.0,
            lemma: LemmaMode::Auto,
            lemma_ratio: 0.5,
            kernel: KernelOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
enum LsSolver<T> {
    Cholesky(Cholesky<T>),
    /// `(WᵀW + cI)⁻¹ = c⁻¹(I − Wᵀ(cI + WWᵀ)⁻¹W)`
    Lemma {
        w: Array2<T>,
        chol: Cholesky<T>,
    },
}

/// Quantities shared by every inner iteration of one subproblem.
#[derive(Debug, Clone)]
pub struct KernelCache<T> {
    pub g: Array2<T>,
    pub rho: T,
    pub mu: T,
    pub ridge: T,
    /// `WᵀY`, cached for the least-squares path only.
    pub f: Option<Array2<T>>,
    solver: LsSolver<T>,
}

impl<T: Scalar> KernelCache<T> {
    /// Total diagonal shift `ρ + μ + ridge`.
    pub fn shift(&self) -> T {
        self.rho + self.mu + self.ridge
    }

    pub fn lemma_mode(&self) -> bool {
        matches!(self.solver, LsSolver::Lemma { .. })
    }

    /// The cached lower-triangular factor (`k × k`, or `m × m` in lemma mode).
    pub fn l(&self) -> &Array2<T> {
        match &self.solver {
            LsSolver::Cholesky(c) => c.l(),
            LsSolver::Lemma { chol, .. } => chol.l(),
        }
    }

    pub fn rank(&self) -> usize {
        self.g.nrows()
    }
}

/// Builds the cache for the update of mode `d`.
pub fn build_cache<T: Scalar>(
    factors: &[Array2<T>],
    d: usize,
    data: &Dataset<T>,
    loss: &LossSpec,
    opts: &CacheOptions,
    counters: &mut Counters,
) -> Result<KernelCache<T>> {
    let g = gram_hadamard(factors, d)?;
    let k = g.nrows();
    let trace: T = g.diag().iter().copied().sum();
    if !(trace > T::zero()) || !trace.is_finite() {
        return Err(Error::ZeroTraceGram);
    }
    let rho = trace / T::of(k as f64);
    let mu = T::of(opts.mu);
    let ridge = T::of(opts.ridge);
    let shift = rho + mu + ridge;

    let w_rows: usize = factors
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != d)
        .map(|(_, f)| f.nrows())
        .product();
    let use_lemma = match opts.lemma {
        LemmaMode::Always => true,
        LemmaMode::Never => false,
        LemmaMode::Auto => (w_rows as f64) < opts.lemma_ratio * k as f64,
    };
    let solver = if use_lemma {
        let w = kr_skip(factors, d)?;
        let mut inner = w.dot(&w.t());
        for i in 0..inner.nrows() {
            inner[[i, i]] += shift;
        }
        LsSolver::Lemma {
            chol: Cholesky::factor(&inner)?,
            w,
        }
    } else {
        let mut a = g.clone();
        for i in 0..k {
            a[[i, i]] += shift;
        }
        LsSolver::Cholesky(Cholesky::factor(&a)?)
    };
    counters.factorizations += 1;

    let f = if loss.is_least_squares() {
        counters.mttkrp_calls += 1;
        Some(mttkrp(&data.tensor, factors, d, opts.kernel)?)
    } else {
        None
    };
    Ok(KernelCache {
        g,
        rho,
        mu,
        ridge,
        f,
        solver,
    })
}

/// Solves `(G + (ρ + μ + ridge)I) X = rhs` with the cached factorization.
pub fn solve_ls_system<T: Scalar>(cache: &KernelCache<T>, rhs: &Array2<T>) -> Result<Array2<T>> {
    if rhs.nrows() != cache.rank() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, rank is {}",
            rhs.nrows(),
            cache.rank()
        )));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares right-hand side"));
    }
    match &cache.solver {
        LsSolver::Cholesky(c) => Ok(c.solve(rhs)),
        LsSolver::Lemma { w, chol } => {
            let wb = w.dot(rhs);
            let z = chol.solve(&wb);
            let mut x = rhs - &w.t().dot(&z);
            x /= cache.shift();
            Ok(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            eps: 0.01,
            max_iter: 10,
        }
    }
}

impl AdmmSettings {
    fn validate(&self, allow_zero_iters: bool) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inner tolerance must be positive, got {}",
                self.eps
            )));
        }
        if self.max_iter == 0 && !allow_zero_iters {
            return Err(Error::InvalidParameter(
                "inner iteration cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmReport {
    pub iterations: usize,
    /// Relative primal residual `‖H − H̃ᵀ‖² / ‖H‖²`.
    pub r: f64,
    /// Relative dual residual `‖H − H₀‖² / ‖U‖²`.
    pub s: f64,
    pub converged: bool,
}

fn ratio<T: Scalar>(num: T, den: T) -> f64 {
    if den > T::zero() {
        (num / den).as_f64()
    } else if num > T::zero() {
        f64::INFINITY
    } else {
        0.0
    }
}

fn dist_sq<'a, T: Scalar>(
    a: impl IntoIterator<Item = &'a T>,
    b: impl IntoIterator<Item = &'a T>,
) -> T {
    a.into_iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Relative primal and dual residuals. `htilde` is `k × n`; the rest `n × k`.
pub fn residuals<T: Scalar>(
    h: &Array2<T>,
    htilde: &Array2<T>,
    u: &Array2<T>,
    h0: &Array2<T>,
) -> Result<(f64, f64)> {
    if htilde.t().dim() != h.dim() || u.dim() != h.dim() || h0.dim() != h.dim() {
        return Err(Error::DimensionMismatch(
            "residual operands differ in shape".into(),
        ));
    }
    let norm_h: T = h.iter().map(|&v| v * v).sum();
    let norm_u: T = u.iter().map(|&v| v * v).sum();
    let r = ratio(dist_sq(h.iter(), htilde.t().iter()), norm_h);
    // A step at rounding level counts as no step, so that `0/0 = 0` also
    // holds in floating point.
    let mut step = dist_sq(h.iter(), h0.iter());
    let noise = T::of(64.0) * T::epsilon();
    if step <= noise * noise * norm_h {
        step = T::zero();
    }
    let s = ratio(step, norm_u);
    Ok((r, s))
}

fn check_block<T: Scalar>(cache: &KernelCache<T>, h: &Array2<T>, u: &Array2<T>) -> Result<()> {
    if h.ncols() != cache.rank() || u.dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "factor {:?} and dual {:?} do not match rank {}",
            h.dim(),
            u.dim(),
            cache.rank()
        )));
    }
    Ok(())
}

/// Assembles `base + ρ(H + U)ᵀ + μ·H_prevᵀ`.
fn assemble_rhs<T: Scalar>(
    cache: &KernelCache<T>,
    base: &Array2<T>,
    h: &Array2<T>,
    u: &Array2<T>,
    h_prev: Option<&Array2<T>>,
) -> Array2<T> {
    let mut rhs = base + &((h + u).t().to_owned() * cache.rho);
    if let Some(prev) = h_prev {
        if cache.mu > T::zero() {
            rhs.scaled_add(cache.mu, &prev.t());
        }
    }
    rhs
}

/// H- and U-updates shared by both solvers; returns `(r, s)`.
fn prox_and_dual<T: Scalar>(
    cache: &KernelCache<T>,
    spec: &RegularizerSpec,
    htilde: &Array2<T>,
    h: &mut Array2<T>,
    u: &mut Array2<T>,
) -> Result<(f64, f64)> {
    let h0 = std::mem::replace(h, htilde.t().to_owned() - &*u);
    prox_in_place(spec, h, cache.rho)?;
    *u += &*h;
    *u -= &htilde.t();
    residuals(h, htilde, u, &h0)
}

/// ADMM for `min ½‖Y − WHᵀ‖² + r(H)` using the cached `F = WᵀY`.
///
/// `h` and `u` carry the warm start in and the result out. `h_prev` is the
/// previous outer iterate for the proximal term (ignored when `μ = 0`).
pub fn admm_ls<T: Scalar>(
    cache: &KernelCache<T>,
    h: &mut Array2<T>,
    u: &mut Array2<T>,
    spec: &RegularizerSpec,
    settings: &AdmmSettings,
    h_prev: Option<&Array2<T>>,
    counters: &mut Counters,
) -> Result<AdmmReport> {
    settings.validate(false)?;
    check_block(cache, h, u)?;
    let f = cache
        .f
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cache was built without WᵀY".into()))?;
    if f.dim() != (cache.rank(), h.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "cached WᵀY is {:?}, factor is {:?}",
            f.dim(),
            h.dim()
        )));
    }
    let mut report = AdmmReport {
        iterations: 0,
        r: f64::INFINITY,
        s: f64::INFINITY,
        converged: false,
    };
    while report.iterations < settings.max_iter {
        let rhs = assemble_rhs(cache, f, h, u, h_prev);
        let htilde = solve_ls_system(cache, &rhs)?;
        let (r, s) = prox_and_dual(cache, spec, &htilde, h, u)?;
        report.iterations += 1;
        counters.inner_iterations += 1;
        report.r = r;
        report.s = s;
        if r < settings.eps && s < settings.eps {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

/// ADMM for `min l(Y − WHᵀ) + r(H)` with the split `Ỹ = WH̃`.
///
/// `factors` supplies the other modes (its entry `d` is ignored); `h`, `u`
/// and `split` carry the warm start. A zero iteration cap leaves the state
/// untouched.
#[allow(clippy::too_many_arguments)]
pub fn admm_general<T: Scalar>(
    cache: &KernelCache<T>,
    data: &Dataset<T>,
    factors: &[Array2<T>],
    d: usize,
    h: &mut Array2<T>,
    u: &mut Array2<T>,
    split: &mut SplitState<T>,
    spec: &RegularizerSpec,
    loss: &LossSpec,
    settings: &AdmmSettings,
    h_prev: Option<&Array2<T>>,
    kernel: KernelOptions,
    counters: &mut Counters,
) -> Result<AdmmReport> {
    settings.validate(true)?;
    check_block(cache, h, u)?;
    if d >= factors.len() || factors[d].nrows() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "factor for mode {} has the wrong shape",
            d + 1
        )));
    }
    let mut model = factors.to_vec();
    let mut report = AdmmReport {
        iterations: 0,
        r: f64::INFINITY,
        s: f64::INFINITY,
        converged: false,
    };
    while report.iterations < settings.max_iter {
        model[d].assign(h);
        let base = split.mttkrp(data, &model, d, kernel)?;
        counters.mttkrp_calls += 1;
        let rhs = assemble_rhs(cache, &base, h, u, h_prev);
        let htilde = solve_ls_system(cache, &rhs)?;
        let (r, s) = prox_and_dual(cache, spec, &htilde, h, u)?;
        model[d].assign(&htilde.t());
        split.update(data, loss, &model)?;
        report.iterations += 1;
        counters.inner_iterations += 1;
        report.r = r;
        report.s = s;
        if r < settings.eps && s < settings.eps {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}
