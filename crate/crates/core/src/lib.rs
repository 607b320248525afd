//! Constrained matrix and tensor factorization by alternating optimization,
//! with each factor update solved by a cached, warm-started ADMM.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64`/`*F32` aliases below fix the scalar for the common cases.

pub mod admm;
pub mod cli;
pub mod driver;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod prox;
pub mod scalar;
pub mod tensor;

pub use admm::{
    admm_general, admm_ls, build_cache, residuals, solve_ls_system, AdmmReport, AdmmSettings,
    CacheOptions, Counters, KernelCache, LemmaMode,
};
pub use driver::{
    fit, fit_two_stage, fit_with, initial_factors, objective, update_mu, FitResult, InitSpec,
    IterationRecord, MuPolicy, ProblemConfig, SplitSharing, StopReason,
};
pub use error::{Error, Result};
pub use loss::{v_update, y_update, LossSpec, MaskSource, SplitState};
pub use prox::{prox_apply, RegularizerSpec, SimplexAxis};
pub use scalar::Scalar;
pub use tensor::{Dataset, DenseTensor, SparseTensor, TensorData};

pub type DenseTensorF64 = DenseTensor<f64>;
pub type DenseTensorF32 = DenseTensor<f32>;
pub type SparseTensorF64 = SparseTensor<f64>;
pub type SparseTensorF32 = SparseTensor<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type FitResultF64 = FitResult<f64>;
pub type FitResultF32 = FitResult<f32>;
