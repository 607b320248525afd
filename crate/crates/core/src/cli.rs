//! Command-line front end. [`cli_run`] returns the process exit code.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::Serialize;

use crate::driver::{fit_two_stage_with, fit_with, objective, FitResult, IterationRecord};
use crate::error::{Error, Result};
use crate::harness::{gen_synthetic, run_completion_cv, run_dictlearn, write_mae_csv, SynthSpec};
use crate::io::{
    config_hash, load_factors, save_factors, save_tensor, write_matrix_market_array,
    CompletionRunConfig, DictRunConfig, FactorFormat, RunConfig, TensorFormat,
};
use crate::tensor::{relative_error, TensorData};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const THREADS_ENV: &str = "FACTORFORGE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "factorforge",
    version,
    about = "Constrained matrix/tensor factorization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model described by a run config.
    Fit(FitArgs),
    /// Score saved factors against the data of a run config.
    Eval(EvalArgs),
    /// Generate a synthetic low-rank tensor and its true factors.
    Synth(SynthArgs),
    /// Cross-validated matrix completion over a grid of configs.
    Complete(HarnessArgs),
    /// Dictionary learning on a patches matrix.
    Dictlearn(HarnessArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    factors: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Mode sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.5)]
    sparsify: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_variance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian instead of exponential factor entries.
    #[arg(long)]
    signed: bool,
    #[arg(long, value_enum, default_value_t = TensorFormat::Coo)]
    format: TensorFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct HarnessArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn cli_run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_CONVERGED
            };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    if let Some(path) = config_path(&cli.command) {
        if !path.is_file() {
            eprintln!("error: config file {} not found", path.display());
            return EXIT_USAGE;
        }
    }
    let outcome = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Eval(a) => run_eval(a).map(|_| EXIT_CONVERGED),
        Command::Synth(a) => run_synth(a).map(|_| EXIT_CONVERGED),
        Command::Complete(a) => run_complete(a).map(|_| EXIT_CONVERGED),
        Command::Dictlearn(a) => run_dict(a).map(|_| EXIT_CONVERGED),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn config_path(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Fit(a) => Some(&a.config),
        Command::Eval(a) => Some(&a.config),
        Command::Complete(a) | Command::Dictlearn(a) => Some(&a.config),
        Command::Synth(_) => None,
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    // A pool built earlier in this process stays in place.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn progress(every: usize) -> impl FnMut(&[IterationRecord]) {
    move |trace: &[IterationRecord]| {
        if let Some(r) = trace.last() {
            if every > 0 && r.iter % every == 0 {
                eprintln!(
                    "iter {:>5}  objective {:.6e}  rel_error {:.6e}",
                    r.iter, r.objective, r.rel_error
                );
            }
        }
    }
}

/// Columns `iter,objective,rel_error,inner_iters_per_mode,elapsed_s`; the
/// per-mode counts are joined with `;`.
pub fn write_trace_csv<W: Write>(w: &mut W, trace: &[IterationRecord]) -> Result<()> {
    writeln!(w, "iter,objective,rel_error,inner_iters_per_mode,elapsed_s")?;
    for r in trace {
        let inner: Vec<String> = r.inner_iters.iter().map(usize::to_string).collect();
        writeln!(
            w,
            "{},{:?},{:?},{},{:?}",
            r.iter,
            r.objective,
            r.rel_error,
            inner.join(";"),
            r.elapsed_s
        )?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct FitSummary<'a> {
    stop: crate::driver::StopReason,
    iterations: usize,
    objective: f64,
    rel_error: f64,
    violation: f64,
    mu: f64,
    factorizations: usize,
    inner_iterations: usize,
    mttkrp_calls: usize,
    config_hash: &'a str,
}

fn run_fit(a: FitArgs) -> Result<i32> {
    let mut run = RunConfig::from_path(&a.config)?;
    if let Some(out) = a.out {
        run.output.dir = out;
    }
    if let Some(seed) = a.seed {
        run.problem.seed = seed;
    }
    if let Some(rank) = a.rank {
        run.problem.rank = rank;
    }
    if let Some(n) = a.max_iter {
        run.problem.outer_max_iter = n;
    }
    run.problem.deterministic |= a.deterministic;

    let data = run.input.load_dataset(&run.problem.loss)?;
    let cfg = &run.problem;
    let mut hook = progress(run.output.log_every);
    let res: FitResult<f64> = match run.two_stage {
        Some(frac) if !cfg.loss.is_least_squares() => {
            fit_two_stage_with(&data, cfg, frac, None, &mut hook)?
        }
        _ => fit_with(&data, cfg, None, &mut hook)?,
    };

    let out = &run.output.dir;
    fs::create_dir_all(out)?;
    write_file(&out.join("trace.csv"), |w| write_trace_csv(w, &res.trace))?;
    save_factors(
        &res.factors,
        cfg,
        &out.join("factors"),
        run.output.factor_format,
    )?;
    for cp in &res.checkpoints {
        let dir = out.join("checkpoints").join(format!("iter_{:06}", cp.iter));
        save_factors(&cp.factors, cfg, &dir, run.output.factor_format)?;
    }
    let last = res.trace.last();
    let hash = config_hash(cfg);
    write_json(
        &out.join("summary.json"),
        &FitSummary {
            stop: res.stop,
            iterations: res.trace.len(),
            objective: last.map_or(f64::NAN, |r| r.objective),
            rel_error: last.map_or(f64::NAN, |r| r.rel_error),
            violation: last.map_or(f64::NAN, |r| r.violation),
            mu: res.mu,
            factorizations: res.counters.factorizations,
            inner_iterations: res.counters.inner_iterations,
            mttkrp_calls: res.counters.mttkrp_calls,
            config_hash: &hash,
        },
    )?;
    Ok(if res.converged() {
        EXIT_CONVERGED
    } else {
        EXIT_MAX_ITER
    })
}

#[derive(Serialize)]
struct EvalReport {
    objective: f64,
    loss: f64,
    reg: f64,
    violation: f64,
    rel_error: f64,
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let run = RunConfig::from_path(&a.config)?;
    let data = run.input.load_dataset(&run.problem.loss)?;
    let factors = load_factors(&a.factors)?;
    crate::tensor::check_conformable(data.dims(), &factors)?;
    let obj = objective(&data, &factors, &run.problem)?;
    let observed = run.problem.loss.is_missing()
        || (data.mask().is_some() && !run.problem.loss.is_least_squares());
    let report = EvalReport {
        objective: obj.total,
        loss: obj.loss,
        reg: obj.reg,
        violation: obj.violation,
        rel_error: relative_error(&data.tensor, &factors, data.mask(), observed)?,
    };
    match a.out {
        Some(p) => write_json(&p, &report),
        None => {
            let text =
                serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        dims: a.dims,
        k_true: a.rank,
        sparsify: a.sparsify,
        noise_variance: a.noise_variance,
        seed: a.seed,
        nonneg: !a.signed,
    };
    let syn = gen_synthetic(&spec)?;
    fs::create_dir_all(&a.out)?;
    let ext = match a.format {
        TensorFormat::Coo => "coo",
        TensorFormat::MatrixMarket => "mtx",
        TensorFormat::DenseBinary => "bin",
    };
    let data = TensorData::Dense(syn.data);
    save_tensor(&data, &a.out.join(format!("data.{ext}")), a.format)?;
    let mut cfg = crate::driver::ProblemConfig::new(spec.k_true);
    cfg.seed = spec.seed;
    save_factors(
        &syn.factors,
        &cfg,
        &a.out.join("truth"),
        FactorFormat::MatrixMarket,
    )?;
    #[derive(Serialize)]
    struct SynthInfo<'a> {
        spec: &'a SynthSpec,
        noise_norm: f64,
        data_norm: f64,
    }
    write_json(
        &a.out.join("synth.json"),
        &SynthInfo {
            spec: &spec,
            noise_norm: syn.noise_norm,
            data_norm: data.norm_sq().sqrt(),
        },
    )
}

fn run_complete(a: HarnessArgs) -> Result<()> {
    let mut run = CompletionRunConfig::from_path(&a.config)?;
    if let Some(out) = a.out {
        run.output.dir = out;
    }
    if let Some(seed) = a.seed {
        run.split.seed = seed;
    }
    let data = match run.input.load()? {
        TensorData::Sparse(s) => s,
        TensorData::Dense(d) => crate::tensor::SparseTensor::from_dense(&d),
    };
    let report = run_completion_cv(&data, &run.split, &run.grid, &run.clamp)?;
    fs::create_dir_all(&run.output.dir)?;
    write_file(&run.output.dir.join("mae.csv"), |w| {
        write_mae_csv(w, &report)
    })?;
    if let Some((lo, hi)) = report.clamp {
        eprintln!("predictions clamped to [{lo}, {hi}]");
    }
    for m in &report.means {
        println!(
            "{}: train MAE {:.6}, test MAE {:.6}",
            m.config, m.train_mae, m.test_mae
        );
    }
    Ok(())
}

fn run_dict(a: HarnessArgs) -> Result<()> {
    let mut run = DictRunConfig::from_path(&a.config)?;
    if let Some(out) = a.out {
        run.output.dir = out;
    }
    if let Some(seed) = a.seed {
        run.dict.seed = seed;
    }
    let y: Array2<f64> = match run.input.load()? {
        TensorData::Dense(d) if d.order() == 2 => d.to_matrix()?,
        TensorData::Sparse(s) if s.order() == 2 => s.to_dense()?.to_matrix()?,
        t => {
            return Err(Error::InvalidTensor(format!(
                "patches must form a matrix, got a {}-way tensor",
                t.order()
            )))
        }
    };
    let res = run_dictlearn(&y, &run.dict, None, &mut progress(run.output.log_every))?;
    let out = &run.output.dir;
    fs::create_dir_all(out)?;
    write_file(&out.join("dictionary.mtx"), |w| {
        write_matrix_market_array(w, res.d.view())
    })?;
    write_file(&out.join("codes.mtx"), |w| {
        write_matrix_market_array(w, res.s.view())
    })?;
    write_file(&out.join("trace.csv"), |w| write_trace_csv(w, &res.trace))?;
    write_json(&out.join("stats.json"), &res.stats)
}
