mod common;

use common::*;
use factorforge::admm::{
    admm_general, admm_ls, build_cache, solve_ls_system, AdmmSettings, CacheOptions, Counters,
    LemmaMode,
};
use factorforge::loss::{loss_value, v_update, SplitState};
use factorforge::prox::RegularizerSpec;
use factorforge::tensor::{full, KernelOptions};
use factorforge::{Dataset, DenseTensor, LossSpec, MaskSource, SparseTensor};
use nalgebra::DMatrix;
use ndarray::{array, Array2};

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `Y = W·H_trueᵀ` as a two-mode dataset.
fn matrix_problem(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
) -> (Dataset<f64>, Array2<f64>, Array2<f64>) {
    let mut r = rng(seed);
    let w = random_matrix(&mut r, m, k);
    let h = random_matrix(&mut r, n, k);
    let y = DenseTensor::from_matrix(&w.dot(&h.t())).unwrap();
    (y.into(), w, h)
}

fn settings(eps: f64, max_iter: usize) -> AdmmSettings {
    AdmmSettings { eps, max_iter }
}

#[test]
fn solve_inverts_the_shifted_gram() {
    let (data, w, h) = matrix_problem(12, 7, 4, 1);
    let mut counters = Counters::default();
    let factors = vec![w, h];
    let cache = build_cache(
        &factors,
        1,
        &data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let l = cache.l();
    let lhs = l.dot(&l.t());
    let mut target = cache.g.clone();
    target.diag_mut().mapv_inplace(|v| v + cache.shift());
    assert!(max_abs_diff(&lhs, &target) <= 1e-10);

    let x = random_matrix(&mut rng(2), 4, 5);
    let back = solve_ls_system(&cache, &target.dot(&x)).unwrap();
    assert!(max_abs_diff(&back, &x) <= 1e-9);
}

#[test]
fn lemma_and_cholesky_paths_agree() {
    // W has 3 rows, k = 8: the coding regime.
    let mut r = rng(3);
    let w = random_matrix(&mut r, 3, 8);
    let s = random_matrix(&mut r, 5, 8);
    let data: Dataset<f64> = DenseTensor::from_matrix(&w.dot(&s.t())).unwrap().into();
    let factors = vec![w, s];
    let rhs = random_matrix(&mut r, 8, 5);
    let mut solutions = Vec::new();
    for lemma in [LemmaMode::Never, LemmaMode::Always] {
        let opts = CacheOptions {
            lemma,
            mu: 0.1,
            ..CacheOptions::default()
        };
        let cache = build_cache(
            &factors,
            1,
            &data,
            &LossSpec::LeastSquares,
            &opts,
            &mut Counters::default(),
        )
        .unwrap();
        assert_eq!(cache.lemma_mode(), lemma == LemmaMode::Always);
        solutions.push(solve_ls_system(&cache, &rhs).unwrap());
    }
    assert!(max_abs_diff(&solutions[0], &solutions[1]) <= 1e-8);
}

#[test]
fn unconstrained_ls_reaches_the_normal_equations() {
    let (data, w, h_true) = matrix_problem(15, 9, 3, 4);
    let mut counters = Counters::default();
    let factors = vec![w.clone(), Array2::zeros(h_true.dim())];
    let cache = build_cache(
        &factors,
        1,
        &data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let mut h = random_matrix(&mut rng(5), 9, 3);
    let mut u = Array2::zeros(h.dim());
    admm_ls(
        &cache,
        &mut h,
        &mut u,
        &RegularizerSpec::None,
        &settings(1e-14, 500),
        None,
        &mut counters,
    )
    .unwrap();
    assert_eq!(counters.factorizations, 1);

    // Normal equations solved independently.
    let wn = to_na(&w);
    let y = wn.clone() * to_na(&h_true).transpose();
    let oracle = (wn.transpose() * &wn)
        .lu()
        .solve(&(wn.transpose() * &y))
        .unwrap()
        .transpose();
    let got = to_na(&h);
    assert!((got - &oracle).norm() <= 1e-6 * oracle.norm());
    let fit = w.dot(&h.t());
    let y_arr = w.dot(&h_true.t());
    assert!(frob_rel(&fit, &y_arr) <= 1e-6);
}

fn frob_rel(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    (num / den).sqrt()
}

#[test]
fn unconstrained_iterates_contract_linearly() {
    let (data, w, h_true) = matrix_problem(30, 10, 3, 6);
    let factors = vec![w, Array2::zeros(h_true.dim())];
    let mut counters = Counters::default();
    let cache = build_cache(
        &factors,
        1,
        &data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let mut h = Array2::zeros(h_true.dim());
    let mut u = Array2::zeros(h.dim());
    let mut errors = Vec::new();
    let mut residuals = Vec::new();
    for _ in 0..8 {
        let rep = admm_ls(
            &cache,
            &mut h,
            &mut u,
            &RegularizerSpec::None,
            &settings(1e-300, 1),
            None,
            &mut counters,
        )
        .unwrap();
        residuals.push(rep.r);
        errors.push(frob_rel(&h, &h_true));
    }
    // Without a regularizer the dual stays at zero and so does r.
    assert!(residuals.windows(2).all(|p| p[1] <= p[0]));
    let rates: Vec<f64> = errors.windows(2).map(|p| p[1] / p[0]).collect();
    let worst = rates.iter().copied().fold(0.0, f64::max);
    assert!(worst < 1.0, "{errors:?}");
    assert!(errors[7] <= worst.powi(7) * errors[0] * (1.0 + 1e-9));
    assert_eq!(counters.factorizations, 1);
}

#[test]
fn warm_start_at_the_solution_stops_at_once() {
    let (data, w, h_true) = matrix_problem(20, 6, 2, 7);
    let factors = vec![w, h_true.clone()];
    let mut counters = Counters::default();
    let cache = build_cache(
        &factors,
        1,
        &data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let mut h = h_true.clone();
    // Dual fixed point for the unconstrained problem is zero.
    let mut u = Array2::zeros(h.dim());
    let rep = admm_ls(
        &cache,
        &mut h,
        &mut u,
        &RegularizerSpec::None,
        &settings(0.01, 10),
        None,
        &mut counters,
    )
    .unwrap();
    assert_eq!(rep.iterations, 1, "{rep:?}");
    assert!(rep.s < 0.01);
    assert!(rep.r < 0.01);
}

#[test]
fn nonneg_solution_satisfies_kkt() {
    let mut r = rng(8);
    let w = random_matrix(&mut r, 25, 4).mapv(f64::abs);
    let y = random_matrix(&mut r, 25, 12);
    let data: Dataset<f64> = DenseTensor::from_matrix(&y).unwrap().into();
    let factors = vec![w, Array2::zeros((12, 4))];
    let mut counters = Counters::default();
    let cache = build_cache(
        &factors,
        1,
        &data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let eps = 1e-16;
    let mut h = Array2::zeros((12, 4));
    let mut u = Array2::zeros(h.dim());
    admm_ls(
        &cache,
        &mut h,
        &mut u,
        &RegularizerSpec::Nonneg,
        &settings(eps, 5000),
        None,
        &mut counters,
    )
    .unwrap();
    let f = cache.f.as_ref().unwrap();
    let grad = cache.g.dot(&h.t()) - f;
    let comp: f64 = h
        .iter()
        .zip(grad.t().iter())
        .map(|(&x, &g)| x.min(g).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(h.iter().all(|&v| v >= 0.0));
    // r and s are squared ratios, so the iterate error scales with √eps.
    let g_norm = cache.g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(
        comp <= 10.0 * eps.sqrt() * g_norm * norm,
        "complementarity {comp}"
    );
}

#[test]
fn nonneg_one_column_clamps() {
    let data: Dataset<f64> = DenseTensor::from_matrix(&array![[-1.0], [-1.0]])
        .unwrap()
        .into();
    let factors = vec![array![[1.0], [1.0]], array![[0.5]]];
    let mut counters = Counters::default();
    let cache = build_cache(
        &factors,
        1,
        &data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let mut h = array![[0.5]];
    let mut u = array![[0.0]];
    admm_ls(
        &cache,
        &mut h,
        &mut u,
        &RegularizerSpec::Nonneg,
        &settings(1e-12, 200),
        None,
        &mut counters,
    )
    .unwrap();
    assert!(h[[0, 0]].abs() < 1e-9);
}

fn run_general(
    data: &Dataset<f64>,
    factors: &[Array2<f64>],
    loss: &LossSpec,
    spec: &RegularizerSpec,
    iters: usize,
) -> Array2<f64> {
    let mut counters = Counters::default();
    let opts = CacheOptions::default();
    let cache = build_cache(factors, 1, data, loss, &opts, &mut counters).unwrap();
    let mut split = SplitState::init(data, loss).unwrap();
    let mut h = factors[1].clone();
    let mut u = Array2::zeros(h.dim());
    admm_general(
        &cache,
        data,
        factors,
        1,
        &mut h,
        &mut u,
        &mut split,
        spec,
        loss,
        &settings(1e-300, iters),
        None,
        KernelOptions::default(),
        &mut counters,
    )
    .unwrap();
    h
}

fn run_ls(data: &Dataset<f64>, factors: &[Array2<f64>], spec: &RegularizerSpec) -> Array2<f64> {
    let mut counters = Counters::default();
    let cache = build_cache(
        factors,
        1,
        data,
        &LossSpec::LeastSquares,
        &CacheOptions::default(),
        &mut counters,
    )
    .unwrap();
    let mut h = factors[1].clone();
    let mut u = Array2::zeros(h.dim());
    admm_ls(
        &cache,
        &mut h,
        &mut u,
        spec,
        &settings(1e-300, 3000),
        None,
        &mut counters,
    )
    .unwrap();
    h
}

#[test]
fn general_loss_matches_ls_fixed_point() {
    // 10 × 8, k = 3, noisy so the fixed point is not trivial.
    let mut r = rng(9);
    let w = random_matrix(&mut r, 10, 3);
    let y = w.dot(&random_matrix(&mut r, 8, 3).t()) + random_matrix(&mut r, 10, 8) * 0.1;
    let dense = DenseTensor::from_matrix(&y).unwrap();
    let factors = vec![w, random_matrix(&mut r, 8, 3).mapv(f64::abs)];
    let spec = RegularizerSpec::Nonneg;
    let reference = run_ls(&dense.clone().into(), &factors, &spec);
    let obj = |h: &Array2<f64>| {
        let data: Dataset<f64> = dense.clone().into();
        loss_value(
            &LossSpec::LeastSquares,
            &data,
            &[factors[0].clone(), h.clone()],
        )
        .unwrap()
    };

    // Missing-value loss with every entry listed.
    let sparse_all = SparseTensor::new(
        vec![10, 8],
        all_indices(&[10, 8])
            .into_iter()
            .map(|idx| {
                let v = y[[idx[0], idx[1]]];
                (idx, v)
            })
            .collect(),
    )
    .unwrap();
    let missing = LossSpec::Missing {
        mask_source: MaskSource::UnlistedEntries,
    };
    let h_missing = run_general(&sparse_all.into(), &factors, &missing, &spec, 3000);
    assert!((obj(&h_missing) - obj(&reference)).abs() <= 1e-6);

    // Least squares forced through the general path.
    let h_forced = run_general(
        &dense.clone().into(),
        &factors,
        &LossSpec::LeastSquares,
        &spec,
        3000,
    );
    assert!((obj(&h_forced) - obj(&reference)).abs() <= 1e-6);
}

#[test]
fn zero_inner_iterations_leave_state_alone() {
    let (data, w, h) = matrix_problem(6, 5, 2, 10);
    let factors = vec![w, h.clone()];
    let out = run_general(&data, &factors, &LossSpec::L1, &RegularizerSpec::None, 0);
    assert_eq!(out, h);
}

#[test]
fn l1_fit_ignores_one_outlier() {
    // 4 × 4 rank one with a +10 spike at (1, 2).
    let a = array![[1.0], [2.0], [0.5], [1.5]];
    let b = array![[1.0], [0.5], [2.0], [1.0]];
    let clean = a.dot(&b.t());
    let mut y = clean.clone();
    y[[1, 2]] += 10.0;
    let data: Dataset<f64> = DenseTensor::from_matrix(&y).unwrap().into();
    let mut factors = vec![
        array![[1.0], [1.0], [1.0], [1.0]],
        array![[1.0], [1.0], [1.0], [1.0]],
    ];
    let mut counters = Counters::default();
    for _ in 0..300 {
        for d in 0..2 {
            let cache = build_cache(
                &factors,
                d,
                &data,
                &LossSpec::L1,
                &CacheOptions::default(),
                &mut counters,
            )
            .unwrap();
            let mut split = SplitState::init(&data, &LossSpec::L1).unwrap();
            let mut h = factors[d].clone();
            let mut u = Array2::zeros(h.dim());
            admm_general(
                &cache,
                &data,
                &factors,
                d,
                &mut h,
                &mut u,
                &mut split,
                &RegularizerSpec::None,
                &LossSpec::L1,
                &settings(1e-12, 200),
                None,
                KernelOptions::default(),
                &mut counters,
            )
            .unwrap();
            factors[d] = h;
        }
    }
    let model = full(&factors).unwrap().to_matrix().unwrap();
    assert!((model[[1, 2]] - clean[[1, 2]]).abs() <= 1e-3, "{model:?}");
}

#[test]
fn v_update_fixed_point_and_missing_entries() {
    let mut v = vec![0.3, -0.2];
    let yt = vec![1.0, 2.0];
    v_update(&mut v, &yt, &yt).unwrap();
    assert_eq!(v, vec![0.3, -0.2]);

    // Sparse-structured and dense missing-value states agree.
    let (full_data, w, h) = matrix_problem(6, 5, 2, 11);
    let y = full_data.tensor.to_dense().unwrap();
    let mut keep = rng(12);
    let entries: Vec<(Vec<usize>, f64)> = all_indices(&[6, 5])
        .into_iter()
        .filter(|_| rand::Rng::random_bool(&mut keep, 0.6))
        .map(|idx| {
            let v = y.get(&idx);
            (idx, v)
        })
        .collect();
    let sparse = SparseTensor::new(vec![6, 5], entries).unwrap();
    let mut mask = vec![false; 30];
    let mut masked = DenseTensor::zeros(vec![6, 5]).unwrap();
    for (idx, v) in sparse.iter() {
        mask[masked.linear_index(idx)] = true;
        masked.set(idx, v);
    }
    let missing = LossSpec::Missing {
        mask_source: MaskSource::UnlistedEntries,
    };
    let sparse_data: Dataset<f64> = sparse.into();
    let dense_data = Dataset::dense_with_mask(masked, mask.clone()).unwrap();
    let mut a = SplitState::init(&sparse_data, &missing).unwrap();
    let mut b = SplitState::init_dense(&dense_data).unwrap();
    let model = vec![w * 0.9, h * 1.1];
    for _ in 0..3 {
        a.update(&sparse_data, &missing, &model).unwrap();
        b.update(&dense_data, &missing, &model).unwrap();
    }
    let (ya, va) = a.to_dense(&sparse_data).unwrap();
    let (yb, vb) = b.to_dense(&dense_data).unwrap();
    for lin in 0..30 {
        assert!((ya.values()[lin] - yb.values()[lin]).abs() <= 1e-12);
        assert!((va.values()[lin] - vb.values()[lin]).abs() <= 1e-12);
        if !mask[lin] {
            assert_eq!(vb.values()[lin], 0.0);
        }
    }
}
