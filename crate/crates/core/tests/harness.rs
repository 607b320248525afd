mod common;

use std::collections::BTreeSet;

use common::*;
use factorforge::harness::{
    completion_problem, gen_synthetic, mae, run_completion_cv, run_dictlearn, split_folds,
    ClampSpec, DictSpec, SplitSpec, SynthSpec,
};
use factorforge::io::GridPoint;
use factorforge::prox::RegularizerSpec;
use factorforge::{fit, ProblemConfig, SparseTensor};
use ndarray::Array2;
use rand::Rng;

fn observed(y: &Array2<f64>) -> SparseTensor<f64> {
    let entries = y
        .indexed_iter()
        .map(|((i, j), &v)| (vec![i, j], v))
        .collect();
    SparseTensor::new(vec![y.nrows(), y.ncols()], entries).unwrap()
}

fn grid(problem: ProblemConfig) -> Vec<GridPoint> {
    vec![GridPoint {
        name: "base".into(),
        problem,
        two_stage: None,
    }]
}

#[test]
fn fully_observed_low_rank_is_recovered() {
    let mut r = rng(1);
    let w = random_matrix(&mut r, 20, 2).mapv(f64::abs);
    let h = random_matrix(&mut r, 15, 2).mapv(f64::abs);
    let data = observed(&w.dot(&h.t()));
    let mut point = ProblemConfig::new(2);
    point.regs = vec![RegularizerSpec::Nonneg; 2];
    point.outer_max_iter = 2000;
    point.outer_tol = 1e-12;
    point.seed = 2;
    let cfg = completion_problem(&point, false).unwrap();
    let res = fit(&data.clone().into(), &cfg).unwrap();
    let err = mae(&res.factors, &data, None);
    assert!(err <= 1e-4, "mae {err}");
}

#[test]
fn bias_columns_fit_a_constant_exactly() {
    let data = observed(&Array2::from_elem((12, 10), 3.0));
    let split = SplitSpec {
        bias: true,
        ..SplitSpec::default()
    };
    let mut point = ProblemConfig::new(2);
    point.outer_max_iter = 300;
    point.seed = 3;
    let report = run_completion_cv(&data, &split, &grid(point), &ClampSpec::Off).unwrap();
    for row in &report.rows {
        assert!(row.train_mae <= 1e-8, "{row:?}");
        assert!(row.test_mae <= 1e-8, "{row:?}");
    }
}

#[test]
fn held_out_error_beats_the_zero_model() {
    let mut spec = SynthSpec::new(vec![100, 120], 4);
    spec.sparsify = 0.0;
    spec.noise_variance = 1e-2;
    spec.seed = 4;
    let data = SparseTensor::from_dense(&gen_synthetic(&spec).unwrap().data);
    let split = SplitSpec {
        folds: 2,
        seed: 5,
        ..SplitSpec::default()
    };
    let mut point = ProblemConfig::new(4);
    point.regs = vec![RegularizerSpec::Nonneg; 2];
    point.outer_max_iter = 100;
    point.deterministic = true;
    let report = run_completion_cv(&data, &split, &grid(point), &ClampSpec::Off).unwrap();
    let folds = split_folds(&data, &split).unwrap();
    for (row, fold) in report.rows.iter().zip(&folds) {
        let zero = fold.test.values().iter().map(|v| v.abs()).sum::<f64>() / fold.test.nnz() as f64;
        assert!(row.test_mae < zero, "{} vs {zero}", row.test_mae);
    }
}

#[test]
fn folds_partition_the_observations() {
    let mut r = rng(6);
    let entries: Vec<(Vec<usize>, f64)> = (0..30)
        .flat_map(|i| (0..7).map(move |j| vec![i, j]))
        .filter(|_| r.random_bool(0.6))
        .map(|idx| (idx, 1.0))
        .collect();
    let data = SparseTensor::new(vec![30, 7], entries).unwrap();
    let split = SplitSpec {
        seed: 7,
        ..SplitSpec::default()
    };
    let all: BTreeSet<Vec<usize>> = data.iter().map(|(i, _)| i.to_vec()).collect();
    let mut tested = BTreeSet::new();
    for fold in split_folds(&data, &split).unwrap() {
        let train: BTreeSet<Vec<usize>> = fold.train.iter().map(|(i, _)| i.to_vec()).collect();
        let test: BTreeSet<Vec<usize>> = fold.test.iter().map(|(i, _)| i.to_vec()).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(&train | &test, all);
        tested.extend(test);
    }
    assert_eq!(tested, all);
}

#[test]
fn atoms_stay_in_the_unit_ball() {
    let mut r = rng(8);
    let y = random_matrix(&mut r, 16, 60);
    let mut spec = DictSpec::new(24, 0.1);
    spec.iters = 40;
    spec.seed = 9;
    let mut worst: f64 = 0.0;
    let res = run_dictlearn(&y, &spec, None, &mut |trace| {
        worst = worst.max(trace.last().unwrap().violation);
    })
    .unwrap();
    assert!(worst <= 1e-12, "violation {worst}");
    for col in res.d.columns() {
        assert!(col.dot(&col).sqrt() <= 1.0 + 1e-12);
    }
    assert!(res.trace.iter().all(|t| t.violation <= 1e-12));
}

#[test]
fn synthetic_data_is_seeded() {
    let mut spec = SynthSpec::new(vec![6, 5, 4], 2);
    spec.seed = 10;
    let a = gen_synthetic(&spec).unwrap();
    let b = gen_synthetic(&spec).unwrap();
    assert_eq!(a.data, b.data);
    assert_eq!(a.factors, b.factors);
    spec.seed = 11;
    assert_ne!(gen_synthetic(&spec).unwrap().data, a.data);
}
