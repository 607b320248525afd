mod common;

use common::*;
use factorforge::loss::{loss_scalar, y_update};
use factorforge::prox::{prox_apply, second_difference, violation, RegularizerSpec, SimplexAxis};
use factorforge::{LossSpec, MaskSource};
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn every_kind() -> Vec<RegularizerSpec> {
    vec![
        RegularizerSpec::None,
        RegularizerSpec::Nonneg,
        RegularizerSpec::Box { lo: -0.25, hi: 0.5 },
        RegularizerSpec::L1 { lambda: 0.3 },
        RegularizerSpec::Simplex {
            axis: SimplexAxis::Rows,
        },
        RegularizerSpec::Simplex {
            axis: SimplexAxis::Columns,
        },
        RegularizerSpec::Smooth { lambda: 0.7 },
        RegularizerSpec::Tikhonov { lambda: 1.3 },
        RegularizerSpec::UnitNormColumns,
        RegularizerSpec::NonnegComposed {
            inner: Box::new(RegularizerSpec::L1 { lambda: 0.2 }),
        },
        RegularizerSpec::FixedOnes {
            columns: vec![0],
            inner: Box::new(RegularizerSpec::Nonneg),
        },
    ]
}

fn frob(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn matrix() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=7, 1usize..=4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_is_nonexpansive((n, k, seed) in matrix(), rho in 0.05f64..20.0) {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, n, k) * 3.0;
        let y = random_matrix(&mut r, n, k) * 3.0;
        for spec in every_kind() {
            let px = prox_apply(&spec, &x, rho).unwrap();
            let py = prox_apply(&spec, &y, rho).unwrap();
            prop_assert!(frob(&px, &py) <= frob(&x, &y) + 1e-9, "{spec:?}");
        }
    }

    #[test]
    fn feasible_points_are_fixed((n, k, seed) in matrix(), rho in 0.05f64..20.0) {
        let mut r = rng(seed);
        let raw = random_matrix(&mut r, n, k);
        let kinds = [
            RegularizerSpec::Nonneg,
            RegularizerSpec::Box { lo: -1.0, hi: 1.0 },
            RegularizerSpec::Simplex { axis: SimplexAxis::Rows },
            RegularizerSpec::Simplex { axis: SimplexAxis::Columns },
            RegularizerSpec::UnitNormColumns,
        ];
        for spec in kinds {
            // Any projection output is feasible; a second pass must not move it.
            let feasible = prox_apply(&spec, &raw, 1.0).unwrap();
            prop_assert_eq!(&prox_apply(&spec, &feasible, rho).unwrap(), &feasible);
            prop_assert!(violation(&spec, &feasible) <= 1e-12);
        }
    }

    #[test]
    fn differentiable_kinds_are_stationary((n, k, seed) in matrix(), rho in 0.05f64..20.0, lambda in 0.0f64..5.0) {
        let mut r = rng(seed);
        let hbar = random_matrix(&mut r, n, k);
        let h = prox_apply(&RegularizerSpec::Tikhonov { lambda }, &hbar, rho).unwrap();
        let resid = &h * lambda + (&h - &hbar) * rho;
        prop_assert!(resid.iter().all(|v| v.abs() <= 1e-10));

        let h = prox_apply(&RegularizerSpec::Smooth { lambda }, &hbar, rho).unwrap();
        // The second-difference operator is symmetric, so TᵀT·H = T(T·H).
        let resid = second_difference(&second_difference(&h)) * lambda + (&h - &hbar) * rho;
        prop_assert!(resid.iter().all(|v| v.abs() <= 1e-10 * (1.0 + lambda)));
    }

    #[test]
    fn simplex_slices_sum_to_one((n, k, seed) in matrix()) {
        let mut r = rng(seed);
        let hbar = random_matrix(&mut r, n, k) * 4.0;
        for (axis, lanes) in [(SimplexAxis::Rows, Axis(1)), (SimplexAxis::Columns, Axis(0))] {
            let h = prox_apply(&RegularizerSpec::Simplex { axis }, &hbar, 1.0).unwrap();
            prop_assert!(h.iter().all(|&v| v >= 0.0));
            for lane in h.lanes(lanes) {
                prop_assert!((lane.sum() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn y_update_is_stationary(
        y in prop::collection::vec(0.0f64..5.0, 1..40),
        shift in prop::collection::vec(-6.0f64..6.0, 40),
        lambda in 0.1f64..3.0,
    ) {
        let ybar: Vec<f64> = y.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let losses = [
            LossSpec::LeastSquares,
            LossSpec::Missing { mask_source: MaskSource::UnlistedEntries },
            LossSpec::L1,
            LossSpec::Huber { lambda },
            LossSpec::Kl,
        ];
        for loss in losses {
            let out = y_update(&loss, &y, &ybar, None).unwrap();
            for ((&yi, &bi), &ti) in y.iter().zip(&ybar).zip(&out) {
                // Subgradient of l(y − ỹ) + ½(ỹ − ȳ)² must contain zero.
                let (lo, hi) = loss_subgradient(&loss, yi, ti);
                let g = ti - bi;
                prop_assert!(g + lo <= 1e-9 && g + hi >= -1e-9, "{loss:?} y={yi} ybar={bi} out={ti}");
                if matches!(loss, LossSpec::Kl) && yi > 0.0 {
                    prop_assert!(ti > 0.0);
                }
            }
        }
    }

    #[test]
    fn unobserved_entries_follow_ybar(
        y in prop::collection::vec(0.0f64..5.0, 1..20),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let ybar: Vec<f64> = y.iter().map(|v| v + rand::Rng::random_range(&mut r, -2.0..2.0)).collect();
        let mask: Vec<bool> = y.iter().map(|_| rand::Rng::random_bool(&mut r, 0.5)).collect();
        for loss in [LossSpec::L1, LossSpec::Kl, LossSpec::Missing { mask_source: MaskSource::UnlistedEntries }] {
            let out = y_update(&loss, &y, &ybar, Some(&mask)).unwrap();
            for i in 0..y.len() {
                if !mask[i] {
                    prop_assert_eq!(out[i], ybar[i]);
                    prop_assert_eq!(loss_scalar(&loss, y[i], out[i], false), 0.0);
                }
            }
        }
    }
}

/// Interval `∂_ỹ l(y − ỹ)` at `ỹ = t`.
fn loss_subgradient(loss: &LossSpec, y: f64, t: f64) -> (f64, f64) {
    let z = y - t;
    match loss {
        LossSpec::LeastSquares | LossSpec::Missing { .. } => (-z, -z),
        LossSpec::L1 => {
            if z.abs() <= 1e-12 {
                (-1.0, 1.0)
            } else {
                (-z.signum(), -z.signum())
            }
        }
        LossSpec::Huber { lambda } => {
            let g = -z.clamp(-lambda, *lambda);
            (g, g)
        }
        LossSpec::Kl => {
            if y == 0.0 {
                if t == 0.0 {
                    // Constraint ỹ ≥ 0 makes the subgradient unbounded below.
                    (f64::NEG_INFINITY, 1.0)
                } else {
                    (1.0, 1.0)
                }
            } else {
                (1.0 - y / t, 1.0 - y / t)
            }
        }
    }
}
