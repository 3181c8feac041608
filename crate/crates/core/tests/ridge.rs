mod common;

use common::{ridge_by_descent, ridge_by_elimination};
use dpsc_core::datagen::{generate_linear_panel, LatentModelSpec, TargetSlope};
use dpsc_core::noise::lemma5_fixture;
use dpsc_core::ridge::{ridge_gradient, ridge_loss};
use dpsc_core::{project, ridge_fit, rmse_post, sc_fit_predict, split};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_matches_descent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let n = rng.random_range(1..=10);
        let t0 = rng.random_range(1..=20);
        let lambda = [0.1, 1.0, 10.0][k % 3];
        let x = DMatrix::from_fn(n, t0, |_, _| rng.random_range(-1.0..=1.0));
        let y = DVector::from_fn(t0, |_, _| rng.random_range(-1.0..=1.0));
        let fit = ridge_fit(&x, &y, lambda).unwrap();
        let oracle = ridge_by_descent(&x, &y, lambda);
        for i in 0..n {
            worst = worst.max((fit.coeffs[i] - oracle[i]).abs());
        }
    }
    assert!(worst <= 1e-8, "max coordinate error {worst:e}");
}

#[test]
fn lemma5_fixture_reproduces_closed_form() {
    for n in [3usize, 10, 100] {
        let fx = lemma5_fixture(n).unwrap();
        let nf = n as f64;
        let (x, _) = split(&fx.panel);
        let (x_nb, _) = split(&fx.neighbor);
        let y = fx.target.pre();
        let f = ridge_fit(&x, &y, fx.lambda).unwrap().coeffs;
        let f_nb = ridge_fit(&x_nb, &y, fx.lambda).unwrap().coeffs;
        let by_hand = ridge_by_elimination(&x, &y, 1.0);
        let by_hand_nb = ridge_by_elimination(&x_nb, &y, 1.0);
        assert!((f[0] - nf * nf / (nf * nf + 2.0 * nf - 1.0)).abs() <= 1e-9);
        for i in 1..n {
            assert!((f_nb[i] - nf / (2.0 * nf - 1.0)).abs() <= 1e-9, "n={n} i={i}");
        }
        for i in 0..n {
            assert!((f[i] - by_hand[i]).abs() <= 1e-9);
            assert!((f_nb[i] - by_hand_nb[i]).abs() <= 1e-9);
        }
        assert!((f - &fx.expected).amax() <= 1e-9);
        assert!((f_nb - &fx.expected_neighbor).amax() <= 1e-9);
    }
}

#[test]
fn lemma5_gap_grows_like_sqrt_n() {
    let gap = |n| {
        let fx = lemma5_fixture(n).unwrap();
        let (x, _) = split(&fx.panel);
        let (x_nb, _) = split(&fx.neighbor);
        let y = fx.target.pre();
        (ridge_fit(&x, &y, 2.0).unwrap().coeffs - ridge_fit(&x_nb, &y, 2.0).unwrap().coeffs).norm()
    };
    let ratio = gap(100) / gap(25);
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn noiseless_rank_one_is_recovered() {
    let spec = LatentModelSpec { noise_var: 0.0, target_slope: TargetSlope::DonorMean, ..Default::default() };
    let data = generate_linear_panel(10, 10, 13, &spec, 8).unwrap();
    let (_, pred) = sc_fit_predict(&data.panel, &data.target, 1e-8).unwrap();
    let rmse = rmse_post(&pred, &data.target.signal_post().unwrap()).unwrap();
    assert!(rmse <= 1e-6, "rmse {rmse:e}");
}

fn instance(n: usize, t0: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        DMatrix::from_fn(n, t0, |_, _| rng.random_range(-1.0..=1.0)),
        DVector::from_fn(t0, |_, _| rng.random_range(-1.0..=1.0)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_is_the_stationary_minimum(n in 1usize..8, t0 in 1usize..15, lambda in 0.05f64..50.0, seed: u64) {
        let (x, y) = instance(n, t0, seed);
        let f = ridge_fit(&x, &y, lambda).unwrap().coeffs;
        let g = ridge_gradient(&x, &y, &f, lambda, None);
        prop_assert!(g.norm() <= 1e-10 * (1.0 + (&x * &y).norm()));
        let base = ridge_loss(&x, &y, &f, lambda, None);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let step = DVector::from_fn(n, |_, _| rng.random_range(-1e-3..1e-3));
        prop_assert!(ridge_loss(&x, &y, &(&f + step), lambda, None) >= base - 1e-14);
    }

    #[test]
    fn coefficients_shrink_with_lambda(n in 1usize..8, t0 in 1usize..15, l in 0.1f64..20.0, seed: u64) {
        let (x, y) = instance(n, t0, seed);
        let small = ridge_fit(&x, &y, l).unwrap().coeffs.norm();
        let large = ridge_fit(&x, &y, 3.0 * l).unwrap().coeffs.norm();
        prop_assert!(large <= small * (1.0 + 1e-12));
        prop_assert!(small <= 2.0 * (&x * &y).norm() / l * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_linear_in_coefficients(n in 1usize..6, h in 1usize..5, a in -3.0f64..3.0, seed: u64) {
        let (x, _) = instance(n, h, seed);
        let (f, _) = instance(n, 1, seed ^ 7);
        let fit = dpsc_core::FitResult::nonprivate(f.column(0).into_owned() * a, 1.0);
        let unit = dpsc_core::FitResult::nonprivate(f.column(0).into_owned(), 1.0);
        let lhs = project(&x, &fit).unwrap();
        let rhs = project(&x, &unit).unwrap() * a;
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }
}
