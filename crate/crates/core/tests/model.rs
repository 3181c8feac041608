use dpsc_core::{rmse_post, split, validate_bounds, DonorPanel, TargetSeries};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn split_then_concat_is_identity(n in 1usize..6, t0 in 1usize..10, h in 1usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, t0 + h, |_, _| rng.random_range(-5.0..5.0));
        let panel = DonorPanel::new(x.clone(), t0).unwrap();
        let (pre, post) = split(&panel);
        prop_assert_eq!(pre.ncols(), t0);
        prop_assert_eq!(post.ncols(), h);
        let mut joined = DMatrix::zeros(n, t0 + h);
        joined.columns_mut(0, t0).copy_from(&pre);
        joined.columns_mut(t0, h).copy_from(&post);
        prop_assert_eq!(joined, x);
    }

    #[test]
    fn rmse_scales_and_vanishes(h in 1usize..8, k in 0.0f64..10.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DVector::from_fn(h, |_, _| rng.random_range(-3.0..3.0));
        let b = DVector::from_fn(h, |_, _| rng.random_range(-3.0..3.0));
        prop_assert_eq!(rmse_post(&a, &a).unwrap(), 0.0);
        let base = rmse_post(&a, &b).unwrap();
        let scaled = rmse_post(&(&a * k), &(&b * k)).unwrap();
        prop_assert!((scaled - k * base).abs() <= 1e-12 * (1.0 + k * base));
        prop_assert!((base - (&a - &b).norm() / (h as f64).sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn bounds_flag_matches_entries(n in 1usize..5, t in 2usize..8, spread in 0.5f64..2.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, t, |_, _| rng.random_range(-spread..spread));
        let y = DVector::from_fn(t, |_, _| rng.random_range(-spread..spread));
        let inside = x.amax() <= 1.0 && y.amax() <= 1.0;
        let report = validate_bounds(&DonorPanel::new(x, 1).unwrap(), &TargetSeries::new(y, 1).unwrap());
        prop_assert_eq!(report.bounded(), inside);
    }
}
