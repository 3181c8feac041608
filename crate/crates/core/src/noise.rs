//! Sensitivity formulas and privacy noise samplers.
//!
//! The high-dimensional Laplace law has density proportional to
//! `exp(-||v||_2 / a)`. Its radius is Gamma(dim, a) distributed (mean
//! `dim * a`) and its direction is uniform on the sphere.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::Result;
use crate::model::{DonorPanel, TargetSeries};
use crate::ridge::{ridge_fit, RidgeSystem};

/// l2 sensitivity of the ridge coefficients to replacing one donor row:
/// `4 t0 sqrt(8 + n) / lambda`.
pub fn sensitivity_f_reg(n: usize, t0: usize, lambda: f64) -> f64 {
    4.0 * t0 as f64 * (8.0 + n as f64).sqrt() / lambda
}

/// l2 sensitivity of the flattened post-period donor block: `2 sqrt(T - t0)`.
pub fn sensitivity_x_post(horizon: usize) -> f64 {
    2.0 * (horizon as f64).sqrt()
}

/// Problem dimensions that determine both sensitivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivitySpec {
    pub n: usize,
    pub t0: usize,
    pub lambda: f64,
    pub horizon: usize,
}

impl SensitivitySpec {
    pub fn coeffs(&self) -> f64 {
        sensitivity_f_reg(self.n, self.t0, self.lambda)
    }

    pub fn post(&self) -> f64 {
        sensitivity_x_post(self.horizon)
    }
}

fn uniform_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let norm: f64 = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Draws `v` with density proportional to `exp(-||v||_2 / scale)` in `dim`
/// dimensions. A zero scale returns the zero vector.
pub fn sample_highdim_laplace<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    assert!(scale >= 0.0, "Laplace scale must be nonnegative, got {scale}");
    if scale == 0.0 || dim == 0 {
        return DVector::zeros(dim);
    }
    let radius: f64 = Gamma::new(dim as f64, scale)
        .expect("shape and scale are positive")
        .sample(rng);
    uniform_direction(dim, rng) * radius
}

/// Draws an `n x horizon` matrix with density proportional to
/// `exp(-||W||_F / scale)`: the flattened high-dimensional Laplace law.
pub fn sample_matrix_laplace<R: Rng + ?Sized>(
    n: usize,
    horizon: usize,
    scale: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let flat = sample_highdim_laplace(n * horizon, scale, rng);
    DMatrix::from_vec(n, horizon, flat.data.into())
}

/// Draws from `N(0, stddev^2 I_dim)`.
pub fn sample_gaussian_vector<R: Rng + ?Sized>(dim: usize, stddev: f64, rng: &mut R) -> DVector<f64> {
    assert!(stddev >= 0.0, "Gaussian stddev must be nonnegative, got {stddev}");
    if stddev == 0.0 {
        return DVector::zeros(dim);
    }
    DVector::from_fn(dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * stddev
    })
}

/// Outcome of [`empirical_sensitivity_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub max_gap: f64,
    pub bound: f64,
    pub trials: usize,
}

impl ProbeOutcome {
    pub fn within_bound(&self) -> bool {
        self.max_gap <= self.bound
    }
}

fn bounded_entry<R: Rng + ?Sized>(rng: &mut R, extreme: bool) -> f64 {
    if extreme {
        if rng.random_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    } else {
        rng.random_range(-1.0..=1.0)
    }
}

/// Fits ridge on random bounded neighboring databases and reports the largest
/// observed coefficient gap `||f - f'||_2`. Half of the trials draw entries
/// from `{-1, 1}` to stress the boundary of the data domain.
pub fn empirical_sensitivity_probe<R: Rng + ?Sized>(
    n: usize,
    t0: usize,
    lambda: f64,
    trials: usize,
    rng: &mut R,
) -> Result<ProbeOutcome> {
    let mut max_gap = 0.0_f64;
    for trial in 0..trials {
        let extreme = trial % 2 == 1;
        let x = DMatrix::from_fn(n, t0, |_, _| bounded_entry(rng, extreme));
        let y = DVector::from_fn(t0, |_, _| bounded_entry(rng, extreme));
        let row = rng.random_range(0..n);
        let mut x_nb = x.clone();
        for t in 0..t0 {
            x_nb[(row, t)] = bounded_entry(rng, extreme);
        }
        let f = ridge_fit(&x, &y, lambda)?.coeffs;
        let f_nb = ridge_fit(&x_nb, &y, lambda)?.coeffs;
        max_gap = max_gap.max((f - f_nb).norm());
    }
    Ok(ProbeOutcome {
        max_gap,
        bound: sensitivity_f_reg(n, t0, lambda),
        trials,
    })
}

/// Coefficient gap between two neighboring databases.
pub fn neighbor_gap(
    x_pre: &DMatrix<f64>,
    x_pre_neighbor: &DMatrix<f64>,
    y_pre: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    let f = RidgeSystem::new(x_pre, y_pre)?.factor(lambda)?.solve();
    let f_nb = RidgeSystem::new(x_pre_neighbor, y_pre)?.factor(lambda)?.solve();
    Ok((f - f_nb).norm())
}

/// Neighboring pair on which the ridge coefficients move by order `sqrt(n)`.
///
/// `t0 = n`, `y` is all ones, donor 0 is all ones (all zeros in the
/// neighbor) and every other entry is `1/n`. With `lambda = 2` the
/// effective ridge coefficient is 1. One post-intervention period with the
/// same pattern is appended so the panels are complete.
#[derive(Debug, Clone)]
pub struct Lemma5Fixture {
    pub panel: DonorPanel,
    pub neighbor: DonorPanel,
    pub target: TargetSeries,
    pub lambda: f64,
    pub expected: DVector<f64>,
    pub expected_neighbor: DVector<f64>,
}

impl Lemma5Fixture {
    /// Closed-form `||f - f'||_2` for the fixture.
    pub fn expected_gap(&self) -> f64 {
        (&self.expected - &self.expected_neighbor).norm()
    }
}

pub fn lemma5_fixture(n: usize) -> Result<Lemma5Fixture> {
    if n < 2 {
        return Err(crate::error::DpscError::InvalidArgument(format!(
            "fixture needs at least two donors, got {n}"
        )));
    }
    let nf = n as f64;
    let periods = n + 1;
    let mut x = DMatrix::from_element(n, periods, 1.0 / nf);
    x.row_mut(0).fill(1.0);
    let mut x_nb = x.clone();
    x_nb.row_mut(0).fill(0.0);
    let denom = nf * nf + 2.0 * nf - 1.0;
    let mut expected = DVector::from_element(n, nf / denom);
    expected[0] = nf * nf / denom;
    let mut expected_neighbor = DVector::from_element(n, nf / (2.0 * nf - 1.0));
    expected_neighbor[0] = 0.0;
    Ok(Lemma5Fixture {
        panel: DonorPanel::new(x, n)?,
        neighbor: DonorPanel::new(x_nb, n)?,
        target: TargetSeries::new(DVector::from_element(periods, 1.0), n)?,
        lambda: 2.0,
        expected,
        expected_neighbor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::split;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sensitivity_plug_ins() {
        assert_eq!(sensitivity_f_reg(8, 1, 1.0), 16.0);
        assert!((sensitivity_f_reg(10, 10, 10.0) - 4.0 * 18f64.sqrt()).abs() < 1e-12);
        assert_eq!(sensitivity_f_reg(7, 3, 4.0), 2.0 * sensitivity_f_reg(7, 3, 8.0));
        assert_eq!(sensitivity_x_post(1), 2.0);
        assert_eq!(sensitivity_x_post(4), 4.0);
        assert!((sensitivity_x_post(3) - 2.0 * 3f64.sqrt()).abs() < 1e-15);
        let spec = SensitivitySpec { n: 8, t0: 1, lambda: 1.0, horizon: 4 };
        assert_eq!((spec.coeffs(), spec.post()), (16.0, 4.0));
    }

    #[test]
    fn zero_scale_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_highdim_laplace(7, 0.0, &mut rng), DVector::zeros(7));
        assert_eq!(sample_matrix_laplace(2, 3, 0.0, &mut rng), DMatrix::zeros(2, 3));
        assert_eq!(sample_gaussian_vector(4, 0.0, &mut rng), DVector::zeros(4));
    }

    #[test]
    fn seeded_draws_are_identical() {
        let a = sample_highdim_laplace(5, 1.5, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_highdim_laplace(5, 1.5, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        let g1 = sample_gaussian_vector(5, 2.0, &mut ChaCha8Rng::seed_from_u64(9));
        let g2 = sample_gaussian_vector(5, 2.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(g1, g2);
    }

    #[test]
    fn matrix_sampler_is_reshaped_vector_sampler() {
        let m = sample_matrix_laplace(3, 4, 0.7, &mut ChaCha8Rng::seed_from_u64(5));
        let v = sample_highdim_laplace(12, 0.7, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(m.as_slice(), v.as_slice());
        assert!((m.norm() - v.norm()).abs() < 1e-15);
    }

    #[test]
    fn identical_neighbors_have_zero_gap() {
        let x = DMatrix::from_element(3, 4, 0.5);
        let y = DVector::from_element(4, 1.0);
        assert_eq!(neighbor_gap(&x, &x, &y, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn probe_respects_bound_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = empirical_sensitivity_probe(4, 6, 2.0, 200, &mut rng).unwrap();
        assert!(out.within_bound(), "{out:?}");
        assert!(out.max_gap > 0.0);
    }

    #[test]
    fn fixture_matches_closed_form() {
        let fx = lemma5_fixture(3).unwrap();
        let expected = [9.0 / 14.0, 3.0 / 14.0, 3.0 / 14.0];
        let expected_nb = [0.0, 0.6, 0.6];
        for k in 0..3 {
            assert!((fx.expected[k] - expected[k]).abs() < 1e-15);
            assert!((fx.expected_neighbor[k] - expected_nb[k]).abs() < 1e-15);
        }
        let (x_pre, _) = split(&fx.panel);
        let f = ridge_fit(&x_pre, &fx.target.pre(), fx.lambda).unwrap().coeffs;
        assert!((f - &fx.expected).amax() < 1e-12);
        assert!((lemma5_fixture(10).unwrap().expected[0] - 100.0 / 119.0).abs() < 1e-15);
        assert!(lemma5_fixture(1).is_err());
    }
}
