//! Synthetic panels: the linear latent model with truncated-Gaussian slopes
//! and noise, and i.i.d. uniform bounded panels for sensitivity probes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DpscError, Result};
use crate::model::{DonorPanel, TargetSeries};

/// How the target's slope relates to the donors'.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum TargetSlope {
    /// Independent draw from the donor slope distribution.
    Independent,
    /// Mean of the donor slopes, so the target is exactly representable.
    DonorMean,
    Fixed(f64),
}

/// Parameters of `M[i,t] = theta_i * t`, `m_t = theta_0 * t` with
/// truncated-Gaussian slopes and observation noise. Variances are those of
/// the Gaussian before truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentModelSpec {
    pub theta_mean: f64,
    pub theta_var: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub noise_var: f64,
    /// Noise is truncated to `[-noise_support, noise_support]`.
    pub noise_support: f64,
    pub target_slope: TargetSlope,
}

impl Default for LatentModelSpec {
    fn default() -> Self {
        Self {
            theta_mean: 4.0,
            theta_var: 1.0,
            theta_lo: 3.0,
            theta_hi: 5.0,
            noise_var: 0.1,
            noise_support: 1.0,
            target_slope: TargetSlope::Independent,
        }
    }
}

impl LatentModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_lo < self.theta_hi) {
            return Err(DpscError::InvalidArgument(format!(
                "slope support [{}, {}] is empty",
                self.theta_lo, self.theta_hi
            )));
        }
        if !(self.theta_var > 0.0) || !(self.noise_var >= 0.0) || !(self.noise_support > 0.0) {
            return Err(DpscError::InvalidArgument(
                "theta_var and noise_support must be positive, noise_var nonnegative".into(),
            ));
        }
        Ok(())
    }
}

// Complementary error function, fractional error below 1.2e-7 everywhere
// (Chebyshev fit from Numerical Recipes).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let ans = t * poly.exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Standard normal mass of `[a, b]`, computed on the tail side to avoid
/// cancellation.
fn normal_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        1.0 - 0.5 * (erfc(-a / s) + erfc(b / s))
    }
}

/// Draw from the standard normal conditioned on `[a, b]` with `0 <= a < b`.
fn std_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a < 1.0 / (a + 1.0) {
        // Uniform proposal, accept with exp((a^2 - z^2) / 2).
        loop {
            let z = rng.random_range(a..=b);
            if rng.random::<f64>() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    // Translated exponential proposal.
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z > b {
            continue;
        }
        if rng.random::<f64>() <= (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}

/// Draw from `N(mean, var)` conditioned on `[lo, hi]`, by rejection.
///
/// Wide regions use plain normal rejection. Narrow or far-tail regions switch
/// to uniform or translated-exponential proposals, which stay exact.
pub fn truncated_gaussian<R: Rng + ?Sized>(
    mean: f64,
    var: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lo < hi) || !(var > 0.0) {
        return Err(DpscError::InvalidArgument(format!(
            "truncated gaussian needs lo < hi and var > 0, got [{lo}, {hi}], var {var}"
        )));
    }
    let sd = var.sqrt();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let prob = normal_mass(a, b);
    if prob < 1e-12 {
        return Err(DpscError::PathologicalTruncation { lo, hi, prob });
    }
    let z = if prob >= 0.25 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a && z <= b {
                break z;
            }
        }
    } else if a >= 0.0 {
        std_tail(a, b, rng)
    } else if b <= 0.0 {
        -std_tail(-b, -a, rng)
    } else {
        loop {
            let z = rng.random_range(a..=b);
            if rng.random::<f64>() <= (-0.5 * z * z).exp() {
                break z;
            }
        }
    };
    Ok((mean + sd * z).clamp(lo, hi))
}

/// A linear-model dataset with its latent slopes.
#[derive(Debug, Clone)]
pub struct LinearDataset {
    pub panel: DonorPanel,
    pub target: TargetSeries,
    pub thetas: DVector<f64>,
    pub theta0: f64,
}

/// Generates `X = M + Z`, `y = m + z` with `M[i,t] = theta_i t` and
/// `m_t = theta_0 t` for `t = 1..=periods`.
pub fn generate_linear_panel(
    n: usize,
    t0: usize,
    periods: usize,
    spec: &LatentModelSpec,
    seed: u64,
) -> Result<LinearDataset> {
    spec.validate()?;
    if n == 0 || t0 == 0 || t0 >= periods {
        return Err(DpscError::InvalidArgument(format!(
            "need n >= 1 and 1 <= t0 < T, got n={n}, t0={t0}, T={periods}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slope = |rng: &mut ChaCha8Rng| {
        truncated_gaussian(spec.theta_mean, spec.theta_var, spec.theta_lo, spec.theta_hi, rng)
    };
    let mut thetas = DVector::zeros(n);
    for i in 0..n {
        thetas[i] = slope(&mut rng)?;
    }
    let theta0 = match spec.target_slope {
        TargetSlope::Independent => slope(&mut rng)?,
        TargetSlope::DonorMean => thetas.mean(),
        TargetSlope::Fixed(v) => v,
    };
    let s = spec.noise_support;
    let noise = |rng: &mut ChaCha8Rng| -> Result<f64> {
        if spec.noise_var == 0.0 {
            Ok(0.0)
        } else {
            truncated_gaussian(0.0, spec.noise_var, -s, s, rng)
        }
    };
    let signal = DMatrix::from_fn(n, periods, |i, t| thetas[i] * (t + 1) as f64);
    let mut z = DMatrix::zeros(n, periods);
    for i in 0..n {
        for t in 0..periods {
            z[(i, t)] = noise(&mut rng)?;
        }
    }
    let m = DVector::from_fn(periods, |t, _| theta0 * (t + 1) as f64);
    let mut zt = DVector::zeros(periods);
    for t in 0..periods {
        zt[t] = noise(&mut rng)?;
    }
    Ok(LinearDataset {
        panel: DonorPanel::from_truth(signal, z, t0)?,
        target: TargetSeries::from_truth(m, zt, t0)?,
        thetas,
        theta0,
    })
}

/// Panel of i.i.d. uniform entries in `[-1, 1]`.
pub fn generate_bounded_panel(n: usize, t0: usize, periods: usize, seed: u64) -> Result<DonorPanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, periods, |_, _| rng.random_range(-1.0..=1.0));
    DonorPanel::new(x, t0)
}

/// Target of i.i.d. uniform entries in `[-1, 1]`.
pub fn generate_bounded_target(periods: usize, t0: usize, seed: u64) -> Result<TargetSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TargetSeries::new(DVector::from_fn(periods, |_, _| rng.random_range(-1.0..=1.0)), t0)
}
