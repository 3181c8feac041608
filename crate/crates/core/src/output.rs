//! Synthetic control via output perturbation.
//!
//! Step 1 adds high-dimensional Laplace noise of scale
//! `a = 4 t0 sqrt(8 + n) / (lambda eps1)` to the ridge coefficients. Step 2
//! privatizes `X_post` with matrix Laplace noise of scale
//! `b = 2 sqrt(T - t0) / eps2` and projects. The release is
//! `(eps1 + eps2, 0)`-differentially private.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpscError, Result};
use crate::model::{check_paired, split, DonorPanel, TargetSeries};
use crate::noise::{sample_highdim_laplace, sample_matrix_laplace, sensitivity_f_reg, sensitivity_x_post};
use crate::ridge::{project_coeffs, FitResult, Method, NoiseFamily, NoiseMeta, RidgeSystem};

/// Total privacy loss of a release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

/// Output of a private synthetic control run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateRelease {
    pub prediction: DVector<f64>,
    /// Private coefficients, present when the caller asked for them.
    pub coeffs: Option<DVector<f64>>,
    pub fit: FitResult,
    pub budget: PrivacyBudget,
}

impl PrivateRelease {
    pub fn meta(&self) -> &NoiseMeta {
        self.fit.noise.as_ref().expect("private fits carry noise metadata")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpscOutConfig {
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default)]
    pub release_coeffs: bool,
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(DpscError::InvalidArgument(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

impl DpscOutConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("lambda", self.lambda)?;
        check_positive("eps1", self.eps1)?;
        check_positive("eps2", self.eps2)
    }
}

/// Noise scales of the two mechanism steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScales {
    pub coeff: f64,
    pub post: f64,
}

/// Step 2 shared by both mechanisms: `X_post + W` with
/// `W ~ exp(-||W||_F / scale)`. Returns the noisy block and `||W||_F`.
pub(crate) fn privatize_post<R: Rng + ?Sized>(
    x_post: &DMatrix<f64>,
    scale: f64,
    rng: &mut R,
) -> (DMatrix<f64>, f64) {
    let w = sample_matrix_laplace(x_post.nrows(), x_post.ncols(), scale, rng);
    let norm = w.norm();
    (x_post + w, norm)
}

/// Output-perturbation mechanism with the ridge fit precomputed, so repeated
/// releases on the same data only pay for the noise.
#[derive(Debug, Clone)]
pub struct OutputPerturbation {
    config: DpscOutConfig,
    f_reg: DVector<f64>,
    x_post: DMatrix<f64>,
    scales: NoiseScales,
    bounded: bool,
}

impl OutputPerturbation {
    pub fn new(panel: &DonorPanel, target: &TargetSeries, config: DpscOutConfig) -> Result<Self> {
        config.validate()?;
        check_paired(panel, target)?;
        let (x_pre, x_post) = split(panel);
        let f_reg = RidgeSystem::new(&x_pre, &target.pre())?
            .factor(config.lambda)?
            .solve();
        let scales = NoiseScales {
            coeff: sensitivity_f_reg(panel.n(), panel.t0(), config.lambda) / config.eps1,
            post: sensitivity_x_post(panel.horizon()) / config.eps2,
        };
        Ok(Self {
            config,
            f_reg,
            x_post,
            scales,
            bounded: panel.is_bounded(),
        })
    }

    /// Replaces the calibrated noise scales. Only for zero-noise reduction tests.
    #[cfg(any(test, feature = "test-hooks"))]
    pub fn override_scales(mut self, scales: NoiseScales) -> Self {
        self.scales = scales;
        self
    }

    pub fn scales(&self) -> NoiseScales {
        self.scales
    }

    /// Non-private ridge coefficients.
    pub fn f_reg(&self) -> &DVector<f64> {
        &self.f_reg
    }

    pub fn budget(&self) -> PrivacyBudget {
        PrivacyBudget {
            epsilon: self.config.eps1 + self.config.eps2,
            delta: 0.0,
        }
    }

    pub fn release<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PrivateRelease> {
        let v = sample_highdim_laplace(self.f_reg.len(), self.scales.coeff, rng);
        let coeff_noise_norm = v.norm();
        let f_out = &self.f_reg + v;
        let (x_tilde, post_noise_norm) = privatize_post(&self.x_post, self.scales.post, rng);
        let prediction = project_coeffs(&x_tilde, &f_out)?;
        let meta = NoiseMeta {
            coeff_scale: self.scales.coeff,
            coeff_family: NoiseFamily::HighdimLaplace,
            coeff_noise_norm,
            post_scale: self.scales.post,
            post_noise_norm,
            eps1: self.config.eps1,
            eps2: self.config.eps2,
            delta: 0.0,
            eps0: None,
            delta_reg: None,
            delta_reg_raw: None,
            bounded_input: self.bounded,
        };
        Ok(PrivateRelease {
            prediction,
            coeffs: self.config.release_coeffs.then(|| f_out.clone()),
            fit: FitResult {
                coeffs: f_out,
                lambda: self.config.lambda,
                method: Method::OutputPerturbed,
                noise: Some(meta),
            },
            budget: self.budget(),
        })
    }
}

/// One output-perturbation release.
pub fn dpsc_out<R: Rng + ?Sized>(
    panel: &DonorPanel,
    target: &TargetSeries,
    config: DpscOutConfig,
    rng: &mut R,
) -> Result<PrivateRelease> {
    OutputPerturbation::new(panel, target, config)?.release(rng)
}
