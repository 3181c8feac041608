//! Synthetic control via objective perturbation.
//!
//! Step 1 minimizes the perturbed ridge objective
//! `(1/t0)||y_pre - X_pre^T f||^2 + ((lambda + Delta)/(2 t0))||f||^2 + (1/t0) b^T f`
//! exactly, with `b` drawn from a high-dimensional Laplace law (`delta = 0`)
//! or a spherical Gaussian (`delta > 0`). Step 2 is the same private
//! projection used by output perturbation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpscError, Result};
use crate::model::{check_paired, split, DonorPanel, TargetSeries};
use crate::noise::{sample_gaussian_vector, sample_highdim_laplace, sensitivity_x_post};
use crate::output::{check_positive, privatize_post, NoiseScales, PrivacyBudget, PrivateRelease};
use crate::ridge::{project_coeffs, FitResult, Method, NoiseFamily, NoiseMeta, RidgeFactor, RidgeSystem};

/// Eigenvalue bound `(1 + sqrt(16 n - 15)) t0` usable when nothing beyond
/// the dimensions is known about the data.
pub fn default_c(n: usize, t0: usize) -> f64 {
    (1.0 + (16.0 * n as f64 - 15.0).sqrt()) * t0 as f64
}

/// Budget split of the learning step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSplit {
    pub eps0: f64,
    /// Extra regularization applied, floored at zero.
    pub delta_reg: f64,
    /// Extra regularization as given by the formula, possibly negative.
    pub delta_reg_raw: f64,
}

/// `log(1 + 2c/lambda + c^2/lambda^2)`, the budget consumed by the
/// Jacobian-ratio bound.
pub fn branch_threshold(lambda: f64, c: f64) -> f64 {
    let r = c / lambda;
    (1.0 + 2.0 * r + r * r).ln()
}

/// Splits `eps1` between the noise ratio and the Jacobian bound.
///
/// When `eps1` strictly exceeds the threshold, `eps0 = eps1 - threshold` and
/// no extra regularization is needed. Otherwise `eps0 = eps1 / 2` and
/// `Delta = c / (exp(eps1/4) - 1) - lambda`, floored at zero.
pub fn compute_branch(lambda: f64, eps1: f64, c: f64) -> BranchSplit {
    let threshold = branch_threshold(lambda, c);
    if eps1 > threshold {
        BranchSplit {
            eps0: eps1 - threshold,
            delta_reg: 0.0,
            delta_reg_raw: 0.0,
        }
    } else {
        let raw = c / ((eps1 / 4.0).exp() - 1.0) - lambda;
        BranchSplit {
            eps0: eps1 / 2.0,
            delta_reg: raw.max(0.0),
            delta_reg_raw: raw,
        }
    }
}

/// Scale of the Laplace objective noise:
/// `min{4 t0 sqrt(8+n), c sqrt(n) + 4 t0} / eps0`.
pub fn beta_laplace(n: usize, t0: usize, c: f64, eps0: f64) -> f64 {
    let t0 = t0 as f64;
    let n = n as f64;
    let a = 4.0 * t0 * (8.0 + n).sqrt();
    let b = c * n.sqrt() + 4.0 * t0;
    a.min(b) / eps0
}

/// Standard deviation of the Gaussian objective noise:
/// `4 t0 sqrt(8+n) sqrt(2 log(2/delta) + eps0) / eps0`.
pub fn beta_gaussian(n: usize, t0: usize, eps0: f64, delta: f64) -> f64 {
    4.0 * t0 as f64 * (8.0 + n as f64).sqrt() * (2.0 * (2.0 / delta).ln() + eps0).sqrt() / eps0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpscObjConfig {
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default)]
    pub delta: f64,
    /// Eigenvalue bound; [`default_c`] when absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub release_coeffs: bool,
}

impl DpscObjConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("lambda", self.lambda)?;
        check_positive("eps1", self.eps1)?;
        check_positive("eps2", self.eps2)?;
        if !(self.delta >= 0.0) || self.delta >= 1.0 {
            return Err(DpscError::InvalidArgument(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if let Some(c) = self.c {
            check_positive("c", c)?;
        }
        Ok(())
    }

    pub fn resolved_c(&self, n: usize, t0: usize) -> f64 {
        self.c.unwrap_or_else(|| default_c(n, t0))
    }
}

/// Everything the learning step derives from the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjBranch {
    pub eps0: f64,
    pub delta_reg: f64,
    pub delta_reg_raw: f64,
    pub beta: f64,
    pub family: NoiseFamily,
    pub c: f64,
}

impl ObjBranch {
    pub fn new(n: usize, t0: usize, config: &DpscObjConfig) -> Self {
        let c = config.resolved_c(n, t0);
        let split = compute_branch(config.lambda, config.eps1, c);
        let (beta, family) = if config.delta > 0.0 {
            (beta_gaussian(n, t0, split.eps0, config.delta), NoiseFamily::Gaussian)
        } else {
            (beta_laplace(n, t0, c, split.eps0), NoiseFamily::HighdimLaplace)
        };
        Self {
            eps0: split.eps0,
            delta_reg: split.delta_reg,
            delta_reg_raw: split.delta_reg_raw,
            beta,
            family,
            c,
        }
    }
}

/// Objective-perturbation mechanism with the factorization of
/// `2 X X^T + (lambda + Delta) I` precomputed.
#[derive(Debug, Clone)]
pub struct ObjectivePerturbation {
    config: DpscObjConfig,
    branch: ObjBranch,
    factor: RidgeFactor,
    x_post: DMatrix<f64>,
    scales: NoiseScales,
    bounded: bool,
}

impl ObjectivePerturbation {
    pub fn new(panel: &DonorPanel, target: &TargetSeries, config: DpscObjConfig) -> Result<Self> {
        config.validate()?;
        check_paired(panel, target)?;
        let branch = ObjBranch::new(panel.n(), panel.t0(), &config);
        let (x_pre, x_post) = split(panel);
        let factor = RidgeSystem::new(&x_pre, &target.pre())?
            .factor(config.lambda + branch.delta_reg)?;
        let scales = NoiseScales {
            coeff: branch.beta,
            post: sensitivity_x_post(panel.horizon()) / config.eps2,
        };
        Ok(Self {
            config,
            branch,
            factor,
            x_post,
            scales,
            bounded: panel.is_bounded(),
        })
    }

    #[cfg(any(test, feature = "test-hooks"))]
    pub fn override_scales(mut self, scales: NoiseScales) -> Self {
        self.scales = scales;
        self
    }

    pub fn branch(&self) -> &ObjBranch {
        &self.branch
    }

    pub fn scales(&self) -> NoiseScales {
        self.scales
    }

    /// Regularizer of the perturbed objective, `lambda + Delta`.
    pub fn regularizer(&self) -> f64 {
        self.config.lambda + self.branch.delta_reg
    }

    pub fn budget(&self) -> PrivacyBudget {
        PrivacyBudget {
            epsilon: self.config.eps1 + self.config.eps2,
            delta: self.config.delta,
        }
    }

    /// Draws the linear noise term `b`.
    pub fn sample_linear_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.x_post.nrows();
        match self.branch.family {
            NoiseFamily::HighdimLaplace => sample_highdim_laplace(n, self.scales.coeff, rng),
            NoiseFamily::Gaussian => sample_gaussian_vector(n, self.scales.coeff, rng),
        }
    }

    /// Exact minimizer of the perturbed objective for a given `b`.
    pub fn minimize(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve_shifted(b)
    }

    /// Like [`Self::release`] but also returns the realized `b`.
    pub fn release_with_noise<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(PrivateRelease, DVector<f64>)> {
        let b = self.sample_linear_noise(rng);
        let f_obj = self.minimize(&b);
        let (x_tilde, post_noise_norm) = privatize_post(&self.x_post, self.scales.post, rng);
        let prediction = project_coeffs(&x_tilde, &f_obj)?;
        let meta = NoiseMeta {
            coeff_scale: self.scales.coeff,
            coeff_family: self.branch.family,
            coeff_noise_norm: b.norm(),
            post_scale: self.scales.post,
            post_noise_norm,
            eps1: self.config.eps1,
            eps2: self.config.eps2,
            delta: self.config.delta,
            eps0: Some(self.branch.eps0),
            delta_reg: Some(self.branch.delta_reg),
            delta_reg_raw: Some(self.branch.delta_reg_raw),
            bounded_input: self.bounded,
        };
        let release = PrivateRelease {
            prediction,
            coeffs: self.config.release_coeffs.then(|| f_obj.clone()),
            fit: FitResult {
                coeffs: f_obj,
                lambda: self.config.lambda,
                method: Method::ObjectivePerturbed,
                noise: Some(meta),
            },
            budget: self.budget(),
        };
        Ok((release, b))
    }

    pub fn release<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PrivateRelease> {
        self.release_with_noise(rng).map(|(r, _)| r)
    }
}

/// One objective-perturbation release.
pub fn dpsc_obj<R: Rng + ?Sized>(
    panel: &DonorPanel,
    target: &TargetSeries,
    config: DpscObjConfig,
    rng: &mut R,
) -> Result<PrivateRelease> {
    ObjectivePerturbation::new(panel, target, config)?.release(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::{ridge_fit, ridge_gradient, sc_fit_predict};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (DonorPanel, TargetSeries) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(5, 10, |_, _| rng.random_range(-1.0..=1.0));
        let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..=1.0));
        (DonorPanel::new(x, 7).unwrap(), TargetSeries::new(y, 7).unwrap())
    }

    #[test]
    fn branch_plug_ins() {
        let b = compute_branch(1.0, 2.0, 1.0);
        assert!((b.eps0 - (2.0 - 4f64.ln())).abs() < 1e-12);
        assert_eq!(b.delta_reg, 0.0);
        let b = compute_branch(1.0, 1.0, 1.0);
        assert_eq!(b.eps0, 0.5);
        assert!((b.delta_reg - (1.0 / (0.25f64.exp() - 1.0) - 1.0)).abs() < 1e-12);
        assert!((b.delta_reg - 2.5208).abs() < 1e-4);
    }

    #[test]
    fn threshold_tie_takes_else_branch() {
        let eps1 = branch_threshold(1.0, 1.0);
        let b = compute_branch(1.0, eps1, 1.0);
        assert_eq!(b.eps0, eps1 / 2.0);
    }

    #[test]
    fn else_branch_regularization_is_at_least_lambda() {
        for &lambda in &[0.1, 1.0, 10.0, 1000.0] {
            for &c in &[0.01, 1.0, 130.0, 1e4] {
                let threshold = branch_threshold(lambda, c);
                for frac in [0.01, 0.5, 1.0] {
                    let b = compute_branch(lambda, threshold * frac, c);
                    assert_eq!(b.delta_reg, b.delta_reg_raw);
                    assert!(b.delta_reg >= lambda * (1.0 - 1e-9), "{lambda} {c} {frac}: {b:?}");
                }
            }
        }
    }

    #[test]
    fn beta_plug_ins() {
        assert_eq!(beta_laplace(8, 1, 100.0, 1.0), 16.0);
        assert!((beta_laplace(8, 1, 1.0, 1.0) - (2.0 * 2f64.sqrt() + 4.0)).abs() < 1e-12);
        assert_eq!(beta_laplace(8, 1, 1.0, 2.0), beta_laplace(8, 1, 1.0, 1.0) / 2.0);
        let delta = 2.0 / 1f64.exp();
        assert!((beta_gaussian(8, 1, 1.0, delta) - 16.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!(beta_gaussian(8, 1, 1.0, 1e-3) > beta_gaussian(8, 1, 1.0, 1e-2));
        assert_eq!(default_c(1, 1), 2.0);
        assert!((default_c(10, 10) - (1.0 + 145f64.sqrt()) * 10.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_family_iff_delta_positive() {
        let cfg = DpscObjConfig { lambda: 1.0, eps1: 1.0, eps2: 1.0, delta: 1e-5, c: None, release_coeffs: false };
        assert_eq!(ObjBranch::new(4, 4, &cfg).family, NoiseFamily::Gaussian);
        let cfg = DpscObjConfig { delta: 0.0, ..cfg };
        assert_eq!(ObjBranch::new(4, 4, &cfg).family, NoiseFamily::HighdimLaplace);
    }

    #[test]
    fn zero_noise_reduces_to_ridge() {
        let (panel, target) = instance(1);
        let cfg = DpscObjConfig { lambda: 2.0, eps1: 50.0, eps2: 1.0, delta: 0.0, c: Some(1.0), release_coeffs: true };
        let mech = ObjectivePerturbation::new(&panel, &target, cfg)
            .unwrap()
            .override_scales(NoiseScales { coeff: 0.0, post: 0.0 });
        assert_eq!(mech.branch().delta_reg, 0.0);
        let rel = mech.release(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (fit, pred) = sc_fit_predict(&panel, &target, 2.0).unwrap();
        assert!((rel.coeffs.unwrap() - fit.coeffs).amax() <= 1e-12);
        assert!((rel.prediction - pred).amax() <= 1e-10);
    }

    #[test]
    fn zero_noise_with_extra_regularization() {
        let (panel, target) = instance(2);
        let cfg = DpscObjConfig { lambda: 1.0, eps1: 0.5, eps2: 1.0, delta: 0.0, c: None, release_coeffs: false };
        let mech = ObjectivePerturbation::new(&panel, &target, cfg).unwrap();
        assert!(mech.branch().delta_reg > 0.0);
        let f = mech.minimize(&DVector::zeros(5));
        let (x_pre, _) = split(&panel);
        let expected = ridge_fit(&x_pre, &target.pre(), mech.regularizer()).unwrap().coeffs;
        assert!((f - expected).amax() < 1e-12);
    }

    #[test]
    fn stationary_under_realized_noise() {
        let (panel, target) = instance(3);
        let (x_pre, _) = split(&panel);
        for (eps1, delta) in [(50.0, 0.0), (0.3, 0.0), (50.0, 1e-6), (0.3, 1e-6)] {
            let cfg = DpscObjConfig { lambda: 1.5, eps1, eps2: 1.0, delta, c: None, release_coeffs: true };
            let mech = ObjectivePerturbation::new(&panel, &target, cfg).unwrap();
            let (rel, b) = mech.release_with_noise(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            let f = rel.coeffs.unwrap();
            let g = ridge_gradient(&x_pre, &target.pre(), &f, mech.regularizer(), Some(&b));
            assert!(g.norm() <= 1e-8 * (1.0 + f.norm()), "{eps1} {delta}: {}", g.norm());
            assert_eq!(rel.budget, PrivacyBudget { epsilon: eps1 + 1.0, delta });
        }
    }

    #[test]
    fn seeded_release_is_reproducible() {
        let (panel, target) = instance(4);
        let cfg = DpscObjConfig { lambda: 1.0, eps1: 5.0, eps2: 5.0, delta: 0.0, c: None, release_coeffs: false };
        let a = dpsc_obj(&panel, &target, cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = dpsc_obj(&panel, &target, cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let ok = DpscObjConfig { lambda: 1.0, eps1: 1.0, eps2: 1.0, delta: 0.0, c: None, release_coeffs: false };
        assert!(ok.validate().is_ok());
        assert!(DpscObjConfig { delta: -1.0, ..ok }.validate().is_err());
        assert!(DpscObjConfig { c: Some(0.0), ..ok }.validate().is_err());
        assert!(DpscObjConfig { eps1: 0.0, ..ok }.validate().is_err());
    }
}
