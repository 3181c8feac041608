//! Vertical ridge regression and the projection step of synthetic control.
//!
//! The loss minimized is
//! `J(f) = (1/t0) * ||y_pre - X_pre^T f||^2 + (lambda / (2 t0)) * ||f||^2`,
//! whose stationarity condition is the SPD system
//! `(2 X_pre X_pre^T + lambda I) f = 2 X_pre y_pre`.
//! The effective ridge coefficient on `X X^T` is therefore `lambda / 2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DpscError, Result};
use crate::model::{check_paired, split, DonorPanel, TargetSeries};

/// Which estimator produced a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nonprivate,
    OutputPerturbed,
    ObjectivePerturbed,
}

/// Distribution family of a privacy noise draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    HighdimLaplace,
    Gaussian,
}

/// Realized noise and calibration metadata of a private fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    /// Scale of the coefficient-side noise (`a` for output, `beta` for objective).
    pub coeff_scale: f64,
    pub coeff_family: NoiseFamily,
    /// `||v||_2` or `||b||_2`.
    pub coeff_noise_norm: f64,
    /// Scale `b` of the post-period matrix noise.
    pub post_scale: f64,
    /// `||W||_F`.
    pub post_noise_norm: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    /// Objective-perturbation only: remaining learning budget.
    pub eps0: Option<f64>,
    /// Objective-perturbation only: extra regularization actually applied.
    pub delta_reg: Option<f64>,
    /// Objective-perturbation only: extra regularization before flooring at zero.
    pub delta_reg_raw: Option<f64>,
    /// Privacy-unit bound assumption held on the input.
    pub bounded_input: bool,
}

/// A coefficient vector with the estimator that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coeffs: DVector<f64>,
    pub lambda: f64,
    pub method: Method,
    pub noise: Option<NoiseMeta>,
}

impl FitResult {
    pub fn nonprivate(coeffs: DVector<f64>, lambda: f64) -> Self {
        Self {
            coeffs,
            lambda,
            method: Method::Nonprivate,
            noise: None,
        }
    }
}

/// Sufficient statistics of the pre-intervention regression,
/// `X_pre X_pre^T` and `X_pre y_pre`, reusable across regularizers and
/// linear perturbations.
#[derive(Debug, Clone)]
pub struct RidgeSystem {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    t0: usize,
}

impl RidgeSystem {
    pub fn new(x_pre: &DMatrix<f64>, y_pre: &DVector<f64>) -> Result<Self> {
        if x_pre.ncols() != y_pre.len() {
            return Err(DpscError::DimensionMismatch {
                context: "y_pre length vs X_pre columns",
                expected: x_pre.ncols(),
                actual: y_pre.len(),
            });
        }
        if x_pre.ncols() == 0 {
            return Err(DpscError::InvalidArgument("empty pre-period".into()));
        }
        Ok(Self {
            gram: x_pre * x_pre.transpose(),
            cross: x_pre * y_pre,
            t0: x_pre.ncols(),
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn cross(&self) -> &DVector<f64> {
        &self.cross
    }

    /// Factorizes `2 X X^T + reg I`.
    pub fn factor(&self, reg: f64) -> Result<RidgeFactor> {
        if !(reg >= 0.0) || !reg.is_finite() {
            return Err(DpscError::InvalidArgument(format!(
                "regularizer must be finite and nonnegative, got {reg}"
            )));
        }
        let n = self.dim();
        let mut a = &self.gram * 2.0;
        for i in 0..n {
            a[(i, i)] += reg;
        }
        let chol = a.cholesky().ok_or(DpscError::RankDeficient {
            dim: n,
            regularizer: reg,
        })?;
        Ok(RidgeFactor {
            chol,
            rhs: &self.cross * 2.0,
        })
    }
}

/// Cholesky factor of one ridge system, solvable for shifted right-hand sides.
#[derive(Debug, Clone)]
pub struct RidgeFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    rhs: DVector<f64>,
}

impl RidgeFactor {
    /// Minimizer of the ridge loss.
    pub fn solve(&self) -> DVector<f64> {
        self.chol.solve(&self.rhs)
    }

    /// Minimizer of the ridge loss plus the linear term `(1/t0) b^T f`,
    /// i.e. the solution of `(2 X X^T + reg I) f = 2 X y - b`.
    pub fn solve_shifted(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&(&self.rhs - b))
    }
}

/// Closed-form minimizer of the ridge synthetic control loss.
pub fn ridge_fit(x_pre: &DMatrix<f64>, y_pre: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    let system = RidgeSystem::new(x_pre, y_pre)?;
    let coeffs = system.factor(lambda)?.solve();
    Ok(FitResult::nonprivate(coeffs, lambda))
}

/// Value of the (optionally linearly perturbed) ridge loss at `f`.
pub fn ridge_loss(
    x_pre: &DMatrix<f64>,
    y_pre: &DVector<f64>,
    f: &DVector<f64>,
    reg: f64,
    linear: Option<&DVector<f64>>,
) -> f64 {
    let t0 = x_pre.ncols() as f64;
    let resid = y_pre - x_pre.transpose() * f;
    let mut loss = resid.norm_squared() / t0 + reg / (2.0 * t0) * f.norm_squared();
    if let Some(b) = linear {
        loss += b.dot(f) / t0;
    }
    loss
}

/// Analytic gradient of [`ridge_loss`]:
/// `(2/t0)(X X^T f - X y) + (reg/t0) f + b/t0`.
pub fn ridge_gradient(
    x_pre: &DMatrix<f64>,
    y_pre: &DVector<f64>,
    f: &DVector<f64>,
    reg: f64,
    linear: Option<&DVector<f64>>,
) -> DVector<f64> {
    let t0 = x_pre.ncols() as f64;
    let resid = x_pre.transpose() * f - y_pre;
    let mut g = (x_pre * resid) * (2.0 / t0) + f * (reg / t0);
    if let Some(b) = linear {
        g += b / t0;
    }
    g
}

/// Prediction step: `X_post^T f`.
pub fn project(x_post: &DMatrix<f64>, fit: &FitResult) -> Result<DVector<f64>> {
    project_coeffs(x_post, &fit.coeffs)
}

pub(crate) fn project_coeffs(x_post: &DMatrix<f64>, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
    if x_post.nrows() != coeffs.len() {
        return Err(DpscError::DimensionMismatch {
            context: "coefficients vs X_post donors",
            expected: x_post.nrows(),
            actual: coeffs.len(),
        });
    }
    Ok(x_post.transpose() * coeffs)
}

/// Non-private synthetic control: split, ridge fit, project.
pub fn sc_fit_predict(
    panel: &DonorPanel,
    target: &TargetSeries,
    lambda: f64,
) -> Result<(FitResult, DVector<f64>)> {
    check_paired(panel, target)?;
    let (x_pre, x_post) = split(panel);
    let fit = ridge_fit(&x_pre, &target.pre(), lambda)?;
    let prediction = project(&x_post, &fit)?;
    Ok((fit, prediction))
}
