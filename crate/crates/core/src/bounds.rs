//! Theoretical RMSE bounds for the non-private and private estimators.
//!
//! The expected coefficient-noise norm inside the output-perturbation bound
//! is the printed calibration `a = 4 t0 sqrt(8+n) / (lambda eps1)`, not the
//! radial mean `n a` of the sampler; the theory curves are comparable with
//! published ones this way.
//!
//! Privacy limits are expressed with `f64::INFINITY` budgets, which make the
//! corresponding terms vanish.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::noise::sensitivity_f_reg;
use crate::objective::{compute_branch, default_c};

/// Free quantities of the accuracy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub t0: usize,
    pub periods: usize,
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    /// Observation noise variance.
    pub sigma2: f64,
    /// Observation noise support bound.
    pub s: f64,
    /// Bound on `||f_reg||_inf`.
    pub psi: f64,
    /// Spectral norm of `M_post`; `sqrt(n (T - t0))` when unknown.
    pub m_post_norm: Option<f64>,
    /// `E||f_reg - f||_2`; the closed-form estimate when unknown.
    pub f_gap: Option<f64>,
    pub xi: f64,
    pub t_conf: f64,
    pub k: usize,
    pub c: f64,
    pub eps0: f64,
    pub delta_reg: f64,
}

impl BoundInputs {
    /// Inputs with infinite budgets, noiseless data and `psi = 1`.
    pub fn new(n: usize, t0: usize, periods: usize, lambda: f64) -> Self {
        Self {
            n,
            t0,
            periods,
            lambda,
            eps1: f64::INFINITY,
            eps2: f64::INFINITY,
            delta: 0.0,
            sigma2: 0.0,
            s: 1.0,
            psi: 1.0,
            m_post_norm: None,
            f_gap: None,
            xi: 0.5,
            t_conf: 1.0,
            k: 1,
            c: default_c(n, t0),
            eps0: f64::INFINITY,
            delta_reg: 0.0,
        }
    }

    /// Sets `eps1`, `eps2`, `delta` and `c`, and derives `eps0` and `Delta`
    /// the way the objective-perturbation mechanism does.
    pub fn with_budget(mut self, eps1: f64, eps2: f64, delta: f64, c: Option<f64>) -> Self {
        self.eps1 = eps1;
        self.eps2 = eps2;
        self.delta = delta;
        self.c = c.unwrap_or_else(|| default_c(self.n, self.t0));
        let split = compute_branch(self.lambda, eps1, self.c);
        self.eps0 = split.eps0;
        self.delta_reg = split.delta_reg;
        self
    }

    pub fn horizon(&self) -> usize {
        self.periods - self.t0
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn t0f(&self) -> f64 {
        self.t0 as f64
    }

    /// `||M_post||_2 / sqrt(T - t0)`.
    pub fn signal_factor(&self) -> f64 {
        let h = self.horizon() as f64;
        self.m_post_norm.unwrap_or_else(|| (self.nf() * h).sqrt()) / h.sqrt()
    }

    pub fn f_gap_or_default(&self) -> f64 {
        self.f_gap.unwrap_or_else(|| self.lemma9_f_gap())
    }

    /// Closed-form estimate of `E||f_reg - f||_2` under the low-rank
    /// isotropic assumptions:
    /// `((sqrt(2 n s2) + sqrt(2 n s2 s^2)) t0 + lambda/(2 t0)) / ((1 - xi) t0 + lambda/(2 t0))`.
    pub fn lemma9_f_gap(&self) -> f64 {
        let t0 = self.t0f();
        let base = 2.0 * self.nf() * self.sigma2;
        let reg = self.lambda / (2.0 * t0);
        ((base.sqrt() + (base * self.s * self.s).sqrt()) * t0 + reg) / ((1.0 - self.xi) * t0 + reg)
    }

    /// Advisory sample-size condition `t0 >= (t/xi)^2 k log n` with the
    /// unspecified absolute constant set to 1.
    pub fn sample_size_ok(&self) -> bool {
        let need = (self.t_conf / self.xi).powi(2) * self.k as f64 * self.nf().ln();
        self.t0f() >= need
    }

    /// `E||v||_2` as printed for output perturbation.
    pub fn output_noise_mean(&self) -> f64 {
        sensitivity_f_reg(self.n, self.t0, self.lambda) / self.eps1
    }

    /// `E||b||_2` for objective perturbation: the Laplace scale when
    /// `delta = 0`, otherwise `sqrt(n t0 4 sqrt(8+n) sqrt(2 log(2/delta) + eps0) / eps0)`.
    pub fn objective_noise_mean(&self) -> f64 {
        let n = self.nf();
        let t0 = self.t0f();
        if self.delta > 0.0 {
            (n * t0 * 4.0 * (8.0 + n).sqrt() * (2.0 * (2.0 / self.delta).ln() + self.eps0).sqrt()
                / self.eps0)
                .sqrt()
        } else {
            (4.0 * t0 * (8.0 + n).sqrt()).min(self.c * n.sqrt() + 4.0 * t0) / self.eps0
        }
    }

    /// Coefficient error induced by objective noise and extra regularization:
    /// `2 E||b|| / (lambda + Delta) + 1{Delta != 0} (1/lambda + 1/(lambda + Delta)) 2 t0^2 sqrt(n)`.
    pub fn objective_coeff_error(&self) -> f64 {
        let reg = self.lambda + self.delta_reg;
        let mut err = 2.0 / reg * self.objective_noise_mean();
        if self.delta_reg != 0.0 {
            err += self.indicator_term();
        }
        err
    }

    /// `(1/lambda + 1/(lambda + Delta)) 2 t0^2 sqrt(n)`.
    pub fn indicator_term(&self) -> f64 {
        let t0 = self.t0f();
        (1.0 / self.lambda + 1.0 / (self.lambda + self.delta_reg)) * 2.0 * t0 * t0 * self.nf().sqrt()
    }

    fn projection_noise_factor(&self) -> f64 {
        (self.nf() * self.sigma2).sqrt() + 2f64.sqrt() / self.eps2
    }
}

/// Non-private baseline bound:
/// `(||M_post||_2 / sqrt(T - t0)) f_gap + sqrt(n) psi sqrt(n sigma2)`.
pub fn bound_nonprivate(inp: &BoundInputs) -> f64 {
    inp.signal_factor() * inp.f_gap_or_default()
        + inp.nf().sqrt() * inp.psi * (inp.nf() * inp.sigma2).sqrt()
}

fn output_bound(inp: &BoundInputs, signal_factor: f64, f_gap: f64) -> f64 {
    let a = inp.output_noise_mean();
    signal_factor * (f_gap + a) + inp.projection_noise_factor() * (inp.nf().sqrt() * inp.psi + a)
}

fn objective_bound(inp: &BoundInputs, signal_factor: f64, f_gap: f64) -> f64 {
    let extra = inp.objective_coeff_error();
    signal_factor * (f_gap + extra)
        + inp.projection_noise_factor() * (inp.nf().sqrt() * inp.psi + extra)
}

/// RMSE bound for output perturbation.
pub fn bound_thm2(inp: &BoundInputs) -> f64 {
    output_bound(inp, inp.signal_factor(), inp.f_gap_or_default())
}

/// Closed-form output-perturbation bound and the advisory sample-size flag.
pub fn bound_cor1(inp: &BoundInputs) -> (f64, bool) {
    (
        output_bound(inp, inp.nf().sqrt(), inp.lemma9_f_gap()),
        inp.sample_size_ok(),
    )
}

/// RMSE bound for objective perturbation.
pub fn bound_thm4(inp: &BoundInputs) -> f64 {
    objective_bound(inp, inp.signal_factor(), inp.f_gap_or_default())
}

/// Closed-form objective-perturbation bound and the advisory sample-size flag.
pub fn bound_cor2(inp: &BoundInputs) -> (f64, bool) {
    (
        objective_bound(inp, inp.nf().sqrt(), inp.lemma9_f_gap()),
        inp.sample_size_ok(),
    )
}

/// Extra RMSE paid for privacy by output perturbation with
/// `eps1 = eps2 = eps`, `lambda = t0` and `||M_post||_2 / sqrt(T - t0) <= sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyCost {
    pub terms: [f64; 4],
    pub total: f64,
    /// Whether `eps >= 1/sqrt(n)`.
    pub in_regime: bool,
}

pub fn privacy_cost_out(n: usize, eps: f64, sigma2: f64, psi: f64) -> PrivacyCost {
    let n = n as f64;
    let terms = [
        4.0 * ((8.0 + n) * n).sqrt() / eps,
        4.0 * ((8.0 + n) * n * sigma2).sqrt() / eps,
        (2.0 * n).sqrt() * psi / eps,
        4.0 * (2.0 * (8.0 + n)).sqrt() / (eps * eps),
    ];
    PrivacyCost {
        terms,
        total: terms.iter().sum(),
        in_regime: eps >= 1.0 / n.sqrt(),
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}
