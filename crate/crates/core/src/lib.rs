//! Differentially private synthetic control.
//!
//! Synthetic control predicts a target unit's post-intervention series as a
//! linear combination of donor series, with weights learned by a vertical
//! ridge regression on the pre-intervention period. This crate provides the
//! non-private estimator and two private ones:
//!
//! - [`output::dpsc_out`] perturbs the ridge coefficients and the
//!   post-period donor block with high-dimensional Laplace noise;
//! - [`objective::dpsc_obj`] perturbs the ridge objective with a linear
//!   noise term and minimizes it exactly, then privatizes the projection the
//!   same way.
//!
//! It also contains the sensitivity formulas, noise samplers, accuracy bound
//! calculators and a synthetic data generator for experiments.

pub mod bounds;
pub mod datagen;
pub mod error;
pub mod io;
pub mod model;
pub mod noise;
pub mod objective;
pub mod output;
pub mod ridge;

pub use error::{DpscError, Result};
pub use model::{rmse_post, split, validate_bounds, BoundsReport, DonorPanel, TargetSeries};
pub use objective::{dpsc_obj, DpscObjConfig, ObjectivePerturbation};
pub use output::{dpsc_out, DpscOutConfig, OutputPerturbation, PrivacyBudget, PrivateRelease};
pub use ridge::{project, ridge_fit, sc_fit_predict, FitResult, Method};
