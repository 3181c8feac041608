//! Donor/target data model, the pre/post split and the post-intervention RMSE.
//!
//! Panels are stored donor-major: row `i` is donor `i`'s full time series, so
//! neighboring databases differ in exactly one row.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DpscError, Result};

/// Ground-truth decomposition of a donor panel into signal and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelTruth {
    pub signal: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

/// Ground-truth decomposition of a target series.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTruth {
    pub signal: DVector<f64>,
    pub noise: DVector<f64>,
}

/// Donor matrix `X` (n donors by T periods) with its intervention index.
#[derive(Debug, Clone, PartialEq)]
pub struct DonorPanel {
    values: DMatrix<f64>,
    t0: usize,
    truth: Option<PanelTruth>,
    bounded: bool,
}

fn check_split(t0: usize, periods: usize) -> Result<()> {
    if t0 == 0 || t0 >= periods {
        return Err(DpscError::InvalidArgument(format!(
            "split index t0={t0} must satisfy 1 <= t0 < T={periods}"
        )));
    }
    Ok(())
}

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0_f64, |m, v| m.max(v.abs()))
}

impl DonorPanel {
    pub fn new(values: DMatrix<f64>, t0: usize) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(DpscError::InvalidArgument("panel has no donors".into()));
        }
        check_split(t0, values.ncols())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DpscError::InvalidArgument(
                "panel contains non-finite entries".into(),
            ));
        }
        let bounded = max_abs(values.iter()) <= 1.0;
        Ok(Self {
            values,
            t0,
            truth: None,
            bounded,
        })
    }

    /// Builds `X = M + Z` from its signal and noise parts.
    pub fn from_truth(signal: DMatrix<f64>, noise: DMatrix<f64>, t0: usize) -> Result<Self> {
        if signal.shape() != noise.shape() {
            return Err(DpscError::InvalidArgument(format!(
                "signal shape {:?} differs from noise shape {:?}",
                signal.shape(),
                noise.shape()
            )));
        }
        let values = &signal + &noise;
        let mut panel = Self::new(values, t0)?;
        panel.truth = Some(PanelTruth { signal, noise });
        Ok(panel)
    }

    /// Reassembles a panel whose values and truth were stored separately.
    pub fn with_truth(values: DMatrix<f64>, t0: usize, truth: Option<PanelTruth>) -> Result<Self> {
        let mut panel = Self::new(values, t0)?;
        if let Some(t) = &truth {
            if t.signal.shape() != panel.values.shape() || t.noise.shape() != panel.values.shape() {
                return Err(DpscError::InvalidArgument(
                    "truth matrices do not match the panel shape".into(),
                ));
            }
            if (&t.signal + &t.noise) != panel.values {
                return Err(DpscError::InvalidArgument(
                    "panel values differ from signal + noise".into(),
                ));
            }
        }
        panel.truth = truth;
        Ok(panel)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn truth(&self) -> Option<&PanelTruth> {
        self.truth.as_ref()
    }

    /// Number of donors.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Total number of periods.
    pub fn periods(&self) -> usize {
        self.values.ncols()
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    /// Number of post-intervention periods, `T - t0`.
    pub fn horizon(&self) -> usize {
        self.periods() - self.t0
    }

    /// Whether every entry lies in `[-1, 1]`.
    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    /// Copy of the panel with donor `row` replaced.
    pub fn with_row(&self, row: usize, series: &[f64]) -> Result<Self> {
        if row >= self.n() {
            return Err(DpscError::InvalidArgument(format!(
                "donor index {row} out of range for {} donors",
                self.n()
            )));
        }
        if series.len() != self.periods() {
            return Err(DpscError::DimensionMismatch {
                context: "replacement donor row",
                expected: self.periods(),
                actual: series.len(),
            });
        }
        let mut values = self.values.clone();
        for (t, v) in series.iter().enumerate() {
            values[(row, t)] = *v;
        }
        Self::new(values, self.t0)
    }
}

/// Target series `y` with its intervention index.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSeries {
    values: DVector<f64>,
    t0: usize,
    truth: Option<TargetTruth>,
}

impl TargetSeries {
    pub fn new(values: DVector<f64>, t0: usize) -> Result<Self> {
        check_split(t0, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DpscError::InvalidArgument(
                "target contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            values,
            t0,
            truth: None,
        })
    }

    /// Builds `y = m + z` from its signal and noise parts.
    pub fn from_truth(signal: DVector<f64>, noise: DVector<f64>, t0: usize) -> Result<Self> {
        if signal.len() != noise.len() {
            return Err(DpscError::DimensionMismatch {
                context: "target noise",
                expected: signal.len(),
                actual: noise.len(),
            });
        }
        let values = &signal + &noise;
        let mut target = Self::new(values, t0)?;
        target.truth = Some(TargetTruth { signal, noise });
        Ok(target)
    }

    pub fn with_truth(values: DVector<f64>, t0: usize, truth: Option<TargetTruth>) -> Result<Self> {
        let mut target = Self::new(values, t0)?;
        if let Some(t) = &truth {
            if t.signal.len() != target.values.len() || t.noise.len() != target.values.len() {
                return Err(DpscError::InvalidArgument(
                    "truth vectors do not match the target length".into(),
                ));
            }
            if (&t.signal + &t.noise) != target.values {
                return Err(DpscError::InvalidArgument(
                    "target values differ from signal + noise".into(),
                ));
            }
        }
        target.truth = truth;
        Ok(target)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn truth(&self) -> Option<&TargetTruth> {
        self.truth.as_ref()
    }

    pub fn periods(&self) -> usize {
        self.values.len()
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn pre(&self) -> DVector<f64> {
        self.values.rows(0, self.t0).into_owned()
    }

    pub fn post(&self) -> DVector<f64> {
        self.values
            .rows(self.t0, self.periods() - self.t0)
            .into_owned()
    }

    /// Post-intervention true signal `m_post`, when known.
    pub fn signal_post(&self) -> Option<DVector<f64>> {
        self.truth.as_ref().map(|t| {
            t.signal
                .rows(self.t0, self.periods() - self.t0)
                .into_owned()
        })
    }

    /// Pre-intervention true signal, when known.
    pub fn signal_pre(&self) -> Option<DVector<f64>> {
        self.truth
            .as_ref()
            .map(|t| t.signal.rows(0, self.t0).into_owned())
    }
}

/// Checks that a panel and target describe the same time axis.
pub fn check_paired(panel: &DonorPanel, target: &TargetSeries) -> Result<()> {
    if panel.periods() != target.periods() {
        return Err(DpscError::DimensionMismatch {
            context: "target length vs panel periods",
            expected: panel.periods(),
            actual: target.periods(),
        });
    }
    if panel.t0() != target.t0() {
        return Err(DpscError::DimensionMismatch {
            context: "target t0 vs panel t0",
            expected: panel.t0(),
            actual: target.t0(),
        });
    }
    Ok(())
}

/// Column split of the panel at `t0` into `(X_pre, X_post)`.
pub fn split(panel: &DonorPanel) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = panel.values();
    (
        x.columns(0, panel.t0()).into_owned(),
        x.columns(panel.t0(), panel.horizon()).into_owned(),
    )
}

/// Post-intervention RMSE: `||prediction - m_post||_2 / sqrt(T - t0)`.
pub fn rmse_post(prediction: &DVector<f64>, m_post: &DVector<f64>) -> Result<f64> {
    if prediction.len() != m_post.len() {
        return Err(DpscError::DimensionMismatch {
            context: "rmse_post",
            expected: m_post.len(),
            actual: prediction.len(),
        });
    }
    if prediction.is_empty() {
        return Err(DpscError::InvalidArgument(
            "rmse_post needs at least one period".into(),
        ));
    }
    Ok((prediction - m_post).norm() / (prediction.len() as f64).sqrt())
}

/// Result of scanning panel and target against the `|x| <= 1` assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub panel_bounded: bool,
    pub target_bounded: bool,
    pub panel_violations: usize,
    pub target_violations: usize,
    /// Largest-magnitude panel entry as `(donor, period, value)`.
    pub panel_worst: Option<(usize, usize, f64)>,
    /// Largest-magnitude target entry as `(period, value)`.
    pub target_worst: Option<(usize, f64)>,
}

impl BoundsReport {
    pub fn bounded(&self) -> bool {
        self.panel_bounded && self.target_bounded
    }
}

/// Scans for entries outside `[-1, 1]`. Violations are reported, never fatal.
pub fn validate_bounds(panel: &DonorPanel, target: &TargetSeries) -> BoundsReport {
    let x = panel.values();
    let mut panel_violations = 0;
    let mut panel_worst: Option<(usize, usize, f64)> = None;
    for i in 0..x.nrows() {
        for t in 0..x.ncols() {
            let v = x[(i, t)];
            if v.abs() > 1.0 {
                panel_violations += 1;
                if panel_worst.is_none_or(|(_, _, w)| v.abs() > w.abs()) {
                    panel_worst = Some((i, t, v));
                }
            }
        }
    }
    let mut target_violations = 0;
    let mut target_worst: Option<(usize, f64)> = None;
    for (t, &v) in target.values().iter().enumerate() {
        if v.abs() > 1.0 {
            target_violations += 1;
            if target_worst.is_none_or(|(_, w)| v.abs() > w.abs()) {
                target_worst = Some((t, v));
            }
        }
    }
    BoundsReport {
        panel_bounded: panel_violations == 0,
        target_bounded: target_violations == 0,
        panel_violations,
        target_violations,
        panel_worst,
        target_worst,
    }
}
