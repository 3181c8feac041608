//! Sweep configuration, read from JSON.

use std::path::{Path, PathBuf};

use dpsc_core::datagen::LatentModelSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nonprivate,
    DpscOut,
    DpscObj,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nonprivate => "nonprivate",
            Self::DpscOut => "dpsc_out",
            Self::DpscObj => "dpsc_obj",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nonprivate" => Some(Self::Nonprivate),
            "dpsc_out" | "out" => Some(Self::DpscOut),
            "dpsc_obj" | "obj" => Some(Self::DpscObj),
            _ => None,
        }
    }
}

/// How grid `lambdas` are turned into regularization weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    #[default]
    Absolute,
    /// Each grid value is multiplied by the cell's `t0`.
    PerT0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// One dataset per `(n, t0)`, shared by every algorithm and grid point.
    #[default]
    FixedPerSize,
    /// A new dataset for every cell.
    FreshPerCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub n: usize,
    pub t0: usize,
}

fn default_reps() -> usize {
    500
}

fn default_eps_split() -> f64 {
    0.5
}

fn default_horizon() -> usize {
    3
}

fn default_deltas() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithms: Vec<Algorithm>,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub lambda_mode: LambdaMode,
    /// Total budgets; each is split into `eps1 = eps_split * eps` and
    /// `eps2 = eps - eps1`. Ignored by the nonprivate baseline.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Only the objective-perturbation mechanism uses `delta`.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    pub sizes: Vec<Size>,
    /// Post-intervention periods, `T - t0`.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_eps_split")]
    pub eps_split: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset: DatasetMode,
    /// Eigenvalue bound for the objective mechanism; `(1 + sqrt(16n - 15)) t0`
    /// when absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub model: LatentModelSpec,
    /// Directory receiving `records.csv`, `aggregate.csv` and `manifest.json`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn has_private(&self) -> bool {
        self.algorithms.iter().any(|a| *a != Algorithm::Nonprivate)
    }

    /// Rejects the config before any work is done, naming the offending
    /// grid entry.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.algorithms.is_empty() {
            return bad("algorithms is empty".into());
        }
        if self.lambdas.is_empty() {
            return bad("lambdas is empty".into());
        }
        if self.sizes.is_empty() {
            return bad("sizes is empty".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.eps_split > 0.0 && self.eps_split < 1.0) {
            return bad(format!("eps_split = {} must lie in (0, 1)", self.eps_split));
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lambdas[{i}] = {l} must be positive and finite"));
            }
        }
        for (i, s) in self.sizes.iter().enumerate() {
            if s.n == 0 || s.t0 == 0 {
                return bad(format!("sizes[{i}] = (n={}, t0={}) must be positive", s.n, s.t0));
            }
        }
        if self.has_private() {
            if self.eps.is_empty() {
                return bad("eps is empty but a private algorithm is selected".into());
            }
            for (i, &e) in self.eps.iter().enumerate() {
                if !(e > 0.0 && e.is_finite()) {
                    return bad(format!("eps[{i}] = {e} must be positive and finite"));
                }
            }
        }
        if self.algorithms.contains(&Algorithm::DpscObj) {
            if self.deltas.is_empty() {
                return bad("deltas is empty but dpsc_obj is selected".into());
            }
            for (i, &d) in self.deltas.iter().enumerate() {
                if !(0.0..1.0).contains(&d) {
                    return bad(format!("deltas[{i}] = {d} must lie in [0, 1)"));
                }
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("c = {c} must be positive and finite"));
            }
        }
        self.model
            .validate()
            .map_err(|e| HarnessError::Config(format!("model: {e}")))
    }
}
