//! Grid expansion and parallel execution of sweeps.

use dpsc_core::bounds::{bound_nonprivate, bound_thm2, bound_thm4, spectral_norm, BoundInputs};
use dpsc_core::datagen::{generate_linear_panel, LatentModelSpec, LinearDataset};
use dpsc_core::objective::default_c;
use dpsc_core::{
    rmse_post, sc_fit_predict, split, validate_bounds, DonorPanel, DpscError, DpscObjConfig, DpscOutConfig,
    ObjectivePerturbation, OutputPerturbation, TargetSeries,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate, AggregateRow};
use crate::config::{Algorithm, DatasetMode, LambdaMode, SweepConfig};
use crate::error::{HarnessError, Result};

const DATASET_STREAM: u64 = u64::MAX;
const FRESH_DATASET_STREAM: u64 = u64::MAX - 1;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the RNG stream for `(stream, index)` under `master`. Depends only
/// on its arguments, so results do not depend on scheduling.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

/// Seed of the dataset shared by size `size_index` in fixed mode.
pub fn dataset_seed(master: u64, size_index: usize) -> u64 {
    derive_seed(master, DATASET_STREAM, size_index as u64)
}

/// Seed of the dataset of cell `cell_index` in fresh mode.
pub fn fresh_dataset_seed(master: u64, cell_index: usize) -> u64 {
    derive_seed(master, FRESH_DATASET_STREAM, cell_index as u64)
}

/// Seed of repetition `rep` of cell `cell_index`.
pub fn rep_seed(master: u64, cell_index: usize, rep: usize) -> u64 {
    derive_seed(master, cell_index as u64, rep as u64)
}

/// Splits a total budget into `(eps1, eps2)`.
pub fn split_budget(eps: f64, eps_split: f64) -> (f64, f64) {
    let eps1 = eps * eps_split;
    (eps1, eps - eps1)
}

/// One grid point: an algorithm with all of its parameters fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub size_index: usize,
    pub algorithm: Algorithm,
    pub n: usize,
    pub t0: usize,
    pub periods: usize,
    pub lambda: f64,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub delta: Option<f64>,
    pub c: Option<f64>,
}

/// Expands the grid in the order sizes, algorithms, lambdas, eps, deltas.
/// The nonprivate baseline varies only with lambda; output perturbation
/// ignores deltas.
pub fn expand_cells(cfg: &SweepConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for (size_index, size) in cfg.sizes.iter().enumerate() {
        let periods = size.t0 + cfg.horizon;
        for &algorithm in &cfg.algorithms {
            for &l in &cfg.lambdas {
                let lambda = match cfg.lambda_mode {
                    LambdaMode::Absolute => l,
                    LambdaMode::PerT0 => l * size.t0 as f64,
                };
                let mut push = |eps: Option<(f64, f64)>, delta: Option<f64>, c: Option<f64>| {
                    cells.push(Cell {
                        index: cells.len(),
                        size_index,
                        algorithm,
                        n: size.n,
                        t0: size.t0,
                        periods,
                        lambda,
                        eps1: eps.map(|e| e.0),
                        eps2: eps.map(|e| e.1),
                        delta,
                        c,
                    })
                };
                match algorithm {
                    Algorithm::Nonprivate => push(None, None, None),
                    Algorithm::DpscOut => {
                        for &e in &cfg.eps {
                            push(Some(split_budget(e, cfg.eps_split)), Some(0.0), None);
                        }
                    }
                    Algorithm::DpscObj => {
                        let c = cfg.c.unwrap_or_else(|| default_c(size.n, size.t0));
                        for &e in &cfg.eps {
                            for &d in &cfg.deltas {
                                push(Some(split_budget(e, cfg.eps_split)), Some(d), Some(c));
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

/// One repetition of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub t0: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    pub lambda: f64,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub delta: Option<f64>,
    pub c: Option<f64>,
    pub rep: usize,
    pub seed: u64,
    pub rmse_pre: f64,
    pub rmse_post: f64,
    pub bounded: bool,
    pub theory_bound: Option<f64>,
    pub eps0: Option<f64>,
    pub delta_reg: Option<f64>,
}

enum Mechanism {
    Nonprivate { coeffs: DVector<f64>, prediction: DVector<f64> },
    Out(OutputPerturbation),
    Obj(ObjectivePerturbation),
}

/// A cell bound to its dataset, with the deterministic work done once.
pub struct PreparedCell {
    cell: Cell,
    mechanism: Mechanism,
    x_pre: nalgebra::DMatrix<f64>,
    m_pre: DVector<f64>,
    m_post: DVector<f64>,
    bounded: bool,
    theory_bound: Option<f64>,
}

fn missing_truth() -> HarnessError {
    HarnessError::Config("dataset has no ground-truth signal; RMSE needs the noiseless series".into())
}

impl PreparedCell {
    /// `sigma2` and `s` describe the observation noise and feed the theory
    /// bound only.
    pub fn new(cell: Cell, panel: &DonorPanel, target: &TargetSeries, sigma2: f64, s: f64) -> Result<Self> {
        let m_pre = target.signal_pre().ok_or_else(missing_truth)?;
        let m_post = target.signal_post().ok_or_else(missing_truth)?;
        let truth = panel.truth().ok_or_else(missing_truth)?;
        let (fit, prediction) = sc_fit_predict(panel, target, cell.lambda)?;

        let mut inputs = BoundInputs::new(cell.n, cell.t0, cell.periods, cell.lambda);
        if let (Some(eps1), Some(eps2)) = (cell.eps1, cell.eps2) {
            inputs = inputs.with_budget(eps1, eps2, cell.delta.unwrap_or(0.0), cell.c);
        }
        inputs.sigma2 = sigma2;
        inputs.s = s;
        inputs.psi = fit.coeffs.amax().max(1.0);
        inputs.m_post_norm = Some(spectral_norm(&truth.signal.columns(cell.t0, cell.periods - cell.t0).into_owned()));

        let (mechanism, theory_bound) = match cell.algorithm {
            Algorithm::Nonprivate => (
                Mechanism::Nonprivate { coeffs: fit.coeffs, prediction },
                bound_nonprivate(&inputs),
            ),
            Algorithm::DpscOut => {
                let config = DpscOutConfig {
                    lambda: cell.lambda,
                    eps1: cell.eps1.ok_or_else(|| budget_missing(&cell))?,
                    eps2: cell.eps2.ok_or_else(|| budget_missing(&cell))?,
                    release_coeffs: false,
                };
                (Mechanism::Out(OutputPerturbation::new(panel, target, config)?), bound_thm2(&inputs))
            }
            Algorithm::DpscObj => {
                let config = DpscObjConfig {
                    lambda: cell.lambda,
                    eps1: cell.eps1.ok_or_else(|| budget_missing(&cell))?,
                    eps2: cell.eps2.ok_or_else(|| budget_missing(&cell))?,
                    delta: cell.delta.unwrap_or(0.0),
                    c: cell.c,
                    release_coeffs: false,
                };
                (Mechanism::Obj(ObjectivePerturbation::new(panel, target, config)?), bound_thm4(&inputs))
            }
        };
        Ok(Self {
            cell,
            mechanism,
            x_pre: split(panel).0,
            m_pre,
            m_post,
            bounded: validate_bounds(panel, target).bounded(),
            theory_bound: theory_bound.is_finite().then_some(theory_bound),
        })
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    /// Runs one repetition with an RNG seeded from `seed`.
    pub fn run(&self, rep: usize, seed: u64) -> Result<SweepRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (coeffs, prediction, eps0, delta_reg) = match &self.mechanism {
            Mechanism::Nonprivate { coeffs, prediction } => (coeffs.clone(), prediction.clone(), None, None),
            Mechanism::Out(m) => {
                let r = m.release(&mut rng)?;
                (r.fit.coeffs, r.prediction, None, None)
            }
            Mechanism::Obj(m) => {
                let r = m.release(&mut rng)?;
                let b = m.branch();
                (r.fit.coeffs, r.prediction, Some(b.eps0), Some(b.delta_reg))
            }
        };
        let fitted_pre = self.x_pre.tr_mul(&coeffs);
        let c = &self.cell;
        Ok(SweepRecord {
            algorithm: c.algorithm,
            n: c.n,
            t0: c.t0,
            periods: c.periods,
            lambda: c.lambda,
            eps1: c.eps1,
            eps2: c.eps2,
            delta: c.delta,
            c: c.c,
            rep,
            seed,
            rmse_pre: rmse_post(&fitted_pre, &self.m_pre)?,
            rmse_post: rmse_post(&prediction, &self.m_post)?,
            bounded: self.bounded,
            theory_bound: self.theory_bound,
            eps0,
            delta_reg,
        })
    }
}

fn budget_missing(cell: &Cell) -> HarnessError {
    HarnessError::Config(format!("cell {} ({}) has no privacy budget", cell.index, cell.algorithm.name()))
}

/// Generator seed of one dataset used by a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub n: usize,
    pub t0: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    pub seed: u64,
    /// Cell using this dataset in fresh mode; absent when shared by a size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<usize>,
    pub bounded: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Ordered by cell, then repetition.
    pub records: Vec<SweepRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub datasets: Vec<DatasetInfo>,
}

fn generate(cfg: &SweepConfig, n: usize, t0: usize, seed: u64) -> Result<LinearDataset> {
    Ok(generate_linear_panel(n, t0, t0 + cfg.horizon, &cfg.model, seed)?)
}

fn run_cell(cfg: &SweepConfig, cell: Cell, data: &LinearDataset) -> Result<Vec<SweepRecord>> {
    let model = &cfg.model;
    let prepared = PreparedCell::new(cell, &data.panel, &data.target, model.noise_var, model.noise_support)
        .map_err(|e| annotate(&cell, e))?;
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| prepared.run(rep, rep_seed(cfg.seed, cell.index, rep)))
        .collect()
}

fn annotate(cell: &Cell, err: HarnessError) -> HarnessError {
    match err {
        HarnessError::Core(DpscError::RankDeficient { .. } | DpscError::InvalidArgument(_)) => {
            HarnessError::Config(format!(
                "cell {} ({} n={} t0={} lambda={}): {err}",
                cell.index,
                cell.algorithm.name(),
                cell.n,
                cell.t0,
                cell.lambda
            ))
        }
        other => other,
    }
}

/// Runs every cell `reps` times. Output order and bytes are independent of
/// the number of threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let cells = expand_cells(cfg);
    let (records, datasets) = match cfg.dataset {
        DatasetMode::FixedPerSize => {
            let data = cfg
                .sizes
                .par_iter()
                .enumerate()
                .map(|(i, s)| generate(cfg, s.n, s.t0, dataset_seed(cfg.seed, i)))
                .collect::<Result<Vec<_>>>()?;
            let records = cells
                .par_iter()
                .map(|cell| run_cell(cfg, *cell, &data[cell.size_index]))
                .collect::<Result<Vec<_>>>()?;
            let infos = cfg
                .sizes
                .iter()
                .zip(&data)
                .enumerate()
                .map(|(i, (s, d))| DatasetInfo {
                    n: s.n,
                    t0: s.t0,
                    periods: s.t0 + cfg.horizon,
                    seed: dataset_seed(cfg.seed, i),
                    cell: None,
                    bounded: d.panel.is_bounded(),
                })
                .collect();
            (records, infos)
        }
        DatasetMode::FreshPerCell => {
            let out = cells
                .par_iter()
                .map(|cell| {
                    let seed = fresh_dataset_seed(cfg.seed, cell.index);
                    let data = generate(cfg, cell.n, cell.t0, seed)?;
                    let info = DatasetInfo {
                        n: cell.n,
                        t0: cell.t0,
                        periods: cell.periods,
                        seed,
                        cell: Some(cell.index),
                        bounded: data.panel.is_bounded(),
                    };
                    Ok((run_cell(cfg, *cell, &data)?, info))
                })
                .collect::<Result<Vec<_>>>()?;
            out.into_iter().unzip()
        }
    };
    let records: Vec<SweepRecord> = records.into_iter().flatten().collect();
    let aggregates = aggregate(&records);
    Ok(SweepOutput { records, aggregates, datasets })
}

/// Parameters of a single standalone run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleRun {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub eps: Option<f64>,
    pub eps_split: f64,
    pub delta: f64,
    pub c: Option<f64>,
}

/// Runs one repetition on the given data, exactly as a sweep cell would.
/// A sweep record is reproduced by passing its `seed` and the same data.
pub fn run_single(
    spec: SingleRun,
    panel: &DonorPanel,
    target: &TargetSeries,
    model: &LatentModelSpec,
    seed: u64,
) -> Result<SweepRecord> {
    let (n, t0) = (panel.n(), panel.t0());
    let budget = match (spec.algorithm, spec.eps) {
        (Algorithm::Nonprivate, _) => None,
        (_, Some(e)) => Some(split_budget(e, spec.eps_split)),
        (a, None) => {
            return Err(HarnessError::Config(format!("{} needs --eps", a.name())));
        }
    };
    let (delta, c) = match spec.algorithm {
        Algorithm::Nonprivate => (None, None),
        Algorithm::DpscOut => (Some(0.0), None),
        Algorithm::DpscObj => (Some(spec.delta), Some(spec.c.unwrap_or_else(|| default_c(n, t0)))),
    };
    let cell = Cell {
        index: 0,
        size_index: 0,
        algorithm: spec.algorithm,
        n,
        t0,
        periods: panel.periods(),
        lambda: spec.lambda,
        eps1: budget.map(|b| b.0),
        eps2: budget.map(|b| b.1),
        delta,
        c,
    };
    PreparedCell::new(cell, panel, target, model.noise_var, model.noise_support)
        .map_err(|e| annotate(&cell, e))?
        .run(0, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Size;

    fn config() -> SweepConfig {
        SweepConfig::from_json(
            r#"{"algorithms": ["nonprivate", "dpsc_out", "dpsc_obj"], "lambdas": [1, 10],
                "eps": [2, 20], "deltas": [0, 1e-6], "sizes": [{"n": 3, "t0": 5}], "reps": 2}"#,
        )
        .unwrap()
    }

    #[test]
    fn cell_counts_follow_algorithm_rules() {
        let cells = expand_cells(&config());
        // nonprivate 2, out 2x2, obj 2x2x2
        assert_eq!(cells.len(), 2 + 4 + 8);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
        let np: Vec<_> = cells.iter().filter(|c| c.algorithm == Algorithm::Nonprivate).collect();
        assert!(np.iter().all(|c| c.eps1.is_none() && c.delta.is_none() && c.c.is_none()));
        let obj = cells.iter().find(|c| c.algorithm == Algorithm::DpscObj).unwrap();
        assert_eq!(obj.c, Some(default_c(3, 5)));
        assert_eq!((obj.eps1, obj.eps2), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn per_t0_lambda_scales_by_t0() {
        let mut cfg = config();
        cfg.lambda_mode = LambdaMode::PerT0;
        cfg.sizes = vec![Size { n: 3, t0: 5 }, Size { n: 3, t0: 7 }];
        let cells = expand_cells(&cfg);
        assert_eq!(cells[0].lambda, 5.0);
        assert!(cells.iter().any(|c| c.t0 == 7 && c.lambda == 70.0));
    }

    #[test]
    fn seeds_separate_streams() {
        assert_ne!(rep_seed(1, 0, 1), rep_seed(1, 1, 0));
        assert_ne!(rep_seed(1, 0, 0), rep_seed(2, 0, 0));
        assert_ne!(dataset_seed(1, 0), rep_seed(1, 0, 0));
        assert_eq!(rep_seed(9, 4, 7), rep_seed(9, 4, 7));
    }

    #[test]
    fn budget_split_sums_exactly() {
        let (a, b) = split_budget(0.3, 0.7);
        assert_eq!(a + b, 0.3);
    }
}
