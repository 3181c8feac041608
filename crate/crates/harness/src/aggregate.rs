//! Per-cell summaries with normal-approximation 95% confidence intervals.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::Algorithm;
use crate::sweep::SweepRecord;

pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
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
    pub theory_bound: Option<f64>,
    pub eps0: Option<f64>,
    pub delta_reg: Option<f64>,
    pub mean_rmse_pre: f64,
    pub min_rmse_post: f64,
    pub max_rmse_post: f64,
    pub mean_rmse_post: f64,
    /// `1.96 * sd / sqrt(reps)` with the sample standard deviation; zero
    /// for a single repetition.
    pub ci_half_width: f64,
    pub reps: usize,
}

impl AggregateRow {
    /// Total budget `eps1 + eps2`, when private.
    pub fn eps(&self) -> Option<f64> {
        Some(self.eps1? + self.eps2?)
    }

    pub fn ci_low(&self) -> f64 {
        self.mean_rmse_post - self.ci_half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean_rmse_post + self.ci_half_width
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    if xs.iter().all(|x| *x == xs[0]) {
        // Summation rounding would otherwise leave a spurious spread.
        return (xs[0], 0.0);
    }
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (k - 1.0)).sqrt())
}

pub fn ci_half_width(xs: &[f64]) -> f64 {
    let (_, sd) = mean_sd(xs);
    Z_95 * sd / (xs.len() as f64).sqrt()
}

type Key = (Algorithm, usize, usize, usize, [Option<u64>; 5]);

fn key(r: &SweepRecord) -> Key {
    let bits = |x: Option<f64>| x.map(f64::to_bits);
    (
        r.algorithm,
        r.n,
        r.t0,
        r.periods,
        [Some(r.lambda.to_bits()), bits(r.eps1), bits(r.eps2), bits(r.delta), bits(r.c)],
    )
}

/// Groups records by algorithm and grid point, in order of first appearance.
pub fn aggregate(records: &[SweepRecord]) -> Vec<AggregateRow> {
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut groups: Vec<Vec<&SweepRecord>> = Vec::new();
    for r in records {
        let slot = *index.entry(key(r)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(r);
    }
    groups
        .into_iter()
        .map(|g| {
            let first = g[0];
            let post: Vec<f64> = g.iter().map(|r| r.rmse_post).collect();
            let pre: Vec<f64> = g.iter().map(|r| r.rmse_pre).collect();
            let (mean, _) = mean_sd(&post);
            AggregateRow {
                algorithm: first.algorithm,
                n: first.n,
                t0: first.t0,
                periods: first.periods,
                lambda: first.lambda,
                eps1: first.eps1,
                eps2: first.eps2,
                delta: first.delta,
                c: first.c,
                theory_bound: first.theory_bound,
                eps0: first.eps0,
                delta_reg: first.delta_reg,
                mean_rmse_pre: mean_sd(&pre).0,
                min_rmse_post: post.iter().copied().fold(f64::INFINITY, f64::min),
                max_rmse_post: post.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_rmse_post: mean,
                ci_half_width: ci_half_width(&post),
                reps: g.len(),
            }
        })
        .collect()
}
