//! Probability that a random covariance matrix has two eigenvalues closer
//! than a threshold.
//!
//! Protocol: per dimension d, draw X ∈ ℝ^{d×2d} with pixel-scale entries
//! (uniform on [0, 1)), remove the row-wise mean, form M = XXᵀ and take the
//! smallest consecutive gap of the sorted spectrum. One set of draws per
//! dimension is scored against every threshold.

use crate::csv::CsvRow;
use crate::rng::{trial_rng, uniform_unit_data};
use crate::spec::ExperimentSpec;
use anyhow::Result;
use eigengrad::{covariance, symmetric_eigenvalues};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct EigengapRow {
    pub dim: usize,
    pub threshold: f64,
    pub trials: usize,
    pub hits: usize,
    pub probability: f64,
    /// One standard deviation of the probability estimate.
    pub ci_halfwidth: f64,
}

impl CsvRow for EigengapRow {
    const HEADER: &'static str = "dim,threshold,trials,hits,probability,ci_halfwidth";

    fn render(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.dim, self.threshold, self.trials, self.hits, self.probability, self.ci_halfwidth
        )
    }
}

pub fn run_eigengap(spec: &ExperimentSpec) -> Result<Vec<EigengapRow>> {
    let mut rows = Vec::new();
    for (cell, &dim) in spec.dims.iter().enumerate() {
        let min_gaps: Vec<f64> = (0..spec.trials as u32)
            .into_par_iter()
            .map(|trial| -> Result<f64> {
                let mut rng = trial_rng(spec.seed, cell as u32, trial);
                let x = uniform_unit_data(&mut rng, dim, 2 * dim);
                let m = covariance(&x, 0.0)?;
                let values = symmetric_eigenvalues(&m)?;
                let mut min_gap = f64::INFINITY;
                for i in 1..dim {
                    min_gap = min_gap.min(values[i - 1] - values[i]);
                }
                Ok(min_gap)
            })
            .collect::<Result<Vec<_>>>()?;

        for &threshold in &spec.thresholds {
            let hits = min_gaps.iter().filter(|&&g| g < threshold).count();
            let p = hits as f64 / spec.trials as f64;
            rows.push(EigengapRow {
                dim,
                threshold,
                trials: spec.trials,
                hits,
                probability: p,
                ci_halfwidth: (p * (1.0 - p) / spec.trials as f64).sqrt(),
            });
        }
    }
    Ok(rows)
}
