//! Backward-pass timing: degree-K Taylor against K+1 power iterations with
//! full-rank deflation (no early break), per matrix dimension.
//!
//! Only the backward call sits inside the timer; the forward
//! eigendecomposition is shared by both methods and dominates overall cost,
//! so it is excluded. Trials run sequentially to keep the timings clean. One
//! extra row compares the 64-dimensional backward against 16 independent
//! 4-dimensional group backwards.

use crate::csv::CsvRow;
use crate::rng::{standard_normal, standard_normal_data, trial_rng};
use crate::spec::ExperimentSpec;
use anyhow::Result;
use eigengrad::{
    backward_eig, backward_pi_deflation, covariance, eig_sym, BackwardMethod, BreakConfig,
    EigenDecomp, GradSeed, SymMatrix,
};
use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct SpeedRow {
    pub dim: usize,
    pub method: String,
    pub median_backward_seconds: f64,
    pub trials: usize,
}

impl CsvRow for SpeedRow {
    const HEADER: &'static str = "dim,method,median_backward_seconds,trials";

    fn render(&self) -> String {
        format!(
            "{},{},{},{}",
            self.dim, self.method, self.median_backward_seconds, self.trials
        )
    }
}

fn prepare(rng: &mut ChaCha8Rng, dim: usize, epsilon: f64) -> Result<(SymMatrix, EigenDecomp, GradSeed)> {
    let x = standard_normal_data(rng, dim, 2 * dim);
    let m = covariance(&x, epsilon)?;
    let decomp = eig_sym(&m)?.clamped(epsilon);
    let grad_vectors = standard_normal(rng, dim, dim);
    let grad_values = DVector::from_fn(dim, |i, _| grad_vectors[(i, i)]);
    let seed = GradSeed::new(grad_vectors, grad_values)?;
    Ok((m, decomp, seed))
}

fn median(durations: &mut [f64]) -> f64 {
    durations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    durations[durations.len() / 2]
}

pub fn run_speed(spec: &ExperimentSpec) -> Result<Vec<SpeedRow>> {
    let degree = spec.taylor_degree;
    let taylor = BackwardMethod::taylor(degree, spec.epsilon)?;
    let mut rows = Vec::new();

    for (cell, &dim) in spec.dims.iter().enumerate() {
        let mut taylor_times = Vec::with_capacity(spec.trials);
        let mut pi_times = Vec::with_capacity(spec.trials);
        for trial in 0..spec.trials as u32 {
            let mut rng = trial_rng(spec.seed, cell as u32, trial);
            let (m, decomp, seed) = prepare(&mut rng, dim, spec.epsilon)?;

            let start = Instant::now();
            let t = backward_eig(&decomp, &seed, &taylor)?;
            taylor_times.push(start.elapsed().as_secs_f64());
            std::hint::black_box(&t.matrix);

            let start = Instant::now();
            let p = backward_pi_deflation(
                &m,
                &decomp,
                &seed,
                degree + 1,
                &BreakConfig::disabled(),
            )?;
            pi_times.push(start.elapsed().as_secs_f64());
            std::hint::black_box(&p.gradient);
        }
        rows.push(SpeedRow {
            dim,
            method: "taylor".into(),
            median_backward_seconds: median(&mut taylor_times),
            trials: spec.trials,
        });
        rows.push(SpeedRow {
            dim,
            method: "pi".into(),
            median_backward_seconds: median(&mut pi_times),
            trials: spec.trials,
        });
    }

    // Grouped comparison: one 64-dim problem processed as 16 independent
    // 4-dim groups, timed as the sum of the group backwards.
    if spec.dims.contains(&64) {
        let groups = 16;
        let group_dim = 4;
        let mut grouped_times = Vec::with_capacity(spec.trials);
        for trial in 0..spec.trials as u32 {
            let mut rng = trial_rng(spec.seed, u32::MAX, trial);
            let mut parts = Vec::with_capacity(groups);
            for _ in 0..groups {
                parts.push(prepare(&mut rng, group_dim, spec.epsilon)?);
            }
            let start = Instant::now();
            for (_, decomp, seed) in &parts {
                let t = backward_eig(decomp, seed, &taylor)?;
                std::hint::black_box(&t.matrix);
            }
            grouped_times.push(start.elapsed().as_secs_f64());
        }
        rows.push(SpeedRow {
            dim: 64,
            method: format!("taylor-grouped-{group_dim}x{groups}"),
            median_backward_seconds: median(&mut grouped_times),
            trials: spec.trials,
        });
    }
    Ok(rows)
}
