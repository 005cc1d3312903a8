//! Gradient-explosion rates of the backward methods on batches engineered to
//! produce exactly tied eigenvalues.
//!
//! Each trial builds a random batch whose covariance has two exactly
//! repeated eigenvalue pairs carried by data directions (duplicating feature
//! rows instead would tie eigenvalues at ε, but leave their eigenvectors in
//! the null space of the batch, where upstream gradients cannot reach the
//! 1/(λᵢ−λⱼ) blow-up). A synthetic backward pass through the whitening layer
//! then either explodes (analytic rule) or stays bounded (Taylor, clipping,
//! deflation with its breaking rules). A trial fails when any gradient entry
//! is non-finite or exceeds 1e10.

use crate::csv::CsvRow;
use crate::rng::{standard_normal, tied_batch, trial_rng};
use crate::spec::{ExperimentSpec, MethodChoice};
use anyhow::Result;
use eigengrad::{zca_backward, BackwardMethod, PiConfig, ZcaState};
use rayon::prelude::*;

const GRADIENT_CAP: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct ExplosionRow {
    pub dim: usize,
    pub method: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub mean_max_abs_grad: f64,
}

impl CsvRow for ExplosionRow {
    const HEADER: &'static str = "dim,method,trials,failures,failure_rate,mean_max_abs_grad";

    fn render(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.dim,
            self.method,
            self.trials,
            self.failures,
            self.failure_rate,
            self.mean_max_abs_grad
        )
    }
}

pub fn run_explosion(spec: &ExperimentSpec) -> Result<Vec<ExplosionRow>> {
    let mut rows = Vec::new();
    for (di, &dim) in spec.dims.iter().enumerate() {
        for (mi, &method) in spec.methods.iter().enumerate() {
            let cell = (di * spec.methods.len() + mi) as u32;
            let maxima: Vec<f64> = (0..spec.trials as u32)
                .into_par_iter()
                .map(|trial| -> Result<f64> {
                    let mut rng = trial_rng(spec.seed, cell, trial);
                    let x = tied_batch(&mut rng, dim, 2 * dim);
                    let grad_out = standard_normal(&mut rng, dim, 2 * dim);
                    let mut state = ZcaState::new(dim, 0.1, spec.epsilon)?;
                    let ctx = match method {
                        MethodChoice::Analytic => {
                            state
                                .forward_train(&x, &BackwardMethod::analytic(spec.epsilon)?)?
                                .1
                        }
                        MethodChoice::Taylor => {
                            state
                                .forward_train(
                                    &x,
                                    &BackwardMethod::taylor(spec.taylor_degree, spec.epsilon)?,
                                )?
                                .1
                        }
                        MethodChoice::Clip => {
                            state
                                .forward_train(
                                    &x,
                                    &BackwardMethod::clip(spec.clip_threshold, spec.epsilon)?,
                                )?
                                .1
                        }
                        MethodChoice::Pi => {
                            let cfg =
                                PiConfig::new(spec.taylor_degree + 1, spec.epsilon)?;
                            state.pi_forward_train(&x, &cfg)?.1
                        }
                    };
                    let grads = zca_backward(&ctx, &grad_out)?;
                    let mut max_abs = 0.0_f64;
                    let mut track = |v: f64| {
                        if v.is_nan() {
                            max_abs = f64::INFINITY;
                        } else {
                            max_abs = max_abs.max(v.abs());
                        }
                    };
                    grads.grad_covariance.iter().for_each(|&v| track(v));
                    grads.grad_input.iter().for_each(|&v| track(v));
                    if let Some(g) = &grads.grad_gamma {
                        g.iter().for_each(|&v| track(v));
                    }
                    if let Some(b) = &grads.grad_beta {
                        b.iter().for_each(|&v| track(v));
                    }
                    Ok(max_abs)
                })
                .collect::<Result<Vec<_>>>()?;

            let failures = maxima.iter().filter(|&&m| !(m <= GRADIENT_CAP)).count();
            let mean = maxima.iter().sum::<f64>() / spec.trials as f64;
            rows.push(ExplosionRow {
                dim,
                method: method.label(),
                trials: spec.trials,
                failures,
                failure_rate: failures as f64 / spec.trials as f64,
                mean_max_abs_grad: mean,
            });
        }
    }
    Ok(rows)
}
