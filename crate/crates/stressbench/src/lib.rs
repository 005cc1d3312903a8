//! Desk-scale stress bench for the differentiable-eigendecomposition
//! backward passes.
//!
//! Five experiments, each emitting one CSV file: the probability of
//! near-equal eigenvalues in random covariance matrices, gradient-explosion
//! rates per backward method on tied-spectrum batches, the per-rank gap
//! between the Taylor and power-iteration gradients, the angular-residual
//! surface of the truncated K̃ column, and backward timing medians.
//!
//! Every trial draws from its own counter-derived random stream, so results
//! are bit-identical for a fixed seed regardless of worker count or
//! scheduling (timing columns excepted).

pub mod csv;
pub mod experiments;
pub mod rng;
pub mod spec;

pub use experiments::eigengap::{run_eigengap, EigengapRow};
pub use experiments::equivalence::{run_equivalence, EquivalenceRow};
pub use experiments::explosion::{run_explosion, ExplosionRow};
pub use experiments::residual::{run_residual_surface, ResidualRow};
pub use experiments::speed::{run_speed, SpeedRow};
pub use spec::{Experiment, ExperimentSpec, MethodChoice};

use anyhow::Result;
use std::path::PathBuf;

/// Runs the spec's experiment and writes its CSV. Returns the output path
/// and the number of data rows written.
pub fn execute(spec: &ExperimentSpec) -> Result<(PathBuf, usize)> {
    spec.validate()?;
    let (header, lines) = match spec.experiment {
        Experiment::Eigengap => csv::render(run_eigengap(spec)?),
        Experiment::Explosion => csv::render(run_explosion(spec)?),
        Experiment::Equivalence => csv::render(run_equivalence(spec)?),
        Experiment::ResidualSurface => csv::render(run_residual_surface(spec)?),
        Experiment::Speed => csv::render(run_speed(spec)?),
    };
    let rows = lines.len();
    csv::write_file(&spec.out, header, &lines)?;
    Ok((spec.out.clone(), rows))
}
