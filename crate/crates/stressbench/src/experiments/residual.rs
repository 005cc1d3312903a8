//! Angular-residual surface of the truncated K̃ column over the eigenvalue
//! ratios q₂ = λ₂/λ₁ and q₃ = λ₃/λ₁.

use crate::csv::CsvRow;
use crate::spec::ExperimentSpec;
use anyhow::Result;
use eigengrad::angular_residual;

/// Grid resolution: q values k/50 for k = 1..=50.
const GRID_STEPS: usize = 50;

#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub q2: f64,
    pub q3: f64,
    pub degree: usize,
    pub rho_degrees: f64,
}

impl CsvRow for ResidualRow {
    const HEADER: &'static str = "q2,q3,K,rho_degrees";

    fn render(&self) -> String {
        format!("{},{},{},{}", self.q2, self.q3, self.degree, self.rho_degrees)
    }
}

pub fn run_residual_surface(spec: &ExperimentSpec) -> Result<Vec<ResidualRow>> {
    let degree = spec.taylor_degree;
    let mut rows = Vec::new();
    for a in 1..=GRID_STEPS {
        let q2 = a as f64 / GRID_STEPS as f64;
        for b in 1..=a {
            let q3 = b as f64 / GRID_STEPS as f64;
            rows.push(ResidualRow {
                q2,
                q3,
                degree,
                rho_degrees: angular_residual(q2, q3, degree),
            });
        }
    }
    // The three extreme points worked out in closed form: the double tie at
    // half energy, the double tie under a strongly dominant eigenvalue, and
    // the near-triple tie where the residual approaches -45 degrees.
    for (q2, q3) in [
        (0.5, 0.5),
        (0.01, 0.01),
        (1.0 - 1e-6 + 1e-10, 1.0 - 1e-6),
    ] {
        rows.push(ResidualRow {
            q2,
            q3,
            degree,
            rho_degrees: angular_residual(q2, q3, degree),
        });
    }
    Ok(rows)
}
