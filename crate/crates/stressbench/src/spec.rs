//! Experiment selection and parameters.

use anyhow::{bail, Result};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Eigengap,
    Explosion,
    Equivalence,
    ResidualSurface,
    Speed,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Eigengap => "eigengap",
            Experiment::Explosion => "explosion",
            Experiment::Equivalence => "equivalence",
            Experiment::ResidualSurface => "residual-surface",
            Experiment::Speed => "speed",
        }
    }
}

/// Backward method selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Analytic,
    Taylor,
    Pi,
    Clip,
}

impl MethodChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(MethodChoice::Analytic),
            "taylor" => Ok(MethodChoice::Taylor),
            "pi" => Ok(MethodChoice::Pi),
            "clip" => Ok(MethodChoice::Clip),
            other => bail!("unknown method '{other}' (expected analytic, taylor, pi or clip)"),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MethodChoice::Analytic => "analytic",
            MethodChoice::Taylor => "taylor",
            MethodChoice::Pi => "pi",
            MethodChoice::Clip => "clip",
        }
    }
}

/// Full description of one bench run. [`ExperimentSpec::new`] fills in the
/// per-experiment defaults; command-line flags override them.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub dims: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<MethodChoice>,
    /// Taylor expansion degree K; the deflation route runs K + 1 iterations.
    pub taylor_degree: usize,
    pub epsilon: f64,
    pub clip_threshold: f64,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        let dims = match experiment {
            Experiment::Eigengap => vec![6, 50, 150, 300],
            Experiment::Explosion => vec![8, 16, 32],
            Experiment::Equivalence => vec![4, 8, 16],
            Experiment::ResidualSurface => vec![],
            Experiment::Speed => vec![16, 32, 64],
        };
        let trials = match experiment {
            Experiment::Eigengap => 10_000,
            _ => 1_000,
        };
        Self {
            experiment,
            dims,
            thresholds: (10..=14).map(|p| 2.0_f64.powi(-p)).collect(),
            trials,
            seed: 42,
            methods: vec![
                MethodChoice::Analytic,
                MethodChoice::Taylor,
                MethodChoice::Pi,
                MethodChoice::Clip,
            ],
            taylor_degree: 9,
            epsilon: 0.01,
            clip_threshold: 100.0,
            out: PathBuf::from(format!("{}.csv", experiment.name())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.experiment != Experiment::ResidualSurface {
            if self.dims.is_empty() {
                bail!("at least one dimension is required");
            }
            if self.dims.iter().any(|&d| d == 0) {
                bail!("dimensions must be at least 1");
            }
        }
        if self.experiment == Experiment::Eigengap
            && self.thresholds.iter().any(|&t| !(t > 0.0) || !t.is_finite())
        {
            bail!("thresholds must be positive");
        }
        if self.experiment == Experiment::Explosion {
            if self.methods.is_empty() {
                bail!("at least one method is required");
            }
            if self.dims.iter().any(|&d| d < 4) {
                bail!("the explosion harness needs dimension >= 4 to duplicate two row pairs");
            }
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            bail!("epsilon must be positive");
        }
        if self.taylor_degree == 0 {
            bail!("K must be at least 1");
        }
        if !self.clip_threshold.is_finite() || self.clip_threshold <= 0.0 {
            bail!("clip threshold must be positive");
        }
        Ok(())
    }
}
