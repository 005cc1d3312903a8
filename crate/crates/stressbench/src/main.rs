use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use stressbench::{Experiment, ExperimentSpec, MethodChoice};

/// Stress bench for differentiable-eigendecomposition backward passes.
/// Each subcommand runs one experiment and writes a CSV file.
#[derive(Parser)]
#[command(name = "stressbench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability of near-equal eigenvalues in random covariance matrices
    Eigengap(CommonArgs),
    /// Gradient-explosion rates per backward method on tied-spectrum batches
    Explosion(CommonArgs),
    /// Per-rank gap between the Taylor and power-iteration gradients
    Equivalence(CommonArgs),
    /// Angular residual of the truncated K column over eigenvalue ratios
    ResidualSurface(CommonArgs),
    /// Median backward time, Taylor vs power iteration with deflation
    Speed(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Comma-separated matrix dimensions
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,

    /// Comma-separated eigen-gap thresholds (eigengap experiment)
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,

    /// Trials per configuration cell
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed for the per-trial random streams
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Comma-separated backward methods: analytic,taylor,pi,clip
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,

    /// Taylor expansion degree (the deflation route runs K+1 iterations)
    #[arg(long = "K", default_value_t = 9)]
    k: usize,

    /// Diagonal shift and eigenvalue clamp
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,

    /// Magnitude cap of the clipping method
    #[arg(long, default_value_t = 100.0)]
    clip_threshold: f64,

    /// Output CSV path (default: <experiment>.csv)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_spec(experiment: Experiment, args: CommonArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(experiment);
    if let Some(dims) = args.dims {
        spec.dims = dims;
    }
    if let Some(thresholds) = args.thresholds {
        spec.thresholds = thresholds;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(methods) = args.methods {
        spec.methods = methods
            .iter()
            .map(|m| MethodChoice::parse(m))
            .collect::<Result<Vec<_>>>()?;
    }
    spec.seed = args.seed;
    spec.taylor_degree = args.k;
    spec.epsilon = args.epsilon;
    spec.clip_threshold = args.clip_threshold;
    if let Some(out) = args.out {
        spec.out = out;
    }
    Ok(spec)
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("STRESSBENCH_THREADS") {
        let threads: usize = raw
            .parse()
            .with_context(|| format!("STRESSBENCH_THREADS='{raw}' is not a thread count"))?;
        if threads == 0 {
            anyhow::bail!("STRESSBENCH_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    let spec = match cli.command {
        Command::Eigengap(args) => build_spec(Experiment::Eigengap, args)?,
        Command::Explosion(args) => build_spec(Experiment::Explosion, args)?,
        Command::Equivalence(args) => build_spec(Experiment::Equivalence, args)?,
        Command::ResidualSurface(args) => build_spec(Experiment::ResidualSurface, args)?,
        Command::Speed(args) => build_spec(Experiment::Speed, args)?,
    };
    let (path, rows) = stressbench::execute(&spec)?;
    println!("{}: wrote {rows} rows to {}", spec.experiment.name(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("stressbench: {err:#}");
            ExitCode::FAILURE
        }
    }
}
