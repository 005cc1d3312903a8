//! Backward passes through the symmetric eigendecomposition.
//!
//! Four ways of turning upstream gradients (∂L/∂V, ∂L/∂Λ) into ∂L/∂M:
//!
//! * analytic — the exact gradient, whose K̃ factor 1/(λᵢ−λⱼ) blows up when
//!   eigenvalues collide;
//! * Taylor — the truncated geometric-series replacement of 1/(λᵢ−λⱼ),
//!   finite for any spectrum once eigenvalues are clamped to ε and bounded by
//!   n(K+1)/ε;
//! * power iteration with deflation — the iterative route whose gradient is
//!   algebraically the same series for the dominant eigenvector, but which
//!   accumulates round-off rank by rank;
//! * clipping — magnitude truncation of K̃, which keeps values finite but can
//!   distort the descent direction by up to 45°.
//!
//! Rescaling K̃ by its own norm is deliberately not offered: at an exact tie
//! the norm is infinite and the rescaled entries come out as ∞/∞ = NaN.

use crate::eig::{EigenDecomp, SymMatrix};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Upstream gradients with respect to the eigenvectors (d×d) and the
/// eigenvalues (length d).
#[derive(Debug, Clone)]
pub struct GradSeed {
    grad_vectors: DMatrix<f64>,
    grad_values: DVector<f64>,
}

impl GradSeed {
    pub fn new(grad_vectors: DMatrix<f64>, grad_values: DVector<f64>) -> Result<Self> {
        let d = grad_vectors.nrows();
        if grad_vectors.ncols() != d || grad_values.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "gradient seed ({}x{} vectors, {} values) is not square-consistent",
                grad_vectors.nrows(),
                grad_vectors.ncols(),
                grad_values.len()
            )));
        }
        if grad_vectors.iter().any(|v| !v.is_finite())
            || grad_values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("gradient seed must be finite".into()));
        }
        Ok(Self {
            grad_vectors,
            grad_values,
        })
    }

    /// Seed carrying a gradient for a single eigenvector and nothing else.
    pub fn for_eigenvector(dim: usize, column: usize, grad: &DVector<f64>) -> Result<Self> {
        if column >= dim || grad.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "eigenvector seed column {column} / length {} does not fit dimension {dim}",
                grad.len()
            )));
        }
        let mut gv = DMatrix::zeros(dim, dim);
        gv.set_column(column, grad);
        Self::new(gv, DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.grad_values.len()
    }

    pub fn grad_vectors(&self) -> &DMatrix<f64> {
        &self.grad_vectors
    }

    pub fn grad_values(&self) -> &DVector<f64> {
        &self.grad_values
    }
}

/// Which rule produced a [`KMatrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KtildeKind {
    Analytic,
    Taylor { degree: usize },
    Clipped { threshold: f64 },
}

/// The antisymmetric factor K̃ entering the eigenvector part of the backward
/// pass: entry (i, j) multiplies the influence of ∂L/∂vᵢ along vⱼ.
#[derive(Debug, Clone)]
pub struct KMatrix {
    entries: DMatrix<f64>,
    kind: KtildeKind,
    degenerate: bool,
}

impl KMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> KtildeKind {
        self.kind
    }

    /// True when an exactly repeated eigenvalue produced non-finite entries
    /// (analytic rule only). The entries are reported as-is, not masked.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Exact rule: entries (i, j) = 1/(λᵢ − λⱼ), zero diagonal. Equal eigenvalues
/// yield non-finite entries and set the degeneracy flag.
pub fn ktilde_analytic(values: &DVector<f64>) -> KMatrix {
    debug_assert!(is_descending(values));
    let d = values.len();
    let mut entries = DMatrix::zeros(d, d);
    let mut degenerate = false;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let e = 1.0 / (values[i] - values[j]);
            if !e.is_finite() {
                degenerate = true;
            }
            entries[(i, j)] = e;
        }
    }
    KMatrix {
        entries,
        kind: KtildeKind::Analytic,
        degenerate,
    }
}

/// Truncated geometric series: for i < j (λᵢ ≥ λⱼ) entry (i, j) is
/// (1/λᵢ)·Σ_{k=0..K}(λⱼ/λᵢ)^k and entry (j, i) its negation.
///
/// Requires every eigenvalue ≥ ε: callers clamp first, and a value below ε is
/// reported as the skipped-clamp error. Every entry is finite with magnitude
/// at most (K+1)/ε, even on exactly repeated eigenvalues.
pub fn ktilde_taylor(values: &DVector<f64>, degree: usize, epsilon: f64) -> Result<KMatrix> {
    debug_assert!(is_descending(values));
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if let Some(bad) = values.iter().position(|&v| v < epsilon) {
        return Err(Error::InvalidInput(format!(
            "eigenvalue {bad} = {} is below epsilon = {epsilon}; clamp_eigenvalues was skipped",
            values[bad]
        )));
    }
    let d = values.len();
    let mut entries = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let ratio = values[j] / values[i];
            let mut sum = 1.0;
            let mut power = 1.0;
            for _ in 0..degree {
                power *= ratio;
                sum += power;
            }
            let e = sum / values[i];
            entries[(i, j)] = e;
            entries[(j, i)] = -e;
        }
    }
    Ok(KMatrix {
        entries,
        kind: KtildeKind::Taylor { degree },
        degenerate: false,
    })
}

/// Magnitude truncation of the analytic rule: |entry| = min(1/|λᵢ−λⱼ|, t).
/// Equal eigenvalues take the full threshold with the i < j entry positive,
/// mirroring the Taylor sign convention.
pub fn ktilde_clip(values: &DVector<f64>, threshold: f64) -> KMatrix {
    debug_assert!(is_descending(values));
    assert!(
        threshold.is_finite() && threshold > 0.0,
        "clip threshold must be positive and finite"
    );
    let d = values.len();
    let mut entries = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            // Descending order makes λᵢ − λⱼ ≥ 0, so 1/(λᵢ−λⱼ) is +∞ at an
            // exact tie and min() lands on the threshold.
            let e = (1.0 / (values[i] - values[j])).min(threshold);
            entries[(i, j)] = e;
            entries[(j, i)] = -e;
        }
    }
    KMatrix {
        entries,
        kind: KtildeKind::Clipped { threshold },
        degenerate: false,
    }
}

/// Tagged backward-method choice with the shared ε hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackwardVariant {
    Analytic,
    Taylor { degree: usize },
    PiDeflation { iterations: usize },
    Clip { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardMethod {
    variant: BackwardVariant,
    epsilon: f64,
}

impl BackwardMethod {
    pub fn analytic(epsilon: f64) -> Result<Self> {
        Self::build(BackwardVariant::Analytic, epsilon)
    }

    /// Taylor expansion of degree K ≥ 1.
    pub fn taylor(degree: usize, epsilon: f64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("Taylor degree must be at least 1".into()));
        }
        Self::build(BackwardVariant::Taylor { degree }, epsilon)
    }

    /// Power iteration with deflation; `iterations` plays the role of K + 1.
    pub fn pi_deflation(iterations: usize, epsilon: f64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidInput(
                "power-iteration count must be at least 1".into(),
            ));
        }
        Self::build(BackwardVariant::PiDeflation { iterations }, epsilon)
    }

    pub fn clip(threshold: f64, epsilon: f64) -> Result<Self> {
        if !threshold.is_finite() || threshold <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "clip threshold must be positive and finite, got {threshold}"
            )));
        }
        Self::build(BackwardVariant::Clip { threshold }, epsilon)
    }

    fn build(variant: BackwardVariant, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self { variant, epsilon })
    }

    pub fn variant(&self) -> BackwardVariant {
        self.variant
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for BackwardMethod {
    /// K = 9, ε = 0.01: the stability/accuracy trade-off used throughout the
    /// stress bench.
    fn default() -> Self {
        Self {
            variant: BackwardVariant::Taylor { degree: 9 },
            epsilon: 0.01,
        }
    }
}

/// ∂L/∂M together with a flag marking analytic blow-up on a degenerate
/// spectrum.
#[derive(Debug, Clone)]
pub struct EigGradient {
    pub matrix: DMatrix<f64>,
    pub degenerate: bool,
}

/// Assembles ∂L/∂M = V((K̃ᵀ ∘ (Vᵀ ∂L/∂V)) + diag(∂L/∂Λ))Vᵀ with the K̃ of
/// the chosen method.
///
/// For the Taylor variant the eigenvalues must already be clamped to ε; the
/// analytic variant on a degenerate spectrum returns non-finite entries plus
/// the degeneracy flag rather than an error, so callers can measure the
/// blow-up. The PI-deflation variant needs the source matrix and lives in
/// [`backward_pi_deflation`].
pub fn backward_eig(
    decomp: &EigenDecomp,
    seed: &GradSeed,
    method: &BackwardMethod,
) -> Result<EigGradient> {
    let k = match method.variant() {
        BackwardVariant::Analytic => ktilde_analytic(decomp.values()),
        BackwardVariant::Taylor { degree } => {
            ktilde_taylor(decomp.values(), degree, method.epsilon())?
        }
        BackwardVariant::Clip { threshold } => ktilde_clip(decomp.values(), threshold),
        BackwardVariant::PiDeflation { .. } => {
            return Err(Error::InvalidInput(
                "PI-deflation backward needs the source matrix; call backward_pi_deflation".into(),
            ))
        }
    };
    backward_eig_with_ktilde(decomp, seed, &k)
}

/// Same assembly with a caller-built K̃ factor.
pub fn backward_eig_with_ktilde(
    decomp: &EigenDecomp,
    seed: &GradSeed,
    k: &KMatrix,
) -> Result<EigGradient> {
    let d = decomp.dim();
    if seed.dim() != d || k.dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "decomposition ({d}), seed ({}) and K matrix ({}) dimensions differ",
            seed.dim(),
            k.dim()
        )));
    }
    let v = decomp.vectors();
    let projected = v.transpose() * seed.grad_vectors();
    let mut inner = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                inner[(i, i)] = seed.grad_values()[i];
            } else {
                inner[(i, j)] = k.entries()[(j, i)] * projected[(i, j)];
            }
        }
    }
    let matrix = v * inner * v.transpose();
    Ok(EigGradient {
        degenerate: k.is_degenerate(),
        matrix,
    })
}

/// Frobenius norm of each eigenvector's contribution to the K̃ part of the
/// gradient: ‖Σⱼ K̃ᵢⱼ (vⱼᵀ ∂L/∂vᵢ) vⱼ vᵢᵀ‖_F per eigenvector i.
///
/// For the Taylor rule each of these is bounded by
/// `gradient_bound(d, K, ε, ‖∂L/∂vᵢ‖)`.
pub fn per_eigenvector_term_norms(
    decomp: &EigenDecomp,
    seed: &GradSeed,
    k: &KMatrix,
) -> Result<Vec<f64>> {
    let d = decomp.dim();
    if seed.dim() != d || k.dim() != d {
        return Err(Error::ShapeMismatch(
            "decomposition, seed and K matrix dimensions differ".into(),
        ));
    }
    let projected = decomp.vectors().transpose() * seed.grad_vectors();
    let mut norms = Vec::with_capacity(d);
    for i in 0..d {
        let mut sum = 0.0;
        for j in 0..d {
            if j == i {
                continue;
            }
            let c = k.entries()[(i, j)] * projected[(j, i)];
            sum += c * c;
        }
        norms.push(sum.sqrt());
    }
    Ok(norms)
}

/// The Taylor gradient bound n(K+1)/ε scaled by the seed norm. Independent of
/// the spectrum: only the two hyperparameters and the dimension enter.
pub fn gradient_bound(n: usize, degree: usize, epsilon: f64, seed_norm: f64) -> f64 {
    debug_assert!(epsilon > 0.0);
    (n as f64) * ((degree + 1) as f64) / epsilon * seed_norm
}

/// Loop-termination rules for the deflation pass.
///
/// An eigenpair is rejected (and the loop stops) when its eigenvalue is at
/// most `min_eigenvalue` or its Rayleigh estimate drifts from the solver
/// eigenvalue by `rayleigh_tol` relative. Once the kept eigenvalues carry at
/// least `energy_threshold` of the total, the pair is kept and the loop stops:
/// the tail carries too little energy to matter.
#[derive(Debug, Clone, Copy)]
pub struct BreakConfig {
    pub min_eigenvalue: f64,
    pub rayleigh_tol: f64,
    pub energy_threshold: f64,
}

impl BreakConfig {
    /// The standard rules: λᵢ ≤ ε, relative Rayleigh deviation ≥ 0.1, kept
    /// energy ≥ 1 − 1e-4.
    pub fn standard(epsilon: f64) -> Self {
        Self {
            min_eigenvalue: epsilon,
            rayleigh_tol: 0.1,
            energy_threshold: 1.0 - 1e-4,
        }
    }

    /// Never fires; forces a full-rank deflation pass.
    pub fn disabled() -> Self {
        Self {
            min_eigenvalue: f64::NEG_INFINITY,
            rayleigh_tol: f64::INFINITY,
            energy_threshold: f64::INFINITY,
        }
    }
}

/// Which rule ended the deflation loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakCondition {
    SmallEigenvalue,
    RayleighDeviation,
    EnergySaturated,
}

/// Per-rank record of a deflation pass: the Rayleigh eigenvalue estimates in
/// processing order, the rank that was kept, and the rule that stopped the
/// loop (`None` when it ran to full rank).
#[derive(Debug, Clone)]
pub struct DeflationReport {
    pub rayleigh: Vec<f64>,
    pub rank: usize,
    pub stopped_by: Option<BreakCondition>,
}

/// Gradient via the deflation route plus its per-rank report.
#[derive(Debug, Clone)]
pub struct PiBackward {
    pub gradient: DMatrix<f64>,
    pub report: DeflationReport,
}

/// Backward pass through K+1 unrolled power iterations per eigenvector, with
/// the deflated matrix M̃ᵢ₋₁ feeding rank i.
///
/// Each accepted eigenvector contributes the closed power sum
/// Σ_{k<iterations} M̃ᵏ(I − vvᵀ) ∂L/∂v vᵀ / ‖M̃v‖^{k+1}; eigenvalue seeds add
/// the usual ∂L/∂λᵢ·vᵢvᵢᵀ. The deflation M̃ ← M̃ − M̃vvᵀ runs in floating
/// point, so later ranks see the accumulated round-off — that drift is what
/// the report's Rayleigh column measures. Early termination is normal
/// behavior, captured in the report rather than an error.
pub fn backward_pi_deflation(
    m: &SymMatrix,
    decomp: &EigenDecomp,
    seed: &GradSeed,
    iterations: usize,
    breaking: &BreakConfig,
) -> Result<PiBackward> {
    let d = decomp.dim();
    if m.dim() != d || seed.dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "matrix ({}), decomposition ({d}) and seed ({}) dimensions differ",
            m.dim(),
            seed.dim()
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidInput(
            "power-iteration count must be at least 1".into(),
        ));
    }

    let values = decomp.values();
    let total_energy: f64 = values.iter().sum();
    let mut deflated = m.entries().clone();
    let mut gradient = DMatrix::zeros(d, d);
    let mut rayleigh = Vec::with_capacity(d);
    let mut rank = 0;
    let mut stopped_by = None;
    let mut cumulative = 0.0;

    for i in 0..d {
        let v: DVector<f64> = decomp.vectors().column(i).into_owned();
        let image = &deflated * &v;
        let lambda_tilde = v.dot(&image);
        rayleigh.push(lambda_tilde);
        cumulative += values[i];
        let energy = cumulative / total_energy;

        let rejected = if values[i] <= breaking.min_eigenvalue {
            Some(BreakCondition::SmallEigenvalue)
        } else if ((lambda_tilde - values[i]) / values[i]).abs() >= breaking.rayleigh_tol {
            Some(BreakCondition::RayleighDeviation)
        } else {
            None
        };
        if let Some(cond) = rejected {
            // The loop never keeps fewer than one pair, matching the rank
            // floor of the deflation whitening layer.
            if i == 0 {
                accumulate_rank(&mut gradient, &deflated, &v, seed, i, iterations);
                rank = 1;
            }
            stopped_by = Some(cond);
            break;
        }

        accumulate_rank(&mut gradient, &deflated, &v, seed, i, iterations);
        rank = i + 1;
        deflated -= &image * v.transpose();

        if energy >= breaking.energy_threshold {
            stopped_by = Some(BreakCondition::EnergySaturated);
            break;
        }
    }

    Ok(PiBackward {
        gradient,
        report: DeflationReport {
            rayleigh,
            rank,
            stopped_by,
        },
    })
}

fn accumulate_rank(
    gradient: &mut DMatrix<f64>,
    deflated: &DMatrix<f64>,
    v: &DVector<f64>,
    seed: &GradSeed,
    index: usize,
    iterations: usize,
) {
    let g: DVector<f64> = seed.grad_vectors().column(index).into_owned();
    *gradient += pi_eigenvector_gradient(deflated, v, &g, iterations);
    let glam = seed.grad_values()[index];
    if glam != 0.0 {
        *gradient += glam * v * v.transpose();
    }
}

/// Closed form of the unrolled power-iteration gradient for one eigenvector:
/// (Σ_{k=0}^{iterations−1} Mᵏ(I − vvᵀ)/‖Mv‖^{k+1}) g vᵀ.
pub(crate) fn pi_eigenvector_gradient(
    m: &DMatrix<f64>,
    v: &DVector<f64>,
    g: &DVector<f64>,
    iterations: usize,
) -> DMatrix<f64> {
    let d = v.len();
    if g.iter().all(|&x| x == 0.0) {
        return DMatrix::zeros(d, d);
    }
    let norm = (m * v).norm();
    let projected = g - v * v.dot(g);
    let mut term = projected / norm;
    let mut acc = term.clone();
    for _ in 1..iterations {
        term = (m * term) / norm;
        acc += &term;
    }
    acc * v.transpose()
}

fn is_descending(values: &DVector<f64>) -> bool {
    values.iter().zip(values.iter().skip(1)).all(|(a, b)| a >= b)
}
