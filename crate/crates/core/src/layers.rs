//! Whitening and pooling layers built on the differentiable
//! eigendecomposition: ZCA whitening with running statistics (covariance- and
//! subspace-tracking variants) and stateless second-order pooling.
//!
//! A forward call returns its output together with a context holding
//! everything the matching [`zca_backward`] needs. One state instance is not
//! meant to be shared across threads; distinct states are independent.

use std::cell::RefCell;

use crate::eig::{covariance_of_centered, eig_sym, DataMatrix, EigenDecomp, SymMatrix};
use crate::error::{Error, Result};
use crate::grad::{
    backward_eig, pi_eigenvector_gradient, BackwardMethod, BackwardVariant, BreakCondition,
    BreakConfig, DeflationReport, GradSeed,
};
use nalgebra::{DMatrix, DVector};

/// Spectral function f applied to the eigenvalues when assembling the
/// transformation matrix S = V f(Λ) Vᵀ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralMap {
    /// f(λ) = λ^(−1/2): whitening.
    InverseSqrt,
    /// f(λ) = λ^α: covariance pooling.
    Power { alpha: f64 },
    /// f(λᵢ) = λᵢ^α / √(Σₖ λₖ^{2α}): normalized covariance pooling.
    NormalizedPower { alpha: f64 },
}

impl SpectralMap {
    fn apply(&self, values: &DVector<f64>) -> DVector<f64> {
        match *self {
            SpectralMap::InverseSqrt => values.map(|v| 1.0 / v.sqrt()),
            SpectralMap::Power { alpha } => values.map(|v| v.powf(alpha)),
            SpectralMap::NormalizedPower { alpha } => {
                let powers = values.map(|v| v.powf(alpha));
                let scale = powers.norm();
                powers / scale
            }
        }
    }

    /// Pulls a gradient on f(Λ) back to a gradient on Λ.
    fn value_grads(&self, values: &DVector<f64>, grad_f: &DVector<f64>) -> DVector<f64> {
        match *self {
            SpectralMap::InverseSqrt => DVector::from_fn(values.len(), |i, _| {
                -0.5 * values[i].powf(-1.5) * grad_f[i]
            }),
            SpectralMap::Power { alpha } => DVector::from_fn(values.len(), |i, _| {
                alpha * values[i].powf(alpha - 1.0) * grad_f[i]
            }),
            SpectralMap::NormalizedPower { alpha } => {
                let powers = values.map(|v| v.powf(alpha));
                let scale = powers.norm();
                let coupled = grad_f.dot(&powers) / (scale * scale);
                DVector::from_fn(values.len(), |i, _| {
                    alpha * values[i].powf(alpha - 1.0) / scale * (grad_f[i] - powers[i] * coupled)
                })
            }
        }
    }
}

/// V f(Λ) Vᵀ, symmetrized exactly.
pub fn spectral_transform(decomp: &EigenDecomp, map: &SpectralMap) -> DMatrix<f64> {
    let f = map.apply(decomp.values());
    let scaled = decomp.vectors() * DMatrix::from_diagonal(&f);
    let raw = scaled * decomp.vectors().transpose();
    let d = raw.nrows();
    let mut sym = DMatrix::zeros(d, d);
    for i in 0..d {
        sym[(i, i)] = raw[(i, i)];
        for j in (i + 1)..d {
            let avg = 0.5 * (raw[(i, j)] + raw[(j, i)]);
            sym[(i, j)] = avg;
            sym[(j, i)] = avg;
        }
    }
    sym
}

/// Configuration of the deflation-based whitening forward pass.
#[derive(Debug, Clone, Copy)]
pub struct PiConfig {
    /// Power-iteration steps per eigenvector; also the number of terms in the
    /// unrolled backward sum (K + 1 against a degree-K expansion).
    pub iterations: usize,
    pub epsilon: f64,
    pub breaking: BreakConfig,
}

impl PiConfig {
    pub fn new(iterations: usize, epsilon: f64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidInput(
                "power-iteration count must be at least 1".into(),
            ));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            iterations,
            epsilon,
            breaking: BreakConfig::standard(epsilon),
        })
    }
}

impl Default for PiConfig {
    fn default() -> Self {
        Self::new(10, 0.01).expect("default PI config is valid")
    }
}

/// Second-order pooling configuration: exponent α (default 1/2), optional
/// spectrum normalization, diagonal shift ε.
#[derive(Debug, Clone, Copy)]
pub struct PoolingConfig {
    pub alpha: f64,
    pub normalized: bool,
    pub epsilon: f64,
}

impl PoolingConfig {
    pub fn new(alpha: f64, normalized: bool, epsilon: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "pooling exponent must be positive, got {alpha}"
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            alpha,
            normalized,
            epsilon,
        })
    }
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            normalized: false,
            epsilon: 0.01,
        }
    }
}

/// ZCA whitening layer state: running mean and covariance (covariance-route
/// training), running subspace (deflation-route training), affine parameters
/// γ/β and the momentum of the exponential averages.
#[derive(Debug)]
pub struct ZcaState {
    dim: usize,
    running_mean: DVector<f64>,
    running_cov: DMatrix<f64>,
    running_subspace: DMatrix<f64>,
    gamma: DVector<f64>,
    beta: DVector<f64>,
    momentum: f64,
    epsilon: f64,
    cov_updates: usize,
    subspace_updates: usize,
    eval_transform: RefCell<Option<DMatrix<f64>>>,
}

impl ZcaState {
    /// Fresh state: E_μ = 0, E_M = E_S = I, γ = 1, β = 0.
    pub fn new(dim: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !momentum.is_finite() || momentum <= 0.0 || momentum > 1.0 {
            return Err(Error::InvalidInput(format!(
                "momentum must lie in (0, 1], got {momentum}"
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self {
            dim,
            running_mean: DVector::zeros(dim),
            running_cov: DMatrix::identity(dim, dim),
            running_subspace: DMatrix::identity(dim, dim),
            gamma: DVector::from_element(dim, 1.0),
            beta: DVector::zeros(dim),
            momentum,
            epsilon,
            cov_updates: 0,
            subspace_updates: 0,
            eval_transform: RefCell::new(None),
        })
    }

    /// Momentum 0.1, ε = 0.01.
    pub fn with_defaults(dim: usize) -> Result<Self> {
        Self::new(dim, 0.1, 0.01)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn running_mean(&self) -> &DVector<f64> {
        &self.running_mean
    }

    pub fn running_cov(&self) -> &DMatrix<f64> {
        &self.running_cov
    }

    pub fn running_subspace(&self) -> &DMatrix<f64> {
        &self.running_subspace
    }

    pub fn set_affine(&mut self, gamma: DVector<f64>, beta: DVector<f64>) -> Result<()> {
        if gamma.len() != self.dim || beta.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "affine parameters of length {}/{} do not match dimension {}",
                gamma.len(),
                beta.len(),
                self.dim
            )));
        }
        if gamma.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("affine parameters must be finite".into()));
        }
        self.gamma = gamma;
        self.beta = beta;
        Ok(())
    }

    /// Overrides the running statistics, e.g. when restoring a checkpoint.
    /// Marks the state as trained for evaluation purposes.
    pub fn set_statistics(&mut self, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<()> {
        if mean.len() != self.dim || cov.nrows() != self.dim || cov.ncols() != self.dim {
            return Err(Error::ShapeMismatch(
                "statistics do not match the layer dimension".into(),
            ));
        }
        self.running_mean = mean;
        self.running_cov = cov;
        self.cov_updates += 1;
        *self.eval_transform.borrow_mut() = None;
        Ok(())
    }

    /// Training forward pass of the covariance-tracking whitening layer.
    ///
    /// Computes M = X̃X̃ᵀ + εI, its eigendecomposition with eigenvalues
    /// clamped to ε, whitens with S = VΛ^(−1/2)Vᵀ, updates the running mean
    /// and covariance, and applies the affine parameters. The `method` only
    /// selects the backward rule; the PI-deflation variant has its own
    /// forward pass in [`ZcaState::pi_forward_train`].
    pub fn forward_train(
        &mut self,
        x: &DataMatrix,
        method: &BackwardMethod,
    ) -> Result<(DataMatrix, ZcaContext)> {
        if matches!(method.variant(), BackwardVariant::PiDeflation { .. }) {
            return Err(Error::InvalidInput(
                "the deflation route has its own forward pass: pi_forward_train".into(),
            ));
        }
        self.check_batch(x)?;
        let (centered, mean) = x.centered();
        let m = covariance_of_centered(&centered, self.epsilon)?;
        let decomp = eig_sym(&m)?.clamped(self.epsilon);
        let transform = spectral_transform(&decomp, &SpectralMap::InverseSqrt);
        let pre_affine = &transform * &centered;
        let output = self.apply_affine(&pre_affine);

        let m_factor = self.momentum;
        self.running_mean = m_factor * &mean + (1.0 - m_factor) * &self.running_mean;
        self.running_cov = m_factor * m.entries() + (1.0 - m_factor) * &self.running_cov;
        self.cov_updates += 1;
        *self.eval_transform.borrow_mut() = None;

        let ctx = ZcaContext::Spectral(SpectralContext {
            x_centered: centered,
            decomp,
            transform,
            pre_affine,
            map: SpectralMap::InverseSqrt,
            method: *method,
            gamma: Some(self.gamma.clone()),
        });
        Ok((DataMatrix::new(output)?, ctx))
    }

    /// Training forward pass of the subspace-tracking whitening layer.
    ///
    /// Runs power iteration plus deflation over the eigenvectors, estimating
    /// each eigenvalue as a Rayleigh quotient and stopping on the standard
    /// conditions (small eigenvalue, Rayleigh drift, saturated energy). The
    /// whitening matrix is assembled from the kept rank only; the running
    /// subspace average tracks S itself rather than the covariance.
    pub fn pi_forward_train(
        &mut self,
        x: &DataMatrix,
        cfg: &PiConfig,
    ) -> Result<(DataMatrix, ZcaContext)> {
        self.check_batch(x)?;
        let (centered, mean) = x.centered();
        let m = covariance_of_centered(&centered, cfg.epsilon)?;
        let decomp = eig_sym(&m)?;
        let d = self.dim;

        let values = decomp.values();
        let total_energy: f64 = values.iter().sum();
        let mut deflated = m.entries().clone();
        let mut steps: Vec<PiStep> = Vec::new();
        let mut rayleigh_log = Vec::new();
        let mut stopped_by = None;
        let mut cumulative = 0.0;

        for i in 0..d {
            let mut v: DVector<f64> = decomp.vectors().column(i).into_owned();
            // Nominal refinement: with the eigensolver output as the start
            // vector this is a fixed point up to deflation round-off, but it
            // is part of the unrolled graph the backward pass differentiates.
            for _ in 0..cfg.iterations {
                let image = &deflated * &v;
                let norm = image.norm();
                if norm < 1e-30 {
                    break;
                }
                v = image / norm;
            }
            let image = &deflated * &v;
            let lambda_tilde = v.dot(&image);
            rayleigh_log.push(lambda_tilde);
            cumulative += values[i];
            let energy = cumulative / total_energy;

            let rejected = if values[i] <= cfg.breaking.min_eigenvalue {
                Some(BreakCondition::SmallEigenvalue)
            } else if ((lambda_tilde - values[i]) / values[i]).abs() >= cfg.breaking.rayleigh_tol {
                Some(BreakCondition::RayleighDeviation)
            } else {
                None
            };
            if let Some(cond) = rejected {
                if i == 0 {
                    // Rank floor of one, matching the initialization of the
                    // deflation loop.
                    steps.push(PiStep {
                        deflated: deflated.clone(),
                        vector: v,
                        rayleigh: lambda_tilde,
                    });
                }
                stopped_by = Some(cond);
                break;
            }

            steps.push(PiStep {
                deflated: deflated.clone(),
                vector: v.clone(),
                rayleigh: lambda_tilde,
            });
            deflated -= &image * v.transpose();

            if energy >= cfg.breaking.energy_threshold {
                stopped_by = Some(BreakCondition::EnergySaturated);
                break;
            }
        }

        let mut transform = DMatrix::zeros(d, d);
        for step in &steps {
            transform += 1.0 / step.rayleigh.sqrt() * &step.vector * step.vector.transpose();
        }
        let pre_affine = &transform * &centered;
        let output = self.apply_affine(&pre_affine);

        let m_factor = self.momentum;
        self.running_mean = m_factor * &mean + (1.0 - m_factor) * &self.running_mean;
        self.running_subspace = m_factor * &transform + (1.0 - m_factor) * &self.running_subspace;
        self.subspace_updates += 1;

        let rank = steps.len();
        let ctx = ZcaContext::Pi(PiLayerContext {
            x_centered: centered,
            steps,
            pre_affine,
            iterations: cfg.iterations,
            gamma: Some(self.gamma.clone()),
            report: DeflationReport {
                rayleigh: rayleigh_log,
                rank,
                stopped_by,
            },
        });
        Ok((DataMatrix::new(output)?, ctx))
    }

    /// Evaluation forward pass: whitens with the transform derived from the
    /// running covariance average and centers with the running mean. The
    /// transform is computed lazily and cached until the statistics change.
    pub fn forward_eval(&self, x: &DataMatrix) -> Result<DataMatrix> {
        if self.cov_updates == 0 {
            return Err(Error::State(
                "evaluation requested before any training update of the running covariance".into(),
            ));
        }
        if x.features() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "batch has {} features, layer expects {}",
                x.features(),
                self.dim
            )));
        }
        if self.eval_transform.borrow().is_none() {
            let m = SymMatrix::from_matrix(&self.running_cov, 0.0)?;
            let decomp = eig_sym(&m)?.clamped(self.epsilon);
            let transform = spectral_transform(&decomp, &SpectralMap::InverseSqrt);
            *self.eval_transform.borrow_mut() = Some(transform);
        }
        let cache = self.eval_transform.borrow();
        let transform = cache.as_ref().expect("cache filled above");

        let mut centered = x.as_matrix().clone();
        for j in 0..centered.ncols() {
            for i in 0..centered.nrows() {
                centered[(i, j)] -= self.running_mean[i];
            }
        }
        let output = self.apply_affine(&(transform * centered));
        DataMatrix::new(output)
    }

    fn apply_affine(&self, pre_affine: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = pre_affine.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] = self.gamma[i] * out[(i, j)] + self.beta[i];
            }
        }
        out
    }

    fn check_batch(&self, x: &DataMatrix) -> Result<()> {
        if x.features() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "batch has {} features, layer expects {}",
                x.features(),
                self.dim
            )));
        }
        if x.samples() < 2 {
            return Err(Error::InvalidInput(
                "whitening needs at least 2 samples per batch".into(),
            ));
        }
        Ok(())
    }
}

/// Per-eigenvector snapshot of the deflation loop: the matrix the eigenvector
/// was extracted from, the (possibly refined) vector and its Rayleigh value.
#[derive(Debug, Clone)]
struct PiStep {
    deflated: DMatrix<f64>,
    vector: DVector<f64>,
    rayleigh: f64,
}

/// Backward context of the spectral (eigendecomposition) forward passes.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    x_centered: DMatrix<f64>,
    decomp: EigenDecomp,
    transform: DMatrix<f64>,
    pre_affine: DMatrix<f64>,
    map: SpectralMap,
    method: BackwardMethod,
    gamma: Option<DVector<f64>>,
}

/// Backward context of the deflation forward pass.
#[derive(Debug, Clone)]
pub struct PiLayerContext {
    x_centered: DMatrix<f64>,
    steps: Vec<PiStep>,
    pre_affine: DMatrix<f64>,
    iterations: usize,
    gamma: Option<DVector<f64>>,
    report: DeflationReport,
}

/// Cached context tying a backward call to its matching forward call.
#[derive(Debug, Clone)]
pub enum ZcaContext {
    Spectral(SpectralContext),
    Pi(PiLayerContext),
}

impl ZcaContext {
    /// The transformation matrix S the forward pass applied.
    pub fn transform(&self) -> DMatrix<f64> {
        match self {
            ZcaContext::Spectral(ctx) => ctx.transform.clone(),
            ZcaContext::Pi(ctx) => {
                let d = ctx.x_centered.nrows();
                let mut s = DMatrix::zeros(d, d);
                for step in &ctx.steps {
                    s += 1.0 / step.rayleigh.sqrt() * &step.vector * step.vector.transpose();
                }
                s
            }
        }
    }

    pub fn deflation_report(&self) -> Option<&DeflationReport> {
        match self {
            ZcaContext::Spectral(_) => None,
            ZcaContext::Pi(ctx) => Some(&ctx.report),
        }
    }
}

/// Gradients of a whitening or pooling layer: with respect to the input batch
/// and, when the layer has affine parameters, to γ and β. `grad_covariance`
/// is the intermediate ∂L/∂M produced by the backward method — the place
/// where near-equal eigenvalues blow the analytic rule up, and what the
/// explosion bench inspects. `degenerate` marks an analytic backward pass
/// that met a repeated eigenvalue.
#[derive(Debug, Clone)]
pub struct ZcaGradients {
    pub grad_input: DMatrix<f64>,
    pub grad_covariance: DMatrix<f64>,
    pub grad_gamma: Option<DVector<f64>>,
    pub grad_beta: Option<DVector<f64>>,
    pub degenerate: bool,
}

/// Backward pass through a cached forward context.
///
/// Chains the affine parameters, the product with S, the spectral function
/// f(Λ), the eigendecomposition backward of the context's method, the Gram
/// product X̃X̃ᵀ and the mean centering.
pub fn zca_backward(ctx: &ZcaContext, grad_output: &DMatrix<f64>) -> Result<ZcaGradients> {
    match ctx {
        ZcaContext::Spectral(ctx) => spectral_backward(ctx, grad_output),
        ZcaContext::Pi(ctx) => pi_backward(ctx, grad_output),
    }
}

fn spectral_backward(ctx: &SpectralContext, grad_output: &DMatrix<f64>) -> Result<ZcaGradients> {
    let (grad_pre, grad_gamma, grad_beta) =
        affine_backward(grad_output, &ctx.pre_affine, ctx.gamma.as_ref())?;

    let grad_s = &grad_pre * ctx.x_centered.transpose();
    let direct = &ctx.transform * &grad_pre;

    let f = ctx.map.apply(ctx.decomp.values());
    let sym_gs = &grad_s + grad_s.transpose();
    let grad_vectors = &sym_gs * ctx.decomp.vectors() * DMatrix::from_diagonal(&f);
    let projected = ctx.decomp.vectors().transpose() * &grad_s * ctx.decomp.vectors();
    let grad_f = projected.diagonal();
    let grad_values = ctx.map.value_grads(ctx.decomp.values(), &grad_f);

    let seed = GradSeed::new(grad_vectors, grad_values)?;
    let eig_grad = backward_eig(&ctx.decomp, &seed, &ctx.method)?;
    let dm = eig_grad.matrix;

    let grad_centered = direct + (&dm + dm.transpose()) * &ctx.x_centered;
    Ok(ZcaGradients {
        grad_input: remove_row_means(&grad_centered),
        grad_covariance: dm,
        grad_gamma,
        grad_beta,
        degenerate: eig_grad.degenerate,
    })
}

fn pi_backward(ctx: &PiLayerContext, grad_output: &DMatrix<f64>) -> Result<ZcaGradients> {
    let (grad_pre, grad_gamma, grad_beta) =
        affine_backward(grad_output, &ctx.pre_affine, ctx.gamma.as_ref())?;

    let grad_s = &grad_pre * ctx.x_centered.transpose();
    let d = ctx.x_centered.nrows();
    let mut transform = DMatrix::zeros(d, d);
    for step in &ctx.steps {
        transform += 1.0 / step.rayleigh.sqrt() * &step.vector * step.vector.transpose();
    }
    let direct = transform * &grad_pre;

    let sym_gs = &grad_s + grad_s.transpose();
    let mut dm = DMatrix::zeros(d, d);
    for step in &ctx.steps {
        let f = 1.0 / step.rayleigh.sqrt();
        let grad_v = &sym_gs * &step.vector * f;
        dm += pi_eigenvector_gradient(&step.deflated, &step.vector, &grad_v, ctx.iterations);
        let grad_lambda = -0.5
            * step.rayleigh.powf(-1.5)
            * step.vector.dot(&(&grad_s * &step.vector));
        dm += grad_lambda * &step.vector * step.vector.transpose();
    }

    let grad_centered = direct + (&dm + dm.transpose()) * &ctx.x_centered;
    Ok(ZcaGradients {
        grad_input: remove_row_means(&grad_centered),
        grad_covariance: dm,
        grad_gamma,
        grad_beta,
        degenerate: false,
    })
}

type AffineBackward = (DMatrix<f64>, Option<DVector<f64>>, Option<DVector<f64>>);

fn affine_backward(
    grad_output: &DMatrix<f64>,
    pre_affine: &DMatrix<f64>,
    gamma: Option<&DVector<f64>>,
) -> Result<AffineBackward> {
    if grad_output.shape() != pre_affine.shape() {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient is {}x{}, forward output was {}x{}",
            grad_output.nrows(),
            grad_output.ncols(),
            pre_affine.nrows(),
            pre_affine.ncols()
        )));
    }
    match gamma {
        Some(gamma) => {
            let d = grad_output.nrows();
            let mut grad_gamma = DVector::zeros(d);
            let mut grad_beta = DVector::zeros(d);
            let mut grad_pre = grad_output.clone();
            for i in 0..d {
                for j in 0..grad_output.ncols() {
                    grad_gamma[i] += grad_output[(i, j)] * pre_affine[(i, j)];
                    grad_beta[i] += grad_output[(i, j)];
                    grad_pre[(i, j)] *= gamma[i];
                }
            }
            Ok((grad_pre, Some(grad_gamma), Some(grad_beta)))
        }
        None => Ok((grad_output.clone(), None, None)),
    }
}

fn remove_row_means(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols() as f64;
    let mut out = m.clone();
    for i in 0..m.nrows() {
        let mean: f64 = (0..m.ncols()).map(|j| m[(i, j)]).sum::<f64>() / n;
        for j in 0..m.ncols() {
            out[(i, j)] -= mean;
        }
    }
    out
}

/// Second-order pooling: output = V f(Λ) Vᵀ X̃ with f(λ) = λ^α, optionally
/// normalized over the spectrum. Stateless — no running statistics, no
/// affine parameters. The context routes the backward pass through the
/// default Taylor rule at the layer's ε.
pub fn sop_forward(x: &DataMatrix, cfg: &PoolingConfig) -> Result<(DataMatrix, ZcaContext)> {
    PoolingConfig::new(cfg.alpha, cfg.normalized, cfg.epsilon)?;
    if x.samples() < 2 {
        return Err(Error::InvalidInput(
            "pooling needs at least 2 samples per batch".into(),
        ));
    }
    let (centered, _) = x.centered();
    let m = covariance_of_centered(&centered, cfg.epsilon)?;
    let decomp = eig_sym(&m)?.clamped(cfg.epsilon);
    let map = if cfg.normalized {
        SpectralMap::NormalizedPower { alpha: cfg.alpha }
    } else {
        SpectralMap::Power { alpha: cfg.alpha }
    };
    let transform = spectral_transform(&decomp, &map);
    let pre_affine = &transform * &centered;
    let output = DataMatrix::new(pre_affine.clone())?;
    let backward_epsilon = if cfg.epsilon > 0.0 { cfg.epsilon } else { 0.01 };
    let ctx = ZcaContext::Spectral(SpectralContext {
        x_centered: centered,
        decomp,
        transform,
        pre_affine,
        map,
        method: BackwardMethod::taylor(9, backward_epsilon)?,
        gamma: None,
    });
    Ok((output, ctx))
}

/// Splits the feature rows into `groups` equal contiguous blocks, one
/// whitening problem per block.
pub fn split_feature_groups(x: &DataMatrix, groups: usize) -> Result<Vec<DataMatrix>> {
    if groups == 0 || x.features() % groups != 0 {
        return Err(Error::InvalidInput(format!(
            "{} features cannot be split into {} equal groups",
            x.features(),
            groups
        )));
    }
    let size = x.features() / groups;
    let mut parts = Vec::with_capacity(groups);
    for g in 0..groups {
        parts.push(DataMatrix::new(x.as_matrix().rows(g * size, size).into_owned())?);
    }
    Ok(parts)
}

/// Stacks group outputs back into a single feature matrix.
pub fn concat_feature_groups(parts: &[DataMatrix]) -> Result<DataMatrix> {
    if parts.is_empty() {
        return Err(Error::InvalidInput("no groups to concatenate".into()));
    }
    let samples = parts[0].samples();
    if parts.iter().any(|p| p.samples() != samples) {
        return Err(Error::ShapeMismatch(
            "groups disagree on the sample count".into(),
        ));
    }
    let total: usize = parts.iter().map(|p| p.features()).sum();
    let mut out = DMatrix::zeros(total, samples);
    let mut row = 0;
    for part in parts {
        for i in 0..part.features() {
            for j in 0..samples {
                out[(row + i, j)] = part.as_matrix()[(i, j)];
            }
        }
        row += part.features();
    }
    DataMatrix::new(out)
}
