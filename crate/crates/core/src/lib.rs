//! Robust differentiable eigendecomposition of symmetric positive
//! semidefinite matrices.
//!
//! The forward pass factors a covariance matrix M = VΛVᵀ; the backward pass
//! turns upstream gradients on (V, Λ) into a gradient on M by one of four
//! rules — exact analytic, truncated Taylor series, unrolled power iteration
//! with deflation, or magnitude clipping — which differ in how they treat
//! near-equal eigenvalues. On top of that sit ZCA whitening layers with
//! running statistics and a second-order pooling layer, plus independent
//! oracles (finite differences, power iteration, Rayleigh quotients, angular
//! residuals) for validating the gradients.

mod error;

pub mod eig;
pub mod grad;
pub mod layers;
pub mod oracle;

pub use error::{Error, Result};

pub use eig::{
    clamp_eigenvalues, covariance, eig_sym, symmetric_eigenvalues, DataMatrix, EigenDecomp,
    SymMatrix,
};
pub use grad::{
    backward_eig, backward_eig_with_ktilde, backward_pi_deflation, gradient_bound,
    ktilde_analytic, ktilde_clip, ktilde_taylor, per_eigenvector_term_norms, BackwardMethod,
    BackwardVariant, BreakCondition, BreakConfig, DeflationReport, EigGradient, GradSeed, KMatrix,
    KtildeKind, PiBackward,
};
pub use layers::{
    concat_feature_groups, sop_forward, spectral_transform, split_feature_groups, zca_backward,
    PiConfig, PoolingConfig, SpectralMap, ZcaContext, ZcaGradients, ZcaState,
};
pub use oracle::{angular_residual, finite_diff_grad, power_iteration, rayleigh, FdConfig};
