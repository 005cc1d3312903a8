//! Independent reference computations used to validate the backward passes:
//! central finite differences over symmetric matrices, a plain power
//! iteration, Rayleigh quotients, and the angular residual of the truncated
//! K̃ column.
//!
//! Nothing here shares code with the gradient implementations it checks.

use crate::eig::SymMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Central-difference configuration. The default step 1e-6 sits at the
/// √machine-ε scale for double precision.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { step: 1e-6 }
    }
}

/// Central finite differences of a scalar loss over a symmetric matrix.
///
/// Off-diagonal probes move the (i, j) and (j, i) entries jointly by h/2
/// each, so the result is the symmetric gradient: for L = ‖M‖²_F it returns
/// 2M, matching the convention of the eigendecomposition backward pass. The
/// loss must be deterministic and sign-stable under perturbation; a
/// non-finite loss value at any probe is reported as an oracle error.
pub fn finite_diff_grad<F>(mut loss: F, m: &SymMatrix, cfg: &FdConfig) -> Result<DMatrix<f64>>
where
    F: FnMut(&SymMatrix) -> Result<f64>,
{
    if !cfg.step.is_finite() || cfg.step <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {}",
            cfg.step
        )));
    }
    let d = m.dim();
    let h = cfg.step;
    let mut grad = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut probe = |delta: f64| -> Result<f64> {
                let mut entries = m.entries().clone();
                if i == j {
                    entries[(i, i)] += delta;
                } else {
                    entries[(i, j)] += 0.5 * delta;
                    entries[(j, i)] += 0.5 * delta;
                }
                let value = loss(&SymMatrix::from_matrix(&entries, 0.0)?)?;
                if !value.is_finite() {
                    return Err(Error::OracleProbe { row: i, col: j });
                }
                Ok(value)
            };
            let plus = probe(h)?;
            let minus = probe(-h)?;
            let slope = (plus - minus) / (2.0 * h);
            grad[(i, j)] = slope;
            grad[(j, i)] = slope;
        }
    }
    Ok(grad)
}

/// Repeated update v ← Mv/‖Mv‖ from a unit starting vector.
pub fn power_iteration(
    m: &SymMatrix,
    v0: &DVector<f64>,
    iterations: usize,
) -> Result<DVector<f64>> {
    if v0.len() != m.dim() {
        return Err(Error::ShapeMismatch(format!(
            "start vector length {} does not match dimension {}",
            v0.len(),
            m.dim()
        )));
    }
    if (v0.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(
            "power iteration expects a unit starting vector".into(),
        ));
    }
    let mut v = v0.clone();
    for _ in 0..iterations {
        let image = m.entries() * &v;
        let norm = image.norm();
        if norm < 1e-30 {
            return Err(Error::Breakdown { norm });
        }
        v = image / norm;
    }
    Ok(v)
}

/// Rayleigh quotient vᵀMv / vᵀv.
pub fn rayleigh(m: &SymMatrix, v: &DVector<f64>) -> Result<f64> {
    if v.len() != m.dim() {
        return Err(Error::ShapeMismatch(format!(
            "vector length {} does not match dimension {}",
            v.len(),
            m.dim()
        )));
    }
    let denom = v.norm_squared();
    if denom == 0.0 {
        return Err(Error::InvalidInput(
            "Rayleigh quotient of the zero vector".into(),
        ));
    }
    Ok(v.dot(&(m.entries() * v)) / denom)
}

/// Angle, in degrees, by which the degree-K truncation bends the last column
/// of a 3-eigenvalue K̃ away from its true direction.
///
/// The spectrum is parameterized by q₂ = λ₂/λ₁ and q₃ = λ₃/λ₁ with
/// 0 < q₃ ≤ q₂ ≤ 1. Both column directions are evaluated through `atan2`,
/// which carries the exact limits at q₂ = q₃ (true angle 90°) and at the
/// triple tie q₂ = q₃ = 1 (both angles 45°, residual zero) without special
/// cases.
pub fn angular_residual(q2: f64, q3: f64, degree: usize) -> f64 {
    debug_assert!(q3 > 0.0 && q3 <= q2 && q2 <= 1.0);
    // True column of K̃ in units of λ₁: (1/(1−q₃), 1/(q₂−q₃)).
    let true_first = 1.0 / (1.0 - q3);
    let true_second = 1.0 / (q2 - q3);
    let alpha = true_second.atan2(true_first);

    // Truncated column: geometric sums in place of the reciprocals.
    let approx_first = geometric_sum(q3, degree);
    let approx_second = geometric_sum(q3 / q2, degree) / q2;
    let beta = approx_second.atan2(approx_first);

    (beta - alpha).to_degrees()
}

/// 1 + r + r² + … + r^degree, summed term by term so r = 1 is exact.
fn geometric_sum(ratio: f64, degree: usize) -> f64 {
    let mut sum = 1.0;
    let mut power = 1.0;
    for _ in 0..degree {
        power *= ratio;
        sum += power;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::{covariance, eig_sym, DataMatrix};
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
        let x = DataMatrix::new(DMatrix::from_fn(d, 2 * d, |_, _| rng.sample(StandardNormal)))
            .unwrap();
        covariance(&x, 0.0).unwrap()
    }

    #[test]
    fn fd_trace_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = random_psd(&mut rng, 4);
        let grad = finite_diff_grad(|m| Ok(m.entries().trace()), &m, &FdConfig::default())
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((grad[(i, j)] - expect).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn fd_frobenius_squared_is_twice_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let m = random_psd(&mut rng, 3);
        let grad = finite_diff_grad(
            |m| Ok(m.entries().norm_squared()),
            &m,
            &FdConfig::default(),
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (grad[(i, j)] - 2.0 * m.entries()[(i, j)]).abs() <= 1e-6,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn fd_top_eigenvalue_of_diagonal() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0]);
        let grad = finite_diff_grad(
            |m| Ok(eig_sym(m)?.values()[0]),
            &m,
            &FdConfig::default(),
        )
        .unwrap();
        assert!((grad[(0, 0)] - 1.0).abs() <= 1e-7);
        assert!(grad[(0, 1)].abs() <= 1e-7);
        assert!(grad[(1, 1)].abs() <= 1e-7);
    }

    #[test]
    fn fd_eigenvalue_sum_matches_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let m = random_psd(&mut rng, 4);
        let grad = finite_diff_grad(
            |m| Ok(eig_sym(m)?.values().iter().sum()),
            &m,
            &FdConfig::default(),
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((grad[(i, j)] - expect).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn fd_reports_non_finite_probe() {
        let m = SymMatrix::from_diagonal(&[1.0, 1.0]);
        let err = finite_diff_grad(|_| Ok(f64::NAN), &m, &FdConfig::default()).unwrap_err();
        assert!(matches!(err, Error::OracleProbe { .. }));
    }

    #[test]
    fn power_iteration_fixed_point() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0]);
        let v0 = DVector::from_vec(vec![1.0, 0.0]);
        let v = power_iteration(&m, &v0, 25).unwrap();
        assert!((v[0] - 1.0).abs() <= 1e-15);
        assert!(v[1].abs() <= 1e-15);
    }

    #[test]
    fn power_iteration_contracts_by_eigenvalue_ratio() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0]);
        let s = 1.0 / 2.0_f64.sqrt();
        let v = power_iteration(&m, &DVector::from_vec(vec![s, s]), 10).unwrap();
        let expect = (1.0_f64 / 3.0).powi(10);
        assert!(((v[1] / v[0]) - expect).abs() <= 1e-10 * expect.max(1e-30));
    }

    #[test]
    fn power_iteration_reaches_known_eigenvector() {
        let m = SymMatrix::from_matrix(
            &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            0.0,
        )
        .unwrap();
        let v = power_iteration(&m, &DVector::from_vec(vec![1.0, 0.0]), 50).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((v[0] - s).abs() <= 1e-8 && (v[1] - s).abs() <= 1e-8);
    }

    #[test]
    fn power_iteration_breakdown() {
        let m = SymMatrix::from_diagonal(&[0.0, 0.0]);
        let err = power_iteration(&m, &DVector::from_vec(vec![1.0, 0.0]), 3).unwrap_err();
        assert!(matches!(err, Error::Breakdown { .. }));
    }

    #[test]
    fn rayleigh_examples() {
        let m = SymMatrix::from_diagonal(&[3.0, 1.0]);
        assert_eq!(
            rayleigh(&m, &DVector::from_vec(vec![1.0, 0.0])).unwrap(),
            3.0
        );
        assert_eq!(
            rayleigh(&m, &DVector::from_vec(vec![1.0, 1.0])).unwrap(),
            2.0
        );
        assert!(matches!(
            rayleigh(&m, &DVector::zeros(2)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rayleigh_bounded_by_spectrum_and_exact_on_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let m = random_psd(&mut rng, 5);
        let decomp = eig_sym(&m).unwrap();
        for i in 0..5 {
            let v: DVector<f64> = decomp.vectors().column(i).into_owned();
            let r = rayleigh(&m, &v).unwrap();
            assert!((r - decomp.values()[i]).abs() <= 1e-9);
        }
        for _ in 0..20 {
            let v: DVector<f64> = DVector::from_fn(5, |_, _| rng.sample(StandardNormal));
            let r = rayleigh(&m, &v).unwrap();
            assert!(r >= decomp.values()[4] - 1e-9 && r <= decomp.values()[0] + 1e-9);
        }
    }

    #[test]
    fn residual_paper_extremes() {
        let half = angular_residual(0.5, 0.5, 9);
        assert!((half + 5.71).abs() <= 0.01, "got {half}");

        let small = angular_residual(0.01, 0.01, 9);
        assert!((small + 0.06).abs() <= 0.01, "got {small}");

        let q3 = 1.0 - 1e-6;
        let worst = angular_residual(q3 + 1e-10, q3, 9);
        assert!((worst + 44.99).abs() <= 0.05, "got {worst}");
    }

    #[test]
    fn residual_bounded_for_dominant_eigenvalue() {
        let steps = 60;
        for a in 1..=steps {
            let q2 = 0.5 * a as f64 / steps as f64;
            for b in 1..=a {
                let q3 = 0.5 * b as f64 / steps as f64;
                let rho = angular_residual(q2, q3, 9);
                assert!(rho.abs() <= 5.71 + 1e-2, "rho({q2}, {q3}) = {rho}");
            }
        }
    }

    #[test]
    fn residual_vanishes_at_triple_tie() {
        // Equal-eigenvalue column construction rather than the ratio formula:
        // the true column is (∞, ∞) and the truncated one (K+1, K+1) in units
        // of 1/λ, both at 45°.
        let k = crate::grad::ktilde_taylor(&DVector::from_vec(vec![1.0, 1.0, 1.0]), 9, 0.01)
            .unwrap();
        let beta = k.entries()[(1, 2)].atan2(k.entries()[(0, 2)]);
        let alpha = f64::INFINITY.atan2(f64::INFINITY);
        assert!((beta - alpha).abs() <= 1e-15);
        assert!((alpha.to_degrees() - 45.0).abs() <= 1e-12);
    }
}
