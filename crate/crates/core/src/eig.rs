//! Covariance construction and symmetric eigendecomposition.
//!
//! The forward solver is a cyclic Jacobi iteration: unconditionally stable for
//! symmetric input, dependency-free and bit-deterministic, which the gradient
//! stress tests rely on. A Householder/QL path is provided for callers that
//! only need eigenvalues (the eigen-gap benchmark runs it on thousands of
//! matrices per dimension).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Sweep budget for the cyclic Jacobi iteration.
const MAX_JACOBI_SWEEPS: usize = 100;

/// Off-diagonal convergence threshold, relative to the Frobenius norm of the
/// input matrix.
const JACOBI_TOL: f64 = 1e-12;

/// Dense d×n matrix of n feature points in dimension d (features are rows,
/// samples are columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps a matrix after checking that it is non-empty and fully finite.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "data matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some((i, j)) = first_non_finite(&data) {
            return Err(Error::InvalidInput(format!(
                "data matrix entry ({i}, {j}) is not finite"
            )));
        }
        Ok(Self { data })
    }

    /// Number of features (rows).
    pub fn features(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples (columns).
    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    /// Feature-wise mean over samples and the centered matrix X̃ = X − μ1ᵀ.
    pub fn centered(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.samples() as f64;
        let mean = &self.data * DVector::from_element(self.samples(), 1.0 / n);
        let mut centered = self.data.clone();
        for j in 0..self.samples() {
            for i in 0..self.features() {
                centered[(i, j)] -= mean[i];
            }
        }
        (centered, mean)
    }
}

/// Dense symmetric matrix with the diagonal shift ε that was added at
/// construction time recorded alongside the entries.
///
/// Symmetry is exact: constructors average mirrored entries, so
/// `entries[(i, j)] == entries[(j, i)]` bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
    epsilon: f64,
}

impl SymMatrix {
    /// Builds a symmetric matrix from `m` by averaging mirrored entries, then
    /// adds `epsilon_shift` to the diagonal.
    pub fn from_matrix(m: &DMatrix<f64>, epsilon_shift: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("symmetric matrix must be non-empty".into()));
        }
        if !epsilon_shift.is_finite() || epsilon_shift < 0.0 {
            return Err(Error::InvalidInput(format!(
                "diagonal shift must be finite and nonnegative, got {epsilon_shift}"
            )));
        }
        if let Some((i, j)) = first_non_finite(m) {
            return Err(Error::InvalidInput(format!(
                "matrix entry ({i}, {j}) is not finite"
            )));
        }
        let d = m.nrows();
        let mut data = DMatrix::zeros(d, d);
        for i in 0..d {
            data[(i, i)] = m[(i, i)] + epsilon_shift;
            for j in (i + 1)..d {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                data[(i, j)] = avg;
                data[(j, i)] = avg;
            }
        }
        Ok(Self {
            data,
            epsilon: epsilon_shift,
        })
    }

    /// Diagonal matrix with the given entries; records ε = 0.
    pub fn from_diagonal(values: &[f64]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_column_slice(values)),
            epsilon: 0.0,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
            epsilon: 0.0,
        }
    }

    /// Returns M + εI with the shift recorded on top of any previous one.
    pub fn shifted(&self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "diagonal shift must be finite and nonnegative, got {epsilon}"
            )));
        }
        let mut data = self.data.clone();
        for i in 0..self.dim() {
            data[(i, i)] += epsilon;
        }
        Ok(Self {
            data,
            epsilon: self.epsilon + epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// The ε that construction added to the diagonal.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Eigenvector matrix V (orthonormal columns) and eigenvalues in descending
/// order, as produced by [`eig_sym`].
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub(crate) vectors: DMatrix<f64>,
    pub(crate) values: DVector<f64>,
}

impl EigenDecomp {
    /// Assembles a decomposition from parts, checking orthonormality and the
    /// descending eigenvalue order.
    pub fn from_parts(vectors: DMatrix<f64>, values: DVector<f64>) -> Result<Self> {
        let d = vectors.nrows();
        if vectors.ncols() != d || values.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "eigenvector matrix {}x{} does not match {} eigenvalues",
                vectors.nrows(),
                vectors.ncols(),
                values.len()
            )));
        }
        let gram = vectors.transpose() * &vectors;
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - expect).abs() > 1e-8 {
                    return Err(Error::InvalidInput(
                        "eigenvector columns are not orthonormal".into(),
                    ));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("eigenvalues must be finite".into()));
        }
        for i in 1..d {
            if values[i] > values[i - 1] {
                return Err(Error::InvalidInput(
                    "eigenvalues must be sorted in descending order".into(),
                ));
            }
        }
        Ok(Self { vectors, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvector matrix V; column i pairs with `values()[i]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Eigenvalues in descending order.
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// V Λ Vᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&self.values);
        &self.vectors * lam * self.vectors.transpose()
    }

    /// Copy of this decomposition with eigenvalues clamped to `epsilon`.
    pub fn clamped(&self, epsilon: f64) -> Self {
        Self {
            vectors: self.vectors.clone(),
            values: clamp_eigenvalues(&self.values, epsilon),
        }
    }
}

/// Centered covariance M = (X − μ1ᵀ)(X − μ1ᵀ)ᵀ + εI.
///
/// The Gram product is not normalized by the sample count; the diagonal shift
/// ε keeps the spectrum bounded away from zero.
pub fn covariance(x: &DataMatrix, epsilon: f64) -> Result<SymMatrix> {
    let (centered, _) = x.centered();
    covariance_of_centered(&centered, epsilon)
}

/// Covariance from an already centered matrix. Shared by the layer forward
/// passes, which need X̃ for their caches anyway.
pub(crate) fn covariance_of_centered(centered: &DMatrix<f64>, epsilon: f64) -> Result<SymMatrix> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let gram = centered * centered.transpose();
    SymMatrix::from_matrix(&gram, epsilon)
}

/// Eigenvalue clamp λᵢ ← max(λᵢ, ε); preserves the descending order.
pub fn clamp_eigenvalues(values: &DVector<f64>, epsilon: f64) -> DVector<f64> {
    values.map(|v| v.max(epsilon))
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below 1e-12·‖M‖_F
/// (at most 100 sweeps). Output is deterministic: eigenvalues are sorted in
/// descending order with ties kept in rotation order, and each eigenvector is
/// oriented so its largest-magnitude component is nonnegative.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenDecomp> {
    let d = m.dim();
    let mut a = m.entries().clone();
    let mut v = DMatrix::<f64>::identity(d, d);
    let fro = a.norm();
    if fro == 0.0 {
        return Ok(EigenDecomp {
            vectors: v,
            values: DVector::zeros(d),
        });
    }
    let tol = JACOBI_TOL * fro;
    // Entries too small to matter for the final residual are zeroed rather
    // than rotated; rotating them risks overflowing tan(2θ).
    let negligible = f64::EPSILON * fro / d as f64;

    let mut residual = off_diagonal_norm(&a);
    let mut sweeps = 0;
    while residual > tol {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::Convergence { residual, sweeps });
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                if apq.abs() <= negligible {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..d {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = akp - s * (akq + tau * akp);
                    let new_kq = akq + s * (akp - tau * akq);
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp;
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        residual = off_diagonal_norm(&a);
    }

    // Descending sort; the stable sort keeps rotation order among exact ties.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).expect("finite eigenvalues"));

    let mut values = DVector::zeros(d);
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[(src, src)];
        let mut col: DVector<f64> = v.column(src).into_owned();
        orient_column(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomp { vectors, values })
}

/// Eigenvalues only, in descending order.
///
/// Delegates to a tridiagonalization-based solver, which is several times
/// faster than [`eig_sym`] for d in the hundreds; the eigen-gap benchmark
/// runs this on thousands of matrices per dimension and needs no vectors.
pub fn symmetric_eigenvalues(m: &SymMatrix) -> Result<DVector<f64>> {
    let mut vals = m.entries().clone().symmetric_eigenvalues();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Convergence {
            residual: f64::NAN,
            sweeps: 0,
        });
    }
    vals.as_mut_slice()
        .sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    Ok(vals)
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let d = a.nrows();
    let mut sum = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            sum += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * sum).sqrt()
}

/// Flips the column so its largest-magnitude component is nonnegative. Among
/// equal magnitudes the lowest index decides, which keeps the output
/// deterministic.
fn orient_column(col: &mut DVector<f64>) {
    let mut idx = 0;
    let mut best = col[0].abs();
    for k in 1..col.len() {
        if col[k].abs() > best {
            best = col[k].abs();
            idx = k;
        }
    }
    if col[idx] < 0.0 {
        for k in 0..col.len() {
            col[k] = -col[k];
        }
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}
