//! Dense symmetric / SPD linear algebra.
//!
//! Everything here is spectral: a symmetric matrix `A = Q Λ Qᵀ` is mapped
//! through scalar functions of its eigenvalues (`log`, `exp`, powers,
//! clamping). The SPD matrices `S⁺⁺(d)` form a vector space under
//! logarithmic addition and scaling,
//!
//! ```text
//! A ⊕ B = Exp(Log A + Log B),    λ ⊙ A = Exp(λ · Log A) = A^λ,
//! ```
//!
//! equipped with the log-Euclidean metric `d_LE(A, B) = ‖Log A − Log B‖_F`.
//! The affine-invariant metric `d_Aff(A, B) = ‖Log(A⁻¹B)‖_F` is also
//! provided for comparison.
//!
//! An [`SpdMatrix`] carries the spectral decomposition it was validated
//! (or constructed) with, so that downstream `Log`/powers reuse it instead
//! of re-factorizing. This matters for matrices produced by
//! [`truncate_eigenvalues`] with thresholds below the round-off level of
//! the entries, where a fresh factorization could see a negative spectrum.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Eigenvalues beyond this overflow `f64::exp`.
const EXP_OVERFLOW_LIMIT: f64 = 709.0;

/// Iteration cap handed to the symmetric QL solver.
const EIGEN_MAX_ITER: usize = 4096;

/// Errors from symmetric/SPD matrix operations.
#[derive(Debug, Clone, Error)]
pub enum SpdError {
    #[error("matrix is not positive definite: smallest computed eigenvalue is {eigenvalue:.6e}")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must have dimension >= 1")]
    EmptyMatrix,
    #[error("eigen-solver did not converge within {iterations} iterations")]
    EigenSolverFailed { iterations: usize },
    #[error("matrix exponential overflow: spectrum value {eigenvalue:.6e} exceeds {limit}")]
    ExpOverflow { eigenvalue: f64, limit: f64 },
    #[error("at least one matrix is required")]
    EmptyInput,
    #[error("weights must be strictly positive, got {weight:.6e} at index {index}")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("weight count {weights} does not match matrix count {matrices}")]
    WeightCountMismatch { matrices: usize, weights: usize },
    #[error("truncation threshold must be positive, got {0:.6e}")]
    NonPositiveThreshold(f64),
}

/// A symmetric `d×d` matrix; the tangent-space element. May be indefinite.
///
/// Construction symmetrizes as `(M + Mᵀ)/2`, assigning the averaged value to
/// both `(i, j)` and `(j, i)` so that `entries[(i, j)] == entries[(j, i)]`
/// holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    entries: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Symmetrizes an arbitrary square matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self, SpdError> {
        if m.nrows() != m.ncols() {
            return Err(SpdError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(SpdError::EmptyMatrix);
        }
        let mut entries = m;
        for i in 0..entries.nrows() {
            for j in 0..i {
                let v = 0.5 * (entries[(i, j)] + entries[(j, i)]);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(Self { entries })
    }

    /// Builds from a row-major slice of length `d*d`.
    pub fn from_row_slice(d: usize, data: &[f64]) -> Result<Self, SpdError> {
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            entries: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: DMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            entries: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    /// Frobenius norm of the entries.
    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Entrywise linear combination `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &SymmetricMatrix) -> Result<SymmetricMatrix, SpdError> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(SymmetricMatrix {
            entries: &self.entries + alpha * &other.entries,
        })
    }

    pub fn scale(&self, alpha: f64) -> SymmetricMatrix {
        SymmetricMatrix {
            entries: alpha * &self.entries,
        }
    }
}

/// Spectral decomposition `A = Q Λ Qᵀ` with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal matrix whose columns are the matching eigenvectors.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn smallest(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Rebuilds `Q f(Λ) Qᵀ`, symmetrized.
    fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let d = self.dim();
        let q = &self.eigenvectors;
        let lam = DVector::from_iterator(d, self.eigenvalues.iter().map(|&l| f(l)));
        let m = q * DMatrix::from_diagonal(&lam) * q.transpose();
        SymmetricMatrix::new(m).expect("square by construction")
    }
}

/// A validated symmetric positive-definite matrix; the manifold element.
///
/// Validation accepts `λ_min > -1e-12 · max(1, λ_max)` so that floating-point
/// noise around zero is not mistaken for genuine indefiniteness; the computed
/// spectrum is then kept as-is. Operations that need `λ > 0` (logarithms,
/// negative powers) report a hard error if a retained eigenvalue is
/// nonpositive.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    sym: SymmetricMatrix,
    eig: EigenDecomposition,
}

impl SpdMatrix {
    /// Validates a symmetric matrix as SPD, keeping its spectral decomposition.
    pub fn new(sym: SymmetricMatrix) -> Result<Self, SpdError> {
        let eig = sym_eig(&sym)?;
        let tol = 1e-12 * eig.largest().max(1.0);
        if eig.smallest() <= -tol {
            return Err(SpdError::NotPositiveDefinite {
                eigenvalue: eig.smallest(),
            });
        }
        Ok(Self { sym, eig })
    }

    /// Validates a raw square matrix (symmetrizing first).
    pub fn from_entries(m: DMatrix<f64>) -> Result<Self, SpdError> {
        Self::new(SymmetricMatrix::new(m)?)
    }

    pub fn from_row_slice(d: usize, data: &[f64]) -> Result<Self, SpdError> {
        Self::new(SymmetricMatrix::from_row_slice(d, data)?)
    }

    pub fn identity(d: usize) -> Self {
        Self {
            sym: SymmetricMatrix::identity(d),
            eig: EigenDecomposition {
                eigenvalues: vec![1.0; d],
                eigenvectors: DMatrix::identity(d, d),
            },
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self, SpdError> {
        Self::new(SymmetricMatrix::from_diagonal(diag))
    }

    /// Builds directly from a spectrum known to be positive, reusing the
    /// eigenbasis rather than re-factorizing the reconstruction.
    fn from_spectrum(eigenvectors: DMatrix<f64>, eigenvalues: Vec<f64>) -> Self {
        let mut idx: Vec<usize> = (0..eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let sorted_vals: Vec<f64> = idx.iter().map(|&i| eigenvalues[i]).collect();
        let mut sorted_vecs = DMatrix::zeros(eigenvectors.nrows(), eigenvectors.ncols());
        for (dst, &src) in idx.iter().enumerate() {
            sorted_vecs.set_column(dst, &eigenvectors.column(src));
        }
        let eig = EigenDecomposition {
            eigenvalues: sorted_vals,
            eigenvectors: sorted_vecs,
        };
        let sym = eig.map_spectrum(|l| l);
        Self { sym, eig }
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        self.sym.entries()
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.sym
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eig.smallest()
    }

    fn positive_spectrum(&self) -> Result<(), SpdError> {
        let lmin = self.eig.smallest();
        if lmin <= 0.0 {
            return Err(SpdError::NotPositiveDefinite { eigenvalue: lmin });
        }
        Ok(())
    }
}

fn check_same_dim(left: usize, right: usize) -> Result<(), SpdError> {
    if left != right {
        return Err(SpdError::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn sym_eig(a: &SymmetricMatrix) -> Result<EigenDecomposition, SpdError> {
    let se = nalgebra::linalg::SymmetricEigen::try_new(
        a.entries().clone(),
        f64::EPSILON,
        EIGEN_MAX_ITER,
    )
    .ok_or(SpdError::EigenSolverFailed {
        iterations: EIGEN_MAX_ITER,
    })?;
    let d = a.dim();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in idx.iter().enumerate() {
        eigenvectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Matrix logarithm `Log A = Q log(Λ) Qᵀ` of an SPD matrix.
pub fn spd_log(a: &SpdMatrix) -> Result<SymmetricMatrix, SpdError> {
    a.positive_spectrum()?;
    Ok(a.eig.map_spectrum(f64::ln))
}

/// Matrix exponential `Exp S = Q exp(Λ) Qᵀ`; SPD by construction.
pub fn sym_exp(s: &SymmetricMatrix) -> Result<SpdMatrix, SpdError> {
    let eig = sym_eig(s)?;
    if eig.largest() > EXP_OVERFLOW_LIMIT {
        return Err(SpdError::ExpOverflow {
            eigenvalue: eig.largest(),
            limit: EXP_OVERFLOW_LIMIT,
        });
    }
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.exp()).collect();
    Ok(SpdMatrix::from_spectrum(eig.eigenvectors, vals))
}

/// Log-Euclidean scalar action `A^t = Exp(t · Log A)`.
pub fn spd_pow(a: &SpdMatrix, t: f64) -> Result<SpdMatrix, SpdError> {
    if t == 0.0 {
        return Ok(SpdMatrix::identity(a.dim()));
    }
    a.positive_spectrum()?;
    let mut vals = Vec::with_capacity(a.dim());
    for &l in &a.eig.eigenvalues {
        let p = t * l.ln();
        if p > EXP_OVERFLOW_LIMIT {
            return Err(SpdError::ExpOverflow {
                eigenvalue: p,
                limit: EXP_OVERFLOW_LIMIT,
            });
        }
        vals.push(p.exp());
    }
    Ok(SpdMatrix::from_spectrum(a.eig.eigenvectors.clone(), vals))
}

/// Logarithmic addition `A ⊕ B = Exp(Log A + Log B)`.
pub fn log_add(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix, SpdError> {
    check_same_dim(a.dim(), b.dim())?;
    let sum = spd_log(a)?.axpy(1.0, &spd_log(b)?)?;
    sym_exp(&sum)
}

/// Logarithmic subtraction `A ⊖ B = A ⊕ (−1 ⊙ B)`.
pub fn log_sub(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix, SpdError> {
    check_same_dim(a.dim(), b.dim())?;
    let diff = spd_log(a)?.axpy(-1.0, &spd_log(b)?)?;
    sym_exp(&diff)
}

/// Euclidean (Frobenius) distance `‖A − B‖_F`.
pub fn dist_frobenius(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64, SpdError> {
    check_same_dim(a.dim(), b.dim())?;
    Ok((a.entries() - b.entries()).norm())
}

/// Log-Euclidean distance `‖Log A − Log B‖_F`.
///
/// Refuses indefinite inputs with a definiteness error rather than returning
/// infinity; callers that report on indefinite estimates map the error
/// themselves.
pub fn dist_log_euclidean(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64, SpdError> {
    check_same_dim(a.dim(), b.dim())?;
    dist_frobenius(&spd_log(a)?, &spd_log(b)?)
}

/// Affine-invariant distance `‖Log(A⁻¹B)‖_F = sqrt(Σ log²λᵢ)` where the
/// `λᵢ` are the eigenvalues of `A^{-1/2} B A^{-1/2}`.
pub fn dist_affine_invariant(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64, SpdError> {
    check_same_dim(a.dim(), b.dim())?;
    a.positive_spectrum()?;
    b.positive_spectrum()?;
    let inv_sqrt = a.eig.map_spectrum(|l| 1.0 / l.sqrt());
    let middle = inv_sqrt.entries() * b.entries() * inv_sqrt.entries();
    let eig = sym_eig(&SymmetricMatrix::new(middle)?)?;
    let mut sum = 0.0;
    for &l in &eig.eigenvalues {
        if l <= 0.0 {
            return Err(SpdError::NotPositiveDefinite { eigenvalue: l });
        }
        sum += l.ln().powi(2);
    }
    Ok(sum.sqrt())
}

/// Eigenvalue truncation `T_δ(A) = Q (Λ ∨ δ) Qᵀ`: clamps every eigenvalue to
/// at least `delta`, forcing definiteness.
pub fn truncate_eigenvalues(a: &SymmetricMatrix, delta: f64) -> Result<SpdMatrix, SpdError> {
    if !(delta > 0.0) {
        return Err(SpdError::NonPositiveThreshold(delta));
    }
    let eig = sym_eig(a)?;
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(delta)).collect();
    Ok(SpdMatrix::from_spectrum(eig.eigenvectors, vals))
}

/// Weighted log-Euclidean Fréchet mean `Exp((Σ wᵢ Log Aᵢ) / Σ wᵢ)`, the
/// closed-form minimizer of `Σ wᵢ d_LE(X, Aᵢ)²`.
pub fn frechet_mean_log_euclidean(
    matrices: &[SpdMatrix],
    weights: &[f64],
) -> Result<SpdMatrix, SpdError> {
    if matrices.is_empty() {
        return Err(SpdError::EmptyInput);
    }
    if matrices.len() != weights.len() {
        return Err(SpdError::WeightCountMismatch {
            matrices: matrices.len(),
            weights: weights.len(),
        });
    }
    for (index, &w) in weights.iter().enumerate() {
        if !(w > 0.0) {
            return Err(SpdError::NonPositiveWeight { index, weight: w });
        }
    }
    let d = matrices[0].dim();
    let mut acc = SymmetricMatrix::zeros(d);
    let mut total = 0.0;
    for (m, &w) in matrices.iter().zip(weights) {
        acc = acc.axpy(w, &spd_log(m)?)?;
        total += w;
    }
    sym_exp(&acc.scale(1.0 / total))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn smallest_eigenvalue(a: &SymmetricMatrix) -> Result<f64, SpdError> {
    Ok(sym_eig(a)?.smallest())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const E: f64 = std::f64::consts::E;

    fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        let err = (a - b).norm();
        assert!(err <= tol, "matrices differ by {err:.3e} > {tol:.3e}\n{a}{b}");
    }

    fn random_symmetric(d: usize, rng: &mut impl Rng) -> SymmetricMatrix {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        SymmetricMatrix::new(m).unwrap()
    }

    fn random_spd(d: usize, rng: &mut impl Rng) -> SpdMatrix {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let spd = &m * m.transpose() + DMatrix::identity(d, d) * 0.3;
        SpdMatrix::from_entries(spd).unwrap()
    }

    #[test]
    fn sym_eig_diagonal_is_trivial() {
        let a = SymmetricMatrix::from_diagonal(&[3.0, 1.0]);
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.eigenvalues, vec![3.0, 1.0]);
        // eigenvectors are signed unit axes
        for j in 0..2 {
            let col = eig.eigenvectors.column(j);
            assert!((col[j].abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sym_eig_identity() {
        let eig = sym_eig(&SymmetricMatrix::identity(4)).unwrap();
        for &l in &eig.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..20 {
            let a = random_symmetric(5, &mut rng);
            let eig = sym_eig(&a).unwrap();
            let rec = eig.map_spectrum(|l| l);
            let scale = a.norm().max(1.0);
            assert_close(rec.entries(), a.entries(), 1e-12 * scale);
            let q = &eig.eigenvectors;
            assert_close(&(q.transpose() * q), &DMatrix::identity(5, 5), 1e-12);
            for w in eig.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = spd_log(&SpdMatrix::identity(3)).unwrap();
        assert!(l.norm() < 1e-14);
    }

    #[test]
    fn log_of_diagonal() {
        let a = SpdMatrix::from_diagonal(&[E, E * E]).unwrap();
        let l = spd_log(&a).unwrap();
        assert_close(
            l.entries(),
            SymmetricMatrix::from_diagonal(&[1.0, 2.0]).entries(),
            1e-12,
        );
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_spd(5, &mut rng);
            let back = sym_exp(&spd_log(&a).unwrap()).unwrap();
            assert_close(back.entries(), a.entries(), 1e-10 * a.as_symmetric().norm());
            let s = random_symmetric(5, &mut rng);
            let back_s = spd_log(&sym_exp(&s).unwrap()).unwrap();
            assert_close(back_s.entries(), s.entries(), 1e-10 * s.norm().max(1.0));
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = sym_exp(&SymmetricMatrix::zeros(3)).unwrap();
        assert_close(e.entries(), &DMatrix::identity(3, 3), 1e-14);
    }

    #[test]
    fn exp_overflow_reports_eigenvalue() {
        let s = SymmetricMatrix::from_diagonal(&[800.0, 0.0]);
        match sym_exp(&s) {
            Err(SpdError::ExpOverflow { eigenvalue, .. }) => assert_eq!(eigenvalue, 800.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn pow_zero_gives_identity() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_spd(4, &mut rng);
        let p = spd_pow(&a, 0.0).unwrap();
        assert_close(p.entries(), &DMatrix::identity(4, 4), 1e-14);
    }

    #[test]
    fn pow_half_of_diagonal() {
        let a = SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap();
        let r = spd_pow(&a, 0.5).unwrap();
        assert_close(
            r.entries(),
            SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap().entries(),
            1e-12,
        );
    }

    #[test]
    fn pow_minus_one_is_inverse() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_spd(4, &mut rng);
        let inv = spd_pow(&a, -1.0).unwrap();
        let direct = a.entries().clone().try_inverse().unwrap();
        assert_close(inv.entries(), &direct, 1e-10 * direct.norm());
    }

    #[test]
    fn log_add_identity_element() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = random_spd(3, &mut rng);
        let r = log_add(&a, &SpdMatrix::identity(3)).unwrap();
        assert_close(r.entries(), a.entries(), 1e-10 * a.as_symmetric().norm());
    }

    #[test]
    fn log_add_diagonal() {
        let a = SpdMatrix::from_diagonal(&[E, 1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[1.0, E]).unwrap();
        let r = log_add(&a, &b).unwrap();
        assert_close(
            r.entries(),
            SpdMatrix::from_diagonal(&[E, E]).unwrap().entries(),
            1e-12,
        );
    }

    #[test]
    fn log_add_cancels_inverse() {
        let mut rng = StdRng::seed_from_u64(13);
        let a = random_spd(4, &mut rng);
        let r = log_add(&a, &spd_pow(&a, -1.0).unwrap()).unwrap();
        assert_close(r.entries(), &DMatrix::identity(4, 4), 1e-10);
    }

    #[test]
    fn log_sub_self_is_identity() {
        let mut rng = StdRng::seed_from_u64(19);
        let a = random_spd(3, &mut rng);
        let r = log_sub(&a, &a).unwrap();
        assert_close(r.entries(), &DMatrix::identity(3, 3), 1e-12);
    }

    #[test]
    fn log_sub_diagonal() {
        let a = SpdMatrix::from_diagonal(&[E * E, 1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[E, 1.0]).unwrap();
        let r = log_sub(&a, &b).unwrap();
        assert_close(
            r.entries(),
            SpdMatrix::from_diagonal(&[E, 1.0]).unwrap().entries(),
            1e-12,
        );
    }

    #[test]
    fn log_sub_matches_inverse_addition() {
        let mut rng = StdRng::seed_from_u64(23);
        let a = random_spd(4, &mut rng);
        let b = random_spd(4, &mut rng);
        let lhs = log_sub(&a, &b).unwrap();
        let rhs = log_add(&a, &spd_pow(&b, -1.0).unwrap()).unwrap();
        assert_close(lhs.entries(), rhs.entries(), 1e-12 * lhs.as_symmetric().norm().max(1.0));
    }

    #[test]
    fn frobenius_distance_basics() {
        let a = SymmetricMatrix::from_diagonal(&[1.0, 1.0]);
        let b = SymmetricMatrix::from_diagonal(&[2.0, 2.0]);
        assert_eq!(dist_frobenius(&a, &a).unwrap(), 0.0);
        assert!((dist_frobenius(&a, &b).unwrap() - 2.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn frobenius_distance_matches_entrywise_oracle() {
        let mut rng = StdRng::seed_from_u64(29);
        let a = random_symmetric(5, &mut rng);
        let b = random_symmetric(5, &mut rng);
        let mut sq = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                sq += (a.entries()[(i, j)] - b.entries()[(i, j)]).powi(2);
            }
        }
        assert!((dist_frobenius(&a, &b).unwrap() - sq.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn log_euclidean_distance_scaled_identity() {
        let d = 4;
        let c = 2.5;
        let a = SpdMatrix::from_diagonal(&vec![c; d]).unwrap();
        let got = dist_log_euclidean(&a, &SpdMatrix::identity(d)).unwrap();
        let want = (d as f64).sqrt() * c.ln().abs();
        assert!((got - want).abs() < 1e-12);
        assert_eq!(dist_log_euclidean(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn log_euclidean_invariant_under_joint_inversion() {
        let mut rng = StdRng::seed_from_u64(31);
        let a = random_spd(4, &mut rng);
        let b = random_spd(4, &mut rng);
        let d1 = dist_log_euclidean(&a, &b).unwrap();
        let d2 = dist_log_euclidean(&spd_pow(&a, -1.0).unwrap(), &spd_pow(&b, -1.0).unwrap())
            .unwrap();
        assert!((d1 - d2).abs() < 1e-10 * d1.max(1.0));
    }

    #[test]
    fn affine_invariant_distance_scaled_identity() {
        let d = 3;
        let c = 0.2;
        let a = SpdMatrix::from_diagonal(&vec![c; d]).unwrap();
        let got = dist_affine_invariant(&a, &SpdMatrix::identity(d)).unwrap();
        let want = (d as f64).sqrt() * c.ln().abs();
        assert!((got - want).abs() < 1e-12);
        let mut rng = StdRng::seed_from_u64(37);
        let b = random_spd(d, &mut rng);
        assert!(dist_affine_invariant(&b, &b).unwrap() < 1e-12);
    }

    #[test]
    fn affine_invariant_congruence_invariance() {
        let mut rng = StdRng::seed_from_u64(41);
        let a = random_spd(4, &mut rng);
        let b = random_spd(4, &mut rng);
        let m = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0))
            + DMatrix::identity(4, 4) * 1.5;
        let am = SpdMatrix::from_entries(m.transpose() * a.entries() * &m).unwrap();
        let bm = SpdMatrix::from_entries(m.transpose() * b.entries() * &m).unwrap();
        let d1 = dist_affine_invariant(&a, &b).unwrap();
        let d2 = dist_affine_invariant(&am, &bm).unwrap();
        assert!((d1 - d2).abs() < 1e-8 * d1.max(1.0), "{d1} vs {d2}");
    }

    #[test]
    fn truncation_clamps_negative_eigenvalues() {
        let a = SymmetricMatrix::from_diagonal(&[1.0, -1.0]);
        let t = truncate_eigenvalues(&a, 1e-16).unwrap();
        assert_eq!(t.smallest_eigenvalue(), 1e-16);
        assert!((t.eigen().largest() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn truncation_leaves_spd_untouched() {
        let mut rng = StdRng::seed_from_u64(43);
        let a = random_spd(4, &mut rng);
        let t = truncate_eigenvalues(a.as_symmetric(), 1e-16).unwrap();
        assert_close(t.entries(), a.entries(), 1e-12 * a.as_symmetric().norm());
    }

    #[test]
    fn truncation_sets_smallest_to_delta() {
        let mut rng = StdRng::seed_from_u64(47);
        for _ in 0..10 {
            let mut a = random_symmetric(5, &mut rng);
            // force indefiniteness
            a = a.axpy(-2.0, &SymmetricMatrix::identity(5)).unwrap();
            if smallest_eigenvalue(&a).unwrap() >= 0.0 {
                continue;
            }
            let delta = 1e-8;
            let t = truncate_eigenvalues(&a, delta).unwrap();
            assert_eq!(t.smallest_eigenvalue(), delta);
        }
    }

    #[test]
    fn truncation_rejects_nonpositive_delta() {
        let a = SymmetricMatrix::identity(2);
        assert!(matches!(
            truncate_eigenvalues(&a, 0.0),
            Err(SpdError::NonPositiveThreshold(_))
        ));
    }

    #[test]
    fn frechet_mean_single_matrix() {
        let mut rng = StdRng::seed_from_u64(53);
        let a = random_spd(3, &mut rng);
        let m = frechet_mean_log_euclidean(std::slice::from_ref(&a), &[2.7]).unwrap();
        assert_close(m.entries(), a.entries(), 1e-10 * a.as_symmetric().norm());
    }

    #[test]
    fn frechet_mean_of_inverse_pair_is_identity() {
        let mut rng = StdRng::seed_from_u64(59);
        let a = random_spd(3, &mut rng);
        let inv = spd_pow(&a, -1.0).unwrap();
        let m = frechet_mean_log_euclidean(&[a, inv], &[1.0, 1.0]).unwrap();
        assert_close(m.entries(), &DMatrix::identity(3, 3), 1e-10);
    }

    #[test]
    fn frechet_mean_matches_direct_minimization() {
        // Coordinate-descent oracle on the 3-dim tangent space of 2x2
        // symmetric matrices, evaluating the weighted objective directly.
        let mut rng = StdRng::seed_from_u64(61);
        let mats: Vec<SpdMatrix> = (0..3).map(|_| random_spd(2, &mut rng)).collect();
        let weights = [1.0, 0.5, 2.0];
        let objective = |p: &[f64; 3]| -> f64 {
            let s = SymmetricMatrix::from_row_slice(2, &[p[0], p[1], p[1], p[2]]).unwrap();
            let x = sym_exp(&s).unwrap();
            mats.iter()
                .zip(weights)
                .map(|(m, w)| w * dist_log_euclidean(&x, m).unwrap().powi(2))
                .sum()
        };
        let mut p = [0.0_f64; 3];
        let mut step = 0.5;
        while step > 1e-9 {
            let mut improved = false;
            for k in 0..3 {
                for sgn in [-1.0, 1.0] {
                    let mut q = p;
                    q[k] += sgn * step;
                    if objective(&q) < objective(&p) {
                        p = q;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let oracle = sym_exp(
            &SymmetricMatrix::from_row_slice(2, &[p[0], p[1], p[1], p[2]]).unwrap(),
        )
        .unwrap();
        let mean = frechet_mean_log_euclidean(&mats, &weights).unwrap();
        assert_close(mean.entries(), oracle.entries(), 1e-6);
    }

    #[test]
    fn frechet_mean_rejects_empty_and_bad_weights() {
        assert!(matches!(
            frechet_mean_log_euclidean(&[], &[]),
            Err(SpdError::EmptyInput)
        ));
        let a = SpdMatrix::identity(2);
        assert!(matches!(
            frechet_mean_log_euclidean(std::slice::from_ref(&a), &[0.0]),
            Err(SpdError::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn smallest_eigenvalue_examples() {
        assert_eq!(
            smallest_eigenvalue(&SymmetricMatrix::from_diagonal(&[2.0, -3.0])).unwrap(),
            -3.0
        );
        assert_eq!(
            smallest_eigenvalue(&SymmetricMatrix::identity(3)).unwrap(),
            1.0
        );
        let mut rng = StdRng::seed_from_u64(67);
        let a = random_spd(5, &mut rng);
        assert!(a.smallest_eigenvalue() > 0.0);
    }

    #[test]
    fn spd_validation_rejects_indefinite() {
        let err = SpdMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(err, Err(SpdError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn spd_validation_tolerates_roundoff_noise() {
        // Accepted by the validation tolerance, but Log must still refuse.
        let a = SymmetricMatrix::from_diagonal(&[1.0, -1e-14]);
        let spd = SpdMatrix::new(a).unwrap();
        assert!(matches!(
            spd_log(&spd),
            Err(SpdError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn truncated_tiny_threshold_survives_log() {
        // delta below the round-off level of the entries: the carried
        // spectrum keeps Log well defined.
        let a = SymmetricMatrix::from_row_slice(
            3,
            &[2.0, 1.9, 0.3, 1.9, -0.5, 0.8, 0.3, 0.8, 1.1],
        )
        .unwrap();
        assert!(smallest_eigenvalue(&a).unwrap() < 0.0);
        let t = truncate_eigenvalues(&a, 1e-16).unwrap();
        let l = spd_log(&t).unwrap();
        assert!(l.norm().is_finite());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = SpdMatrix::identity(2);
        let b = SpdMatrix::identity(3);
        assert!(matches!(
            log_add(&a, &b),
            Err(SpdError::DimensionMismatch { left: 2, right: 3 })
        ));
    }
}
