//! Geometric-mean metric learning on top of estimated covariances.
//!
//! A metric matrix `A` is the affine-invariant interpolation between the
//! inverse of a similarity matrix `S = Cov[y|0] + Cov[y|1]` and a
//! dissimilarity matrix `D = S + μμᵀ`:
//!
//! ```text
//! A = S^{-1/2} (S^{1/2} D S^{1/2})^t S^{-1/2},    t ∈ [0, 1],
//! ```
//!
//! inducing the Mahalanobis distance `d_A(y₁, y₂) = √((y₁−y₂)ᵀ A (y₁−y₂))`.
//! Learned metrics are scored against a reference by the mean relative error
//! of distances to the origin over a test set.

use nalgebra::DVector;
use thiserror::Error;

use crate::spd::{spd_pow, SpdError, SpdMatrix};

#[derive(Debug, Clone, Error)]
pub enum MetricError {
    #[error("interpolation parameter t must lie in [0, 1], got {0}")]
    InvalidInterpolation(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("all test points are zero; no relative error is defined")]
    AllTestPointsZero,
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// An SPD metric matrix with its interpolation parameter and a label for
/// which estimator produced the underlying covariances.
#[derive(Debug, Clone)]
pub struct LearnedMetric {
    a: SpdMatrix,
    t: f64,
    provenance: String,
}

impl LearnedMetric {
    pub fn matrix(&self) -> &SpdMatrix {
        &self.a
    }

    pub fn interpolation(&self) -> f64 {
        self.t
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }
}

/// Similarity matrix `S = cov0 + cov1`; SPD as a sum of SPD matrices.
pub fn similarity_matrix(cov0: &SpdMatrix, cov1: &SpdMatrix) -> Result<SpdMatrix, MetricError> {
    if cov0.dim() != cov1.dim() {
        return Err(MetricError::DimensionMismatch {
            left: cov0.dim(),
            right: cov1.dim(),
        });
    }
    Ok(SpdMatrix::from_entries(cov0.entries() + cov1.entries())?)
}

/// Dissimilarity matrix `D = S + μμᵀ` for the class-mean gap `μ`.
pub fn dissimilarity_matrix(s: &SpdMatrix, mu: &DVector<f64>) -> Result<SpdMatrix, MetricError> {
    if mu.len() != s.dim() {
        return Err(MetricError::DimensionMismatch {
            left: mu.len(),
            right: s.dim(),
        });
    }
    Ok(SpdMatrix::from_entries(
        s.entries() + mu * mu.transpose(),
    )?)
}

/// The geodesic interpolation `A = S^{-1/2}(S^{1/2} D S^{1/2})^t S^{-1/2}`.
///
/// At `t = 0` this is `S⁻¹`, at `t = 1` it is `D`. Indefinite covariance
/// estimates cannot reach this operation; they fail SPD validation upstream.
pub fn gmml_metric(s: &SpdMatrix, d: &SpdMatrix, t: f64) -> Result<LearnedMetric, MetricError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(MetricError::InvalidInterpolation(t));
    }
    if s.dim() != d.dim() {
        return Err(MetricError::DimensionMismatch {
            left: s.dim(),
            right: d.dim(),
        });
    }
    let s_half = spd_pow(s, 0.5)?;
    let s_neg_half = spd_pow(s, -0.5)?;
    let inner = SpdMatrix::from_entries(s_half.entries() * d.entries() * s_half.entries())?;
    let inner_t = spd_pow(&inner, t)?;
    let a = SpdMatrix::from_entries(
        s_neg_half.entries() * inner_t.entries() * s_neg_half.entries(),
    )?;
    Ok(LearnedMetric {
        a,
        t,
        provenance: String::new(),
    })
}

/// Mahalanobis distance under a learned metric.
pub fn mahalanobis_distance(
    metric: &LearnedMetric,
    y1: &DVector<f64>,
    y2: &DVector<f64>,
) -> Result<f64, MetricError> {
    let d = metric.a.dim();
    if y1.len() != d || y2.len() != d {
        return Err(MetricError::DimensionMismatch {
            left: y1.len().max(y2.len()),
            right: d,
        });
    }
    let diff = y1 - y2;
    let q = (metric.a.entries() * &diff).dot(&diff);
    Ok(q.max(0.0).sqrt())
}

/// Mean relative error of a learned metric against a reference, plus the
/// number of test points excluded for being exactly zero.
#[derive(Debug, Clone, Copy)]
pub struct MreOutcome {
    pub value: f64,
    pub excluded: usize,
}

/// `MRE(A) = (1/N) Σᵢ |d_A(yᵢ, 0) − d_{A₀}(yᵢ, 0)| / d_{A₀}(yᵢ, 0)` over the
/// test points, with the reference distance of each point in its own
/// denominator. Zero points carry no relative error and are excluded with a
/// count.
pub fn mean_relative_error(
    metric: &LearnedMetric,
    reference: &LearnedMetric,
    test_points: &[DVector<f64>],
) -> Result<MreOutcome, MetricError> {
    if test_points.is_empty() {
        return Err(MetricError::EmptyTestSet);
    }
    let origin = DVector::zeros(metric.a.dim());
    let mut sum = 0.0;
    let mut used = 0usize;
    for y in test_points {
        if y.iter().all(|&v| v == 0.0) {
            continue;
        }
        let d_ref = mahalanobis_distance(reference, y, &origin)?;
        let d_est = mahalanobis_distance(metric, y, &origin)?;
        sum += (d_est - d_ref).abs() / d_ref;
        used += 1;
    }
    if used == 0 {
        return Err(MetricError::AllTestPointsZero);
    }
    Ok(MreOutcome {
        value: sum / used as f64,
        excluded: test_points.len() - used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{dist_affine_invariant, dist_frobenius};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_spd(d: usize, rng: &mut impl Rng) -> SpdMatrix {
        let m = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        SpdMatrix::from_entries(&m * m.transpose() + nalgebra::DMatrix::identity(d, d) * 0.4)
            .unwrap()
    }

    #[test]
    fn similarity_of_identities() {
        let s = similarity_matrix(&SpdMatrix::identity(3), &SpdMatrix::identity(3)).unwrap();
        assert!((s.entries() - nalgebra::DMatrix::identity(3, 3) * 2.0).norm() < 1e-14);
    }

    #[test]
    fn similarity_is_symmetric_in_arguments() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random_spd(3, &mut rng);
        let b = random_spd(3, &mut rng);
        let s1 = similarity_matrix(&a, &b).unwrap();
        let s2 = similarity_matrix(&b, &a).unwrap();
        assert_eq!(s1.entries(), s2.entries());
    }

    #[test]
    fn similarity_eigenvalue_lower_bound() {
        let mut rng = StdRng::seed_from_u64(2);
        let a = random_spd(4, &mut rng);
        let b = random_spd(4, &mut rng);
        let s = similarity_matrix(&a, &b).unwrap();
        let bound = a.smallest_eigenvalue() + b.smallest_eigenvalue();
        assert!(s.smallest_eigenvalue() >= bound - 1e-10);
    }

    #[test]
    fn dissimilarity_rank_one_update() {
        let mut rng = StdRng::seed_from_u64(3);
        let s = random_spd(3, &mut rng);
        let zero = DVector::zeros(3);
        let d0 = dissimilarity_matrix(&s, &zero).unwrap();
        assert!(dist_frobenius(d0.as_symmetric(), s.as_symmetric()).unwrap() < 1e-14);

        let mu = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let d = dissimilarity_matrix(&s, &mu).unwrap();
        let gap = d.entries() - s.entries();
        // rank <= 1 with trace ‖μ‖²
        assert!((gap.trace() - mu.norm_squared()).abs() < 1e-12);
        let eig = crate::spd::sym_eig(&crate::spd::SymmetricMatrix::new(gap).unwrap()).unwrap();
        assert!(eig.eigenvalues[1..].iter().all(|l| l.abs() < 1e-12));
        assert!(d.smallest_eigenvalue() >= s.smallest_eigenvalue() - 1e-10);
    }

    #[test]
    fn gmml_endpoints() {
        let mut rng = StdRng::seed_from_u64(4);
        let s = random_spd(3, &mut rng);
        let d = random_spd(3, &mut rng);
        let a0 = gmml_metric(&s, &d, 0.0).unwrap();
        let s_inv = spd_pow(&s, -1.0).unwrap();
        let rel = dist_frobenius(a0.matrix().as_symmetric(), s_inv.as_symmetric()).unwrap();
        assert!(rel < 1e-10 * s_inv.as_symmetric().norm());
        let a1 = gmml_metric(&s, &d, 1.0).unwrap();
        let rel = dist_frobenius(a1.matrix().as_symmetric(), d.as_symmetric()).unwrap();
        assert!(rel < 1e-10 * d.as_symmetric().norm());
    }

    #[test]
    fn gmml_equal_inputs_power_identity() {
        // D = S collapses the interpolation to A = S^(2t-1)
        let mut rng = StdRng::seed_from_u64(5);
        let s = random_spd(3, &mut rng);
        let a = gmml_metric(&s, &s, 0.5).unwrap();
        assert!(
            (a.matrix().entries() - nalgebra::DMatrix::identity(3, 3)).norm() < 1e-10
        );
    }

    #[test]
    fn gmml_traces_the_affine_invariant_geodesic() {
        let mut rng = StdRng::seed_from_u64(6);
        let s = random_spd(3, &mut rng);
        let d = random_spd(3, &mut rng);
        let s_inv = spd_pow(&s, -1.0).unwrap();
        let total = dist_affine_invariant(&s_inv, &d).unwrap();
        for t in [0.1, 0.5, 0.9] {
            let a = gmml_metric(&s, &d, t).unwrap();
            let part = dist_affine_invariant(&s_inv, a.matrix()).unwrap();
            assert!(
                (part - t * total).abs() < 1e-8 * total.max(1.0),
                "t = {t}: {part} vs {}",
                t * total
            );
        }
    }

    #[test]
    fn gmml_rejects_bad_t() {
        let s = SpdMatrix::identity(2);
        assert!(matches!(
            gmml_metric(&s, &s, 1.5),
            Err(MetricError::InvalidInterpolation(_))
        ));
    }

    #[test]
    fn mahalanobis_examples() {
        let id = gmml_metric(&SpdMatrix::identity(2), &SpdMatrix::identity(2), 1.0).unwrap();
        let y1 = DVector::from_row_slice(&[1.0, 2.0]);
        let y2 = DVector::from_row_slice(&[4.0, 6.0]);
        assert_eq!(mahalanobis_distance(&id, &y1, &y1).unwrap(), 0.0);
        assert!((mahalanobis_distance(&id, &y1, &y2).unwrap() - 5.0).abs() < 1e-14);

        let a = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let m = gmml_metric(&spd_pow(&a, -1.0).unwrap(), &a, 1.0).unwrap();
        let z = DVector::zeros(2);
        let v = DVector::from_row_slice(&[1.0, 1.0]);
        assert!((mahalanobis_distance(&m, &v, &z).unwrap() - 5.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mre_zero_at_reference_and_scaling() {
        let mut rng = StdRng::seed_from_u64(7);
        let s = random_spd(3, &mut rng);
        let d = random_spd(3, &mut rng);
        let reference = gmml_metric(&s, &d, 0.3).unwrap();
        let points: Vec<DVector<f64>> = (0..50)
            .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)))
            .collect();
        let same = mean_relative_error(&reference, &reference, &points).unwrap();
        assert_eq!(same.value, 0.0);

        // A = 4 A0 doubles every distance: MRE = 1
        let scaled = LearnedMetric {
            a: SpdMatrix::from_entries(reference.matrix().entries() * 4.0).unwrap(),
            t: reference.interpolation(),
            provenance: String::new(),
        };
        let m = mean_relative_error(&scaled, &reference, &points).unwrap();
        assert!((m.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mre_matches_loop_free_oracle() {
        let mut rng = StdRng::seed_from_u64(8);
        let s = random_spd(4, &mut rng);
        let d = random_spd(4, &mut rng);
        let a = gmml_metric(&s, &d, 0.2).unwrap();
        let a0 = gmml_metric(&d, &s, 0.7).unwrap();
        let points: Vec<DVector<f64>> = (0..100)
            .map(|_| DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let got = mean_relative_error(&a, &a0, &points).unwrap();
        let oracle: f64 = points
            .iter()
            .map(|y| {
                let da = (y.transpose() * a.matrix().entries() * y)[(0, 0)].sqrt();
                let d0 = (y.transpose() * a0.matrix().entries() * y)[(0, 0)].sqrt();
                (da - d0).abs() / d0
            })
            .sum::<f64>()
            / points.len() as f64;
        assert!((got.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn mre_excludes_zero_points_with_count() {
        let id = gmml_metric(&SpdMatrix::identity(2), &SpdMatrix::identity(2), 0.5).unwrap();
        let points = vec![
            DVector::zeros(2),
            DVector::from_row_slice(&[1.0, 0.0]),
        ];
        let m = mean_relative_error(&id, &id, &points).unwrap();
        assert_eq!(m.excluded, 1);
        let only_zero = vec![DVector::zeros(2)];
        assert!(matches!(
            mean_relative_error(&id, &id, &only_zero),
            Err(MetricError::AllTestPointsZero)
        ));
    }

    #[test]
    fn indefinite_covariances_cannot_form_metrics() {
        // an indefinite "covariance" fails SPD validation before it could
        // reach the interpolation
        let bad = crate::spd::SymmetricMatrix::from_diagonal(&[1.0, -0.2]);
        let err = SpdMatrix::new(bad);
        assert!(err.is_err());
    }
}
