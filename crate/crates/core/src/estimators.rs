//! Covariance estimators over a coupled multi-fidelity sample hierarchy.
//!
//! Four estimators are provided: the single-fidelity sample covariance, the
//! Euclidean multi-fidelity estimator
//!
//! ```text
//! Σ̂_EMF = Σ̂⁽⁰⁾ + Σ_ℓ α_ℓ (Σ̂⁽ℓ⁾_{n_ℓ} − Σ̂⁽ℓ⁾_{n_{ℓ−1}}),
//! ```
//!
//! its eigenvalue-truncated repair, and the log-Euclidean multi-fidelity
//! (LEMF) estimator which moves the same control-variate combination into
//! the tangent space,
//!
//! ```text
//! Σ̂_LEMF = Exp(Log Σ̂⁽⁰⁾ + Σ_ℓ α_ℓ (Log Σ̂⁽ℓ⁾_{n_ℓ} − Log Σ̂⁽ℓ⁾_{n_{ℓ−1}})).
//! ```
//!
//! EMF may lose definiteness and is returned as a plain [`SymmetricMatrix`],
//! never silently repaired. LEMF is positive definite by construction
//! whenever every per-level sample covariance is, which holds almost surely
//! for `n_ℓ > d`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::spd::{
    log_sub, spd_log, sym_exp, truncate_eigenvalues, SpdError, SpdMatrix, SymmetricMatrix,
};

/// How the (usually unknown) mean enters the sample covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Mean known to be zero: `(1/n) Σ yᵢyᵢᵀ`.
    KnownZero,
    /// Mean estimated from the samples: `(1/(n−1)) Σ (yᵢ−ȳ)(yᵢ−ȳ)ᵀ`.
    SampleMean,
}

/// Which of the two per-level sample covariances a diagnostic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstituentSet {
    /// All `n_ℓ` samples of the level.
    FullLevel,
    /// The first `n_{ℓ−1}` samples, shared with the level above.
    CoupledPrefix,
}

impl std::fmt::Display for ConstituentSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstituentSet::FullLevel => write!(f, "full level set"),
            ConstituentSet::CoupledPrefix => write!(f, "coupled prefix"),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum EstimatorError {
    #[error("no samples provided")]
    NoSamples,
    #[error("sample-mean covariance needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("hierarchy must contain at least one level")]
    NoLevels,
    #[error("level {level} has {got} samples, fewer than the {expected} of level {}", level - 1)]
    NonNestedCounts {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("level {level} has dimension {got}, expected {expected}")]
    LevelDimMismatch {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("expected {expected} control-variate weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("level {level} needs more than d = {dim} samples for an a.s. definite estimate, got {n}")]
    SmallSample { level: usize, n: usize, dim: usize },
    #[error("sample covariance at level {level} ({which}) is not positive definite: {source}")]
    ConstituentNotSpd {
        level: usize,
        which: ConstituentSet,
        source: SpdError,
    },
    #[error(transparent)]
    Spd(#[from] SpdError),
}

/// Per-level sample sets sharing underlying random events across levels.
///
/// Column `i` of every level was generated from the same event `ωᵢ`; that
/// coupling is what correlates the per-level sample covariances. Counts must
/// be nondecreasing in the level index (`n_ℓ ≥ n_{ℓ−1}`).
#[derive(Debug, Clone)]
pub struct CoupledSampleHierarchy {
    /// One `d × n_ℓ` matrix per level, samples as columns.
    levels: Vec<DMatrix<f64>>,
}

impl CoupledSampleHierarchy {
    pub fn new(levels: Vec<DMatrix<f64>>) -> Result<Self, EstimatorError> {
        if levels.is_empty() {
            return Err(EstimatorError::NoLevels);
        }
        let dim = levels[0].nrows();
        if dim == 0 || levels[0].ncols() == 0 {
            return Err(EstimatorError::NoSamples);
        }
        for (l, m) in levels.iter().enumerate() {
            if m.nrows() != dim {
                return Err(EstimatorError::LevelDimMismatch {
                    level: l,
                    got: m.nrows(),
                    expected: dim,
                });
            }
            if l > 0 && m.ncols() < levels[l - 1].ncols() {
                return Err(EstimatorError::NonNestedCounts {
                    level: l,
                    got: m.ncols(),
                    expected: levels[l - 1].ncols(),
                });
            }
        }
        Ok(Self { levels })
    }

    pub fn dim(&self) -> usize {
        self.levels[0].nrows()
    }

    /// Number of levels including the high-fidelity one (`L + 1`).
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Number of surrogate levels (`L`).
    pub fn num_surrogates(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        self.levels.iter().map(|m| m.ncols()).collect()
    }

    pub fn level(&self, l: usize) -> &DMatrix<f64> {
        &self.levels[l]
    }
}

/// Sample covariance of the columns of `samples`.
pub fn sample_covariance(
    samples: &DMatrix<f64>,
    mode: MeanMode,
) -> Result<SymmetricMatrix, EstimatorError> {
    let n = samples.ncols();
    if n == 0 {
        return Err(EstimatorError::NoSamples);
    }
    match mode {
        MeanMode::KnownZero => {
            let cov = samples * samples.transpose() / n as f64;
            Ok(SymmetricMatrix::new(cov).expect("square"))
        }
        MeanMode::SampleMean => {
            if n < 2 {
                return Err(EstimatorError::TooFewSamples(n));
            }
            let mean = samples.column_mean();
            let mut centered = samples.clone();
            for mut col in centered.column_iter_mut() {
                col -= &mean;
            }
            let cov = &centered * centered.transpose() / (n - 1) as f64;
            Ok(SymmetricMatrix::new(cov).expect("square"))
        }
    }
}

/// The two sample covariances of one surrogate level: over all `n_ℓ` samples
/// and over the coupled prefix of `n_prev` samples. In `SampleMean` mode both
/// are centered with the mean of the full level set.
fn level_covariance_pair(
    level: &DMatrix<f64>,
    n_prev: usize,
    mode: MeanMode,
) -> Result<(SymmetricMatrix, SymmetricMatrix), EstimatorError> {
    let n = level.ncols();
    debug_assert!(n_prev <= n);
    match mode {
        MeanMode::KnownZero => {
            if n_prev == 0 {
                return Err(EstimatorError::NoSamples);
            }
            let full = level * level.transpose() / n as f64;
            let head = level.columns(0, n_prev);
            let prefix = head * head.transpose() / n_prev as f64;
            Ok((
                SymmetricMatrix::new(full).expect("square"),
                SymmetricMatrix::new(prefix).expect("square"),
            ))
        }
        MeanMode::SampleMean => {
            if n_prev < 2 {
                return Err(EstimatorError::TooFewSamples(n_prev));
            }
            let mean = level.column_mean();
            let mut centered = level.clone();
            for mut col in centered.column_iter_mut() {
                col -= &mean;
            }
            let full = &centered * centered.transpose() / (n - 1) as f64;
            let head = centered.columns(0, n_prev);
            let prefix = head * head.transpose() / (n_prev - 1) as f64;
            Ok((
                SymmetricMatrix::new(full).expect("square"),
                SymmetricMatrix::new(prefix).expect("square"),
            ))
        }
    }
}

fn check_weights(h: &CoupledSampleHierarchy, alphas: &[f64]) -> Result<(), EstimatorError> {
    if alphas.len() != h.num_surrogates() {
        return Err(EstimatorError::WeightCount {
            expected: h.num_surrogates(),
            got: alphas.len(),
        });
    }
    Ok(())
}

/// Euclidean multi-fidelity covariance estimator.
///
/// The result is exactly symmetric but may be indefinite; it is returned as a
/// [`SymmetricMatrix`] so that the loss of definiteness is the caller's to
/// observe.
pub fn emf_estimate(
    h: &CoupledSampleHierarchy,
    alphas: &[f64],
    mode: MeanMode,
) -> Result<SymmetricMatrix, EstimatorError> {
    check_weights(h, alphas)?;
    let mut acc = sample_covariance(h.level(0), mode)?;
    for (l, &alpha) in alphas.iter().enumerate() {
        let level = l + 1;
        let n_prev = h.level(level - 1).ncols();
        let (full, prefix) = level_covariance_pair(h.level(level), n_prev, mode)?;
        acc = acc.axpy(alpha, &full)?.axpy(-alpha, &prefix)?;
    }
    Ok(acc)
}

fn constituent_log(
    cov: SymmetricMatrix,
    level: usize,
    which: ConstituentSet,
) -> Result<SymmetricMatrix, EstimatorError> {
    let spd = SpdMatrix::new(cov)
        .and_then(|m| spd_log(&m))
        .map_err(|source| EstimatorError::ConstituentNotSpd {
            level,
            which,
            source,
        })?;
    Ok(spd)
}

fn check_lemf_preconditions(h: &CoupledSampleHierarchy) -> Result<(), EstimatorError> {
    let d = h.dim();
    for (level, n) in h.counts().into_iter().enumerate() {
        if n <= d {
            return Err(EstimatorError::SmallSample { level, n, dim: d });
        }
    }
    Ok(())
}

/// Log-Euclidean multi-fidelity covariance estimator; always SPD.
///
/// Errors if a constituent sample covariance fails definiteness validation,
/// naming the level and which of its two covariances failed.
pub fn lemf_estimate(
    h: &CoupledSampleHierarchy,
    alphas: &[f64],
    mode: MeanMode,
) -> Result<SpdMatrix, EstimatorError> {
    check_weights(h, alphas)?;
    check_lemf_preconditions(h)?;
    let mut acc = constituent_log(
        sample_covariance(h.level(0), mode)?,
        0,
        ConstituentSet::FullLevel,
    )?;
    for (l, &alpha) in alphas.iter().enumerate() {
        let level = l + 1;
        let n_prev = h.level(level - 1).ncols();
        let (full, prefix) = level_covariance_pair(h.level(level), n_prev, mode)?;
        let log_full = constituent_log(full, level, ConstituentSet::FullLevel)?;
        let log_prefix = constituent_log(prefix, level, ConstituentSet::CoupledPrefix)?;
        acc = acc.axpy(alpha, &log_full)?.axpy(-alpha, &log_prefix)?;
    }
    Ok(sym_exp(&acc)?)
}

/// LEMF through the per-level difference matrices `D_ℓ = Σ̂⁽ℓ⁾_{n_ℓ} ⊖ Σ̂⁽ℓ⁾_{n_{ℓ−1}}`:
/// `Exp(Log Σ̂⁽⁰⁾ + Σ_ℓ α_ℓ Log D_ℓ)`.
///
/// Algebraically identical to [`lemf_estimate`] (it is the weighted
/// barycenter form of the same estimator) but takes a different numerical
/// route; it serves as the independent cross-check behind `--verify-frechet`.
pub fn lemf_estimate_via_differences(
    h: &CoupledSampleHierarchy,
    alphas: &[f64],
    mode: MeanMode,
) -> Result<SpdMatrix, EstimatorError> {
    check_weights(h, alphas)?;
    check_lemf_preconditions(h)?;
    let mut acc = constituent_log(
        sample_covariance(h.level(0), mode)?,
        0,
        ConstituentSet::FullLevel,
    )?;
    for (l, &alpha) in alphas.iter().enumerate() {
        let level = l + 1;
        let n_prev = h.level(level - 1).ncols();
        let (full, prefix) = level_covariance_pair(h.level(level), n_prev, mode)?;
        let spd_full = SpdMatrix::new(full).map_err(|source| EstimatorError::ConstituentNotSpd {
            level,
            which: ConstituentSet::FullLevel,
            source,
        })?;
        let spd_prefix =
            SpdMatrix::new(prefix).map_err(|source| EstimatorError::ConstituentNotSpd {
                level,
                which: ConstituentSet::CoupledPrefix,
                source,
            })?;
        let diff = log_sub(&spd_full, &spd_prefix)?;
        acc = acc.axpy(alpha, &spd_log(&diff)?)?;
    }
    Ok(sym_exp(&acc)?)
}

/// Truncated Euclidean multi-fidelity estimator `T_δ(Σ̂_EMF)`.
pub fn truncated_emf_estimate(
    h: &CoupledSampleHierarchy,
    alphas: &[f64],
    mode: MeanMode,
    delta: f64,
) -> Result<SpdMatrix, EstimatorError> {
    let emf = emf_estimate(h, alphas, mode)?;
    Ok(truncate_eigenvalues(&emf, delta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::dist_frobenius;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn mat(d: usize, cols: &[&[f64]]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(d, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    #[test]
    fn outer_product_single_sample() {
        let s = mat(2, &[&[1.0, 2.0]]);
        let c = sample_covariance(&s, MeanMode::KnownZero).unwrap();
        let want = SymmetricMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(c.entries(), want.entries());
    }

    #[test]
    fn axis_samples_give_half_identity() {
        let s = mat(
            2,
            &[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]],
        );
        let c = sample_covariance(&s, MeanMode::KnownZero).unwrap();
        let want = SymmetricMatrix::from_diagonal(&[0.5, 0.5]);
        assert!((c.entries() - want.entries()).norm() < 1e-15);
    }

    #[test]
    fn monte_carlo_identity_sanity() {
        let mut rng = StdRng::seed_from_u64(99);
        let n = 1000;
        let mut s = DMatrix::zeros(3, n);
        for j in 0..n {
            for i in 0..3 {
                s[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        let c = sample_covariance(&s, MeanMode::KnownZero).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c.entries()[(i, j)] - want).abs() < 0.2);
            }
        }
    }

    #[test]
    fn sample_mean_mode_requires_two_samples() {
        let s = mat(2, &[&[1.0, 2.0]]);
        assert!(matches!(
            sample_covariance(&s, MeanMode::SampleMean),
            Err(EstimatorError::TooFewSamples(1))
        ));
    }

    fn fixed_hierarchy() -> CoupledSampleHierarchy {
        // d = 2, L = 1, n = (2, 4), integer-valued samples.
        let l0 = mat(2, &[&[1.0, 0.0], &[0.0, 2.0]]);
        let l1 = mat(2, &[&[2.0, 1.0], &[1.0, -1.0], &[0.0, 1.0], &[3.0, 0.0]]);
        CoupledSampleHierarchy::new(vec![l0, l1]).unwrap()
    }

    #[test]
    fn emf_matches_hand_computed_value() {
        // Known-zero covariances of the fixed hierarchy:
        //   level 0:            [[0.5, 0], [0, 2]]
        //   level 1, full (4):  [[3.5, 0.25], [0.25, 0.75]]
        //   level 1, prefix (2):[[2.5, 0.5], [0.5, 1.0]]
        // With alpha = 1 the estimator is [[1.5, -0.25], [-0.25, 1.75]].
        let h = fixed_hierarchy();
        let est = emf_estimate(&h, &[1.0], MeanMode::KnownZero).unwrap();
        let want =
            SymmetricMatrix::from_row_slice(2, &[1.5, -0.25, -0.25, 1.75]).unwrap();
        assert!(dist_frobenius(&est, &want).unwrap() < 1e-14);
    }

    #[test]
    fn zero_weights_reduce_to_level_zero() {
        let h = fixed_hierarchy();
        let base = sample_covariance(h.level(0), MeanMode::KnownZero).unwrap();
        let emf = emf_estimate(&h, &[0.0], MeanMode::KnownZero).unwrap();
        assert!(dist_frobenius(&emf, &base).unwrap() < 1e-15);

        let single = CoupledSampleHierarchy::new(vec![h.level(0).clone()]).unwrap();
        let emf0 = emf_estimate(&single, &[], MeanMode::KnownZero).unwrap();
        assert!(dist_frobenius(&emf0, &base).unwrap() < 1e-15);
    }

    fn random_hierarchy(
        d: usize,
        counts: &[usize],
        rng: &mut impl rand::Rng,
    ) -> CoupledSampleHierarchy {
        // coupled: deeper levels extend the shared event set with extra noise
        let n_max = *counts.last().unwrap();
        let base = DMatrix::from_fn(d, n_max, |_, _| StandardNormal.sample(rng));
        let mut levels = Vec::new();
        for (l, &n) in counts.iter().enumerate() {
            let mut m = base.columns(0, n).into_owned();
            if l > 0 {
                for v in m.iter_mut() {
                    let noise: f64 = StandardNormal.sample(rng);
                    *v += 0.3 * noise;
                }
            }
            levels.push(m);
        }
        CoupledSampleHierarchy::new(levels).unwrap()
    }

    #[test]
    fn lemf_zero_weights_round_trip() {
        let mut rng = StdRng::seed_from_u64(5);
        let h = random_hierarchy(3, &[8, 20], &mut rng);
        let base = sample_covariance(h.level(0), MeanMode::KnownZero).unwrap();
        let lemf = lemf_estimate(&h, &[0.0], MeanMode::KnownZero).unwrap();
        let err = dist_frobenius(lemf.as_symmetric(), &base).unwrap();
        assert!(err < 1e-10 * base.norm());
    }

    #[test]
    fn lemf_agrees_with_difference_form() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..20 {
            let h = random_hierarchy(3, &[8, 16, 32], &mut rng);
            let alphas = [0.9, -0.4];
            let a = lemf_estimate(&h, &alphas, MeanMode::KnownZero).unwrap();
            let b = lemf_estimate_via_differences(&h, &alphas, MeanMode::KnownZero).unwrap();
            let err = dist_frobenius(a.as_symmetric(), b.as_symmetric()).unwrap();
            assert!(err < 1e-10 * a.as_symmetric().norm().max(1.0));
        }
    }

    #[test]
    fn lemf_rejects_small_levels() {
        let mut rng = StdRng::seed_from_u64(7);
        let h = random_hierarchy(3, &[3, 10], &mut rng);
        assert!(matches!(
            lemf_estimate(&h, &[1.0], MeanMode::KnownZero),
            Err(EstimatorError::SmallSample { level: 0, n: 3, dim: 3 })
        ));
    }

    #[test]
    fn lemf_names_failing_constituent() {
        // level 1 prefix is rank one: its covariance cannot be SPD
        let l0 = mat(2, &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let l1 = mat(
            2,
            &[
                &[1.0, 0.0],
                &[2.0, 0.0],
                &[-1.0, 0.0],
                &[1.0, 1.0],
                &[0.0, 2.0],
                &[1.0, -1.0],
            ],
        );
        let h = CoupledSampleHierarchy::new(vec![l0, l1]).unwrap();
        match lemf_estimate(&h, &[1.0], MeanMode::KnownZero) {
            Err(EstimatorError::ConstituentNotSpd { level, which, .. }) => {
                assert_eq!(level, 1);
                assert_eq!(which, ConstituentSet::CoupledPrefix);
            }
            other => panic!("expected constituent failure, got {other:?}"),
        }
    }

    #[test]
    fn truncated_equals_emf_when_definite() {
        let mut rng = StdRng::seed_from_u64(8);
        let h = random_hierarchy(2, &[30, 60], &mut rng);
        let alphas = [0.5];
        let emf = emf_estimate(&h, &alphas, MeanMode::KnownZero).unwrap();
        if crate::spd::smallest_eigenvalue(&emf).unwrap() > 1e-10 {
            let t = truncated_emf_estimate(&h, &alphas, MeanMode::KnownZero, 1e-16).unwrap();
            assert!(dist_frobenius(t.as_symmetric(), &emf).unwrap() < 1e-12);
        }
    }

    #[test]
    fn truncated_clamps_indefinite_emf() {
        // strong over-correction makes the EMF estimate indefinite
        let l0 = mat(2, &[&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5]]);
        let l1 = mat(
            2,
            &[
                &[5.0, 0.0],
                &[0.0, 5.0],
                &[2.0, 2.0],
                &[0.1, 0.0],
                &[0.0, 0.1],
                &[0.05, 0.05],
            ],
        );
        let h = CoupledSampleHierarchy::new(vec![l0, l1]).unwrap();
        let alphas = [4.0];
        let emf = emf_estimate(&h, &alphas, MeanMode::KnownZero).unwrap();
        assert!(crate::spd::smallest_eigenvalue(&emf).unwrap() < 0.0);
        let t = truncated_emf_estimate(&h, &alphas, MeanMode::KnownZero, 1e-16).unwrap();
        assert_eq!(t.smallest_eigenvalue(), 1e-16);
    }

    #[test]
    fn emf_output_is_exactly_symmetric() {
        let mut rng = StdRng::seed_from_u64(9);
        let h = random_hierarchy(4, &[10, 25, 50], &mut rng);
        let est = emf_estimate(&h, &[0.8, 0.3], MeanMode::SampleMean).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(est.entries()[(i, j)], est.entries()[(j, i)]);
            }
        }
    }

    #[test]
    fn hierarchy_rejects_shrinking_counts() {
        let l0 = mat(2, &[&[1.0, 0.0], &[0.0, 1.0]]);
        let l1 = mat(2, &[&[1.0, 0.0]]);
        assert!(matches!(
            CoupledSampleHierarchy::new(vec![l0, l1]),
            Err(EstimatorError::NonNestedCounts { level: 1, .. })
        ));
    }
}
