//! `mfcov metric`: the metric-learning pipeline. Each trial estimates both
//! class covariances with each estimator at equal cost, builds the metric
//! matrix by geodesic interpolation, and scores it against a reference
//! metric built from the model's closed-form class moments. Trials whose
//! Euclidean multi-fidelity covariance comes out indefinite cannot form a
//! valid metric and are recorded as `invalid_metric` rows.

use nalgebra::DVector;

use mfcov_core::metric::{
    dissimilarity_matrix, gmml_metric, mean_relative_error, similarity_matrix, LearnedMetric,
};
use mfcov_core::models::{
    sample_hierarchy, single_level_covariance, GaussianNoiseHierarchy, LevelSubset,
    TwoClassGaussian,
};
use mfcov_core::parallel::run_trials;
use mfcov_core::rng::{purpose, stream_seed};
use mfcov_core::spd::{
    dist_affine_invariant, dist_frobenius, dist_log_euclidean, smallest_eigenvalue, SpdError,
};
use mfcov_core::{
    emf_estimate, lemf_estimate, optimal_allocation, truncated_emf_estimate, AllocationPlan,
    CoupledModel, MeanMode, Rounding, SpdMatrix, SymmetricMatrix,
};

use crate::config::{EstimatorKind, MetricConfig};
use crate::error::CliError;
use crate::io::{fmt_f64, push_csv_row};

pub struct MetricOutput {
    /// `budget,estimator,trial,mre,d_frob,d_logE,d_aff,status`
    pub rows_csv: String,
    /// `budget,estimator,trials,valid_trials,mean_mre,frac_invalid,
    ///  mean_d_frob_sq,mean_d_logE_sq,mean_d_aff_sq`
    pub summary_csv: String,
}

enum TrialResult {
    Valid {
        mre: f64,
        d_frob: f64,
        d_loge: f64,
        d_aff: f64,
    },
    /// An indefinite covariance estimate reached the metric construction.
    InvalidMetric,
}

/// Covariance of one class under one estimator, or `None` when the estimate
/// is indefinite (only possible for the Euclidean multi-fidelity estimator).
fn class_covariance(
    model: &GaussianNoiseHierarchy,
    plan: &AllocationPlan,
    kind: EstimatorKind,
    budget: f64,
    delta: f64,
    seed: u64,
) -> Result<Option<SpdMatrix>, CliError> {
    let costs = model.costs();
    let to_spd = |sym: SymmetricMatrix| -> Result<Option<SpdMatrix>, CliError> {
        if smallest_eigenvalue(&sym).map_err(CliError::from)? <= 0.0 {
            return Ok(None);
        }
        match SpdMatrix::new(sym) {
            Ok(m) => Ok(Some(m)),
            Err(SpdError::NotPositiveDefinite { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    match kind {
        EstimatorKind::HfOnly => {
            let n = (budget / costs.cost(0)).floor() as u64;
            let (cov, _) = single_level_covariance(model, 0, n, seed, MeanMode::SampleMean)?;
            to_spd(cov)
        }
        EstimatorKind::SurrogateOnly => {
            let level = costs.num_levels() - 1;
            let n = (budget / costs.cost(level)).floor() as u64;
            let (cov, _) = single_level_covariance(model, level, n, seed, MeanMode::SampleMean)?;
            to_spd(cov)
        }
        _ => {
            let (counts, weights) = plan.active_counts_and_weights();
            let mut levels = vec![0usize];
            levels.extend(plan.active_surrogates());
            let subset = LevelSubset::new(model, levels)?;
            let (h, _) = sample_hierarchy(&subset, &counts, seed)?;
            match kind {
                EstimatorKind::Emf => {
                    to_spd(emf_estimate(&h, &weights, MeanMode::SampleMean)?)
                }
                EstimatorKind::TruncatedEmf => Ok(Some(truncated_emf_estimate(
                    &h,
                    &weights,
                    MeanMode::SampleMean,
                    delta,
                )?)),
                EstimatorKind::Lemf => {
                    Ok(Some(lemf_estimate(&h, &weights, MeanMode::SampleMean)?))
                }
                _ => unreachable!("single-fidelity handled above"),
            }
        }
    }
}

pub fn cmd_metric(cfg: &MetricConfig) -> Result<MetricOutput, CliError> {
    cfg.validate()?;
    let model: TwoClassGaussian = cfg.model.build_two_class()?;

    // reference metric from the closed-form class moments
    let s_ref = similarity_matrix(model.class(0).sigma(), model.class(1).sigma())?;
    let mu_ref = model.mean_gap();
    let d_ref = dissimilarity_matrix(&s_ref, &mu_ref)?;
    let reference: LearnedMetric = gmml_metric(&s_ref, &d_ref, cfg.t)?.with_provenance("reference");

    // fixed test set from the label-balanced mixture
    let test_seed = stream_seed(cfg.root_seed, &[purpose::TEST_POINTS]);
    let test_points = model.sample_mixture_level0(cfg.test_points, test_seed);

    // class-mean gap estimated once from a high-fidelity pilot per class
    let mut class_means: Vec<DVector<f64>> = Vec::new();
    for class in 0..2u64 {
        let m = model.class(class as usize);
        let subset = LevelSubset::new(m, vec![0])?;
        let seed = stream_seed(cfg.root_seed, &[purpose::PILOT, class]);
        let (h, _) = sample_hierarchy(&subset, &[cfg.pilot_size], seed)?;
        class_means.push(h.level(0).column_mean());
    }
    let mu_hat = &class_means[0] - &class_means[1];

    // per-class allocation from closed-form class moments
    let plans_for = |budget: f64| -> Result<Vec<AllocationPlan>, CliError> {
        (0..2)
            .map(|c| {
                let m = model.class(c);
                let moments = m.closed_form_moments()?;
                optimal_allocation(&moments, m.costs(), budget, Rounding::Floor)
                    .map_err(CliError::from)
            })
            .collect()
    };

    let mut rows_csv = String::from("budget,estimator,trial,mre,d_frob,d_logE,d_aff,status\n");
    let mut summary_csv = String::from(
        "budget,estimator,trials,valid_trials,mean_mre,frac_invalid,\
         mean_d_frob_sq,mean_d_logE_sq,mean_d_aff_sq\n",
    );

    let trials = cfg.trials as usize;
    for (bi, &budget) in cfg.budgets.iter().enumerate() {
        let plans = plans_for(budget)?;
        let results: Vec<Vec<TrialResult>> = run_trials(trials, |t| {
            cfg.estimators
                .iter()
                .map(|&kind| {
                    let mut covs: Vec<SpdMatrix> = Vec::with_capacity(2);
                    for class in 0..2usize {
                        let seed = stream_seed(
                            cfg.root_seed,
                            &[purpose::TRIAL, (bi * 2 + class) as u64, t as u64],
                        );
                        match class_covariance(
                            model.class(class),
                            &plans[class],
                            kind,
                            budget,
                            cfg.delta,
                            seed,
                        ) {
                            Ok(Some(cov)) => covs.push(cov),
                            Ok(None) => return Ok(TrialResult::InvalidMetric),
                            Err(e) => return Err(e),
                        }
                    }
                    let s = match similarity_matrix(&covs[0], &covs[1]) {
                        Ok(s) => s,
                        Err(_) => return Ok(TrialResult::InvalidMetric),
                    };
                    let d = dissimilarity_matrix(&s, &mu_hat)?;
                    let learned = gmml_metric(&s, &d, cfg.t)?.with_provenance(kind.label());
                    let mre = mean_relative_error(&learned, &reference, &test_points)?;
                    let a = learned.matrix();
                    let a0 = reference.matrix();
                    Ok(TrialResult::Valid {
                        mre: mre.value,
                        d_frob: dist_frobenius(a.as_symmetric(), a0.as_symmetric())?,
                        d_loge: dist_log_euclidean(a, a0)?,
                        d_aff: dist_affine_invariant(a, a0)?,
                    })
                })
                .collect::<Result<Vec<TrialResult>, CliError>>()
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

        for (ei, kind) in cfg.estimators.iter().enumerate() {
            let mut valid = 0usize;
            let mut sums = [0.0f64; 4]; // mre, frob², logE², aff²
            for (t, per_estimator) in results.iter().enumerate() {
                match &per_estimator[ei] {
                    TrialResult::Valid {
                        mre,
                        d_frob,
                        d_loge,
                        d_aff,
                    } => {
                        valid += 1;
                        sums[0] += mre;
                        sums[1] += d_frob * d_frob;
                        sums[2] += d_loge * d_loge;
                        sums[3] += d_aff * d_aff;
                        push_csv_row(
                            &mut rows_csv,
                            &[
                                fmt_f64(budget),
                                kind.label().to_string(),
                                t.to_string(),
                                fmt_f64(*mre),
                                fmt_f64(*d_frob),
                                fmt_f64(*d_loge),
                                fmt_f64(*d_aff),
                                "ok".to_string(),
                            ],
                        );
                    }
                    TrialResult::InvalidMetric => {
                        push_csv_row(
                            &mut rows_csv,
                            &[
                                fmt_f64(budget),
                                kind.label().to_string(),
                                t.to_string(),
                                "nan".to_string(),
                                "nan".to_string(),
                                "nan".to_string(),
                                "nan".to_string(),
                                "invalid_metric".to_string(),
                            ],
                        );
                    }
                }
            }
            let mean = |s: f64| if valid > 0 { s / valid as f64 } else { f64::NAN };
            push_csv_row(
                &mut summary_csv,
                &[
                    fmt_f64(budget),
                    kind.label().to_string(),
                    trials.to_string(),
                    valid.to_string(),
                    fmt_f64(mean(sums[0])),
                    fmt_f64((trials - valid) as f64 / trials as f64),
                    fmt_f64(mean(sums[1])),
                    fmt_f64(mean(sums[2])),
                    fmt_f64(mean(sums[3])),
                ],
            );
        }
    }
    Ok(MetricOutput {
        rows_csv,
        summary_csv,
    })
}
