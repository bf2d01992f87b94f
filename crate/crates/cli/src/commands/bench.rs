//! `mfcov bench`: budget-sweep benchmark of the estimators against a
//! reference covariance, with per-trial rows and per-cell summaries.
//!
//! For every budget, all estimators spend (up to rounding) the same cost:
//! the single-fidelity baselines put `B/c₀` samples on the high-fidelity
//! level or `B/c_L` on the cheapest one, and the multi-fidelity estimators
//! share one optimally allocated hierarchy per trial. Trials run
//! concurrently on independent derived streams; rows are emitted in
//! `(budget, estimator, trial)` order whatever the schedule, so the CSV is a
//! pure function of the config. A failed trial is recorded as a row of `nan`
//! cells and the run continues.

use std::time::Instant;

use mfcov_core::models::{sample_hierarchy, single_level_covariance, LevelSubset};
use mfcov_core::parallel::run_trials;
use mfcov_core::rng::{purpose, stream_seed};
use mfcov_core::{
    emf_estimate, estimate_moments, lemf_estimate, optimal_allocation, pilot_hierarchy,
    truncated_emf_estimate, AllocationPlan, CoupledModel, CoupledSampleHierarchy, MomentSummary,
    Rounding, SpdMatrix,
};

use super::Estimate;
use crate::config::{BenchConfig, EstimatorKind, MetricKind, ModelInstance, ReferenceSpec};
use crate::error::CliError;
use crate::io::{fmt_f64, push_csv_row};

pub struct BenchOutput {
    /// `budget,estimator,trial,d_frob,d_logE,d_aff,lambda_min,wall_ms`
    pub rows_csv: String,
    /// `budget,estimator,trials,metric,mean_sq,min_sq,max_sq,frac_indefinite`
    pub summary_csv: String,
}

#[derive(Clone, Copy)]
struct TrialRow {
    frob: f64,
    loge: f64,
    aff: f64,
    lambda_min: f64,
    wall_ms: f64,
}

impl TrialRow {
    fn failed() -> Self {
        TrialRow {
            frob: f64::NAN,
            loge: f64::NAN,
            aff: f64::NAN,
            lambda_min: f64::NAN,
            wall_ms: 0.0,
        }
    }
}

pub fn cmd_bench(cfg: &BenchConfig) -> Result<BenchOutput, CliError> {
    cfg.validate()?;
    let instance = cfg.model.build()?;
    let closed_moments = instance.closed_form_moments();
    match &instance {
        ModelInstance::Gaussian(m) => run(cfg, m, closed_moments),
        ModelInstance::Heat(m) => run(cfg, m, closed_moments),
    }
}

fn reference_covariance<M: CoupledModel>(
    cfg: &BenchConfig,
    model: &M,
) -> Result<SpdMatrix, CliError> {
    let spec = match &cfg.reference {
        Some(s) => s.clone(),
        None => {
            if model.true_covariance().is_some() {
                ReferenceSpec::ClosedForm
            } else {
                return Err(CliError::config(
                    "reference: the model has no closed-form covariance; configure \
                     {\"kind\": \"monte_carlo\", \"samples\": ...} or {\"kind\": \"file\", ...}",
                ));
            }
        }
    };
    match spec {
        ReferenceSpec::ClosedForm => model.true_covariance().ok_or_else(|| {
            CliError::config("reference: closed_form requested but the model has none")
        }),
        ReferenceSpec::MonteCarlo { samples } => {
            let seed = stream_seed(cfg.root_seed, &[purpose::REFERENCE]);
            let (cov, _) = single_level_covariance(model, 0, samples, seed, cfg.mean_mode)?;
            SpdMatrix::new(cov)
                .map_err(|e| CliError::numeric(format!("monte-carlo reference is not SPD: {e}")))
        }
        ReferenceSpec::File { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            let blob: crate::io::CovarianceBlob = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            SpdMatrix::new(blob.matrix()?)
                .map_err(|e| CliError::numeric(format!("stored reference is not SPD: {e}")))
        }
    }
}

fn planning_moments<M: CoupledModel>(
    cfg: &BenchConfig,
    model: &M,
    closed: Option<MomentSummary>,
) -> Result<MomentSummary, CliError> {
    if let Some(m) = closed {
        return Ok(m);
    }
    let pilot_size = cfg.pilot_size.ok_or_else(|| {
        CliError::config("pilot_size: required when the model has no closed-form moments")
    })?;
    let seed = stream_seed(cfg.root_seed, &[purpose::PILOT]);
    let (h, _) = pilot_hierarchy(model, pilot_size, seed)?;
    estimate_moments(&h, cfg.mean_mode).map_err(CliError::from)
}

fn run<M: CoupledModel>(
    cfg: &BenchConfig,
    model: &M,
    closed_moments: Option<MomentSummary>,
) -> Result<BenchOutput, CliError> {
    let reference = reference_covariance(cfg, model)?;
    let costs = model.costs().clone();
    let c0 = costs.cost(0);
    let c_last = costs.cost(costs.num_levels() - 1);
    let wants_mf = cfg.estimators.iter().any(EstimatorKind::is_multi_fidelity);
    let moments = if wants_mf {
        Some(planning_moments(cfg, model, closed_moments)?)
    } else {
        None
    };

    let mut rows_csv =
        String::from("budget,estimator,trial,d_frob,d_logE,d_aff,lambda_min,wall_ms\n");
    let mut summary_csv =
        String::from("budget,estimator,trials,metric,mean_sq,min_sq,max_sq,frac_indefinite\n");

    let trials = cfg.trials as usize;
    for (bi, &budget) in cfg.budgets.iter().enumerate() {
        // equal-cost sample counts for the baselines
        let n_hf = (budget / c0).floor() as u64;
        let n_sur = (budget / c_last).floor() as u64;
        if cfg.estimators.contains(&EstimatorKind::HfOnly) && n_hf == 0 {
            return Err(CliError::numeric(format!(
                "budget {budget} cannot afford one high-fidelity sample (cost {c0})"
            )));
        }
        if cfg.estimators.contains(&EstimatorKind::SurrogateOnly) && n_sur == 0 {
            return Err(CliError::numeric(format!(
                "budget {budget} cannot afford one surrogate sample (cost {c_last})"
            )));
        }
        let plan: Option<AllocationPlan> = match &moments {
            Some(m) => Some(optimal_allocation(m, &costs, budget, Rounding::Floor)?),
            None => None,
        };
        let (mf_levels, mf_counts, mf_alphas): (Vec<usize>, Vec<u64>, Vec<f64>) = match &plan {
            Some(p) => {
                let (counts, weights) = p.active_counts_and_weights();
                let mut levels = vec![0usize];
                levels.extend(p.active_surrogates());
                (levels, counts, weights)
            }
            None => (vec![], vec![], vec![]),
        };

        let trial_rows: Vec<Vec<TrialRow>> = run_trials(trials, |t| {
            let seed = stream_seed(cfg.root_seed, &[purpose::TRIAL, bi as u64, t as u64]);
            // one shared hierarchy per trial for the MF estimators
            let hierarchy: Result<Option<CoupledSampleHierarchy>, CliError> = if wants_mf {
                LevelSubset::new(model, mf_levels.clone())
                    .and_then(|subset| sample_hierarchy(&subset, &mf_counts, seed))
                    .map(|(h, _)| Some(h))
                    .map_err(CliError::from)
            } else {
                Ok(None)
            };
            cfg.estimators
                .iter()
                .map(|&kind| {
                    let start = Instant::now();
                    let estimate: Result<Estimate, CliError> = match kind {
                        EstimatorKind::HfOnly => {
                            single_level_covariance(model, 0, n_hf, seed, cfg.mean_mode)
                                .map(|(cov, _)| Estimate::Symmetric(cov))
                                .map_err(CliError::from)
                        }
                        EstimatorKind::SurrogateOnly => single_level_covariance(
                            model,
                            costs.num_levels() - 1,
                            n_sur,
                            seed,
                            cfg.mean_mode,
                        )
                        .map(|(cov, _)| Estimate::Symmetric(cov))
                        .map_err(CliError::from),
                        EstimatorKind::Emf => match &hierarchy {
                            Ok(Some(h)) => emf_estimate(h, &mf_alphas, cfg.mean_mode)
                                .map(Estimate::Symmetric)
                                .map_err(CliError::from),
                            Ok(None) => unreachable!("hierarchy sampled when MF requested"),
                            Err(e) => Err(CliError::numeric(e)),
                        },
                        EstimatorKind::TruncatedEmf => match &hierarchy {
                            Ok(Some(h)) => {
                                truncated_emf_estimate(h, &mf_alphas, cfg.mean_mode, cfg.delta)
                                    .map(Estimate::Spd)
                                    .map_err(CliError::from)
                            }
                            Ok(None) => unreachable!("hierarchy sampled when MF requested"),
                            Err(e) => Err(CliError::numeric(e)),
                        },
                        EstimatorKind::Lemf => match &hierarchy {
                            Ok(Some(h)) => lemf_estimate(h, &mf_alphas, cfg.mean_mode)
                                .map(Estimate::Spd)
                                .map_err(CliError::from),
                            Ok(None) => unreachable!("hierarchy sampled when MF requested"),
                            Err(e) => Err(CliError::numeric(e)),
                        },
                    };
                    let row = estimate
                        .and_then(|est| est.distances(&reference))
                        .map(|d| {
                            let wall_ms = if cfg.record_timing {
                                start.elapsed().as_secs_f64() * 1e3
                            } else {
                                0.0
                            };
                            TrialRow {
                                frob: d.frob,
                                loge: d.loge,
                                aff: d.aff,
                                lambda_min: d.lambda_min,
                                wall_ms,
                            }
                        });
                    row.unwrap_or_else(|_| TrialRow::failed())
                })
                .collect()
        });

        for (ei, kind) in cfg.estimators.iter().enumerate() {
            let cell: Vec<TrialRow> = trial_rows.iter().map(|rows| rows[ei]).collect();
            for (t, row) in cell.iter().enumerate() {
                push_csv_row(
                    &mut rows_csv,
                    &[
                        fmt_f64(budget),
                        kind.label().to_string(),
                        t.to_string(),
                        fmt_f64(row.frob),
                        fmt_f64(row.loge),
                        fmt_f64(row.aff),
                        fmt_f64(row.lambda_min),
                        fmt_f64(row.wall_ms),
                    ],
                );
            }
            for metric in &cfg.metrics {
                let (name, values): (&str, Vec<f64>) = match metric {
                    MetricKind::Frobenius => {
                        ("frobenius", cell.iter().map(|r| r.frob * r.frob).collect())
                    }
                    MetricKind::LogEuclidean => (
                        "log_euclidean",
                        cell.iter().map(|r| r.loge * r.loge).collect(),
                    ),
                    MetricKind::AffineInvariant => (
                        "affine_invariant",
                        cell.iter().map(|r| r.aff * r.aff).collect(),
                    ),
                };
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let indefinite = cell.iter().filter(|r| r.lambda_min <= 0.0).count();
                push_csv_row(
                    &mut summary_csv,
                    &[
                        fmt_f64(budget),
                        kind.label().to_string(),
                        trials.to_string(),
                        name.to_string(),
                        fmt_f64(mean),
                        fmt_f64(min),
                        fmt_f64(max),
                        fmt_f64(indefinite as f64 / trials as f64),
                    ],
                );
            }
        }
    }
    Ok(BenchOutput {
        rows_csv,
        summary_csv,
    })
}
