//! `mfcov estimate`: one covariance estimate from stored samples or from a
//! freshly sampled model, with diagnostics.

use mfcov_core::models::{sample_hierarchy, LevelSubset};
use mfcov_core::spd::dist_frobenius;
use mfcov_core::{
    emf_estimate, lemf_estimate, lemf_estimate_via_differences, sample_covariance,
    truncated_emf_estimate, AllocationPlan, CoupledSampleHierarchy,
};

use super::Estimate;
use crate::config::{EstimateConfig, EstimatorKind, ModelInstance};
use crate::error::CliError;
use crate::io::{read_samples, write_samples, CovarianceBlob};

pub type EstimateOutput = CovarianceBlob;

/// Tolerance of the barycenter-form cross-check requested by
/// `--verify-frechet` (relative Frobenius).
const FRECHET_TOLERANCE: f64 = 1e-10;

struct Resolved {
    hierarchy: CoupledSampleHierarchy,
    alphas: Vec<f64>,
    realized_cost: f64,
}

fn needed_alphas(cfg: &EstimateConfig, surrogates: usize) -> Result<Vec<f64>, CliError> {
    if !cfg.estimator.is_multi_fidelity() {
        return Ok(vec![0.0; surrogates]);
    }
    match &cfg.alphas {
        Some(a) if a.len() == surrogates => Ok(a.clone()),
        Some(a) => Err(CliError::config(format!(
            "alphas: expected {surrogates} control-variate weights, got {}",
            a.len()
        ))),
        None => Err(CliError::config(
            "alphas: required for multi-fidelity estimators (or supply plan_path)",
        )),
    }
}

fn load_plan(path: &std::path::Path) -> Result<AllocationPlan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn resolve(cfg: &EstimateConfig) -> Result<Resolved, CliError> {
    match (&cfg.samples_manifest, &cfg.model) {
        (Some(path), None) => {
            let (hierarchy, costs) = read_samples(path)?;
            let realized_cost = hierarchy
                .counts()
                .iter()
                .zip(&costs)
                .map(|(&n, &c)| n as f64 * c)
                .sum();
            let alphas = needed_alphas(cfg, hierarchy.num_surrogates())?;
            Ok(Resolved {
                hierarchy,
                alphas,
                realized_cost,
            })
        }
        (None, Some(spec)) => {
            let seed = cfg.root_seed.ok_or_else(|| {
                CliError::config("root_seed: required when sampling from a model")
            })?;
            let instance = spec.build()?;
            // counts and weights from a stored plan or explicit fields
            let (counts, alphas, levels): (Vec<u64>, Vec<f64>, Option<Vec<usize>>) =
                if let Some(plan_path) = &cfg.plan_path {
                    let plan = load_plan(plan_path)?;
                    let (counts, weights) = plan.active_counts_and_weights();
                    let mut levels = vec![0usize];
                    levels.extend(plan.active_surrogates());
                    (counts, weights, Some(levels))
                } else {
                    let n = cfg.n.clone().ok_or_else(|| {
                        CliError::config("n: per-level sample counts are required (or plan_path)")
                    })?;
                    let surrogates = n.len().saturating_sub(1);
                    let alphas = needed_alphas(cfg, surrogates)?;
                    (n, alphas, None)
                };
            // single-fidelity estimators only touch one level
            let single_level = match cfg.estimator {
                EstimatorKind::HfOnly => Some(0usize),
                EstimatorKind::SurrogateOnly => Some(counts.len() - 1),
                _ => None,
            };
            let run = |model: &dyn SampleSource| -> Result<Resolved, CliError> {
                if let Some(level) = single_level {
                    let n = vec![counts[level]];
                    let (hierarchy, cost) = model.sample_subset(vec![level], &n, seed)?;
                    Ok(Resolved {
                        hierarchy,
                        alphas: vec![],
                        realized_cost: cost,
                    })
                } else if let Some(levels) = &levels {
                    let (hierarchy, cost) = model.sample_subset(levels.clone(), &counts, seed)?;
                    Ok(Resolved {
                        hierarchy,
                        alphas: alphas.clone(),
                        realized_cost: cost,
                    })
                } else {
                    let all: Vec<usize> = (0..counts.len()).collect();
                    let (hierarchy, cost) = model.sample_subset(all, &counts, seed)?;
                    Ok(Resolved {
                        hierarchy,
                        alphas: alphas.clone(),
                        realized_cost: cost,
                    })
                }
            };
            match &instance {
                ModelInstance::Gaussian(m) => run(m),
                ModelInstance::Heat(m) => run(m),
            }
        }
        (Some(_), Some(_)) => Err(CliError::config(
            "samples_manifest / model: provide exactly one source, not both",
        )),
        (None, None) => Err(CliError::config(
            "samples_manifest / model: one sample source is required",
        )),
    }
}

/// Object-safe sampling facade so `resolve` can stay monomorphic.
trait SampleSource {
    fn sample_subset(
        &self,
        levels: Vec<usize>,
        n: &[u64],
        seed: u64,
    ) -> Result<(CoupledSampleHierarchy, f64), CliError>;
}

impl<M: mfcov_core::models::CoupledModel> SampleSource for M {
    fn sample_subset(
        &self,
        levels: Vec<usize>,
        n: &[u64],
        seed: u64,
    ) -> Result<(CoupledSampleHierarchy, f64), CliError> {
        let subset = LevelSubset::new(self, levels)?;
        sample_hierarchy(&subset, n, seed).map_err(CliError::from)
    }
}

pub fn cmd_estimate(cfg: &EstimateConfig, verify_frechet: bool) -> Result<EstimateOutput, CliError> {
    if !(cfg.delta > 0.0) {
        return Err(CliError::config("delta: must be positive"));
    }
    let resolved = resolve(cfg)?;
    let h = &resolved.hierarchy;
    let mode = cfg.mean_mode;
    let mut frechet_gap = None;
    let estimate = match cfg.estimator {
        EstimatorKind::HfOnly => Estimate::Symmetric(sample_covariance(h.level(0), mode)?),
        EstimatorKind::SurrogateOnly => Estimate::Symmetric(sample_covariance(
            h.level(h.num_levels() - 1),
            mode,
        )?),
        EstimatorKind::Emf => Estimate::Symmetric(emf_estimate(h, &resolved.alphas, mode)?),
        EstimatorKind::TruncatedEmf => {
            Estimate::Spd(truncated_emf_estimate(h, &resolved.alphas, mode, cfg.delta)?)
        }
        EstimatorKind::Lemf => {
            let est = lemf_estimate(h, &resolved.alphas, mode)?;
            if verify_frechet {
                let alt = lemf_estimate_via_differences(h, &resolved.alphas, mode)?;
                let gap = dist_frobenius(est.as_symmetric(), alt.as_symmetric())?;
                let scale = est.as_symmetric().norm().max(1.0);
                if gap > FRECHET_TOLERANCE * scale {
                    return Err(CliError::numeric(format!(
                        "barycenter-form cross-check failed: gap {gap:.3e} exceeds {:.1e} (relative)",
                        FRECHET_TOLERANCE
                    )));
                }
                frechet_gap = Some(gap);
            }
            Estimate::Spd(est)
        }
    };
    if let Some(dir) = &cfg.save_samples {
        let costs: Vec<f64> = match (&cfg.samples_manifest, &cfg.model) {
            (Some(path), _) => read_samples(path)?.1,
            (_, Some(spec)) => match spec.build()? {
                ModelInstance::Gaussian(m) => subset_costs(&m, h, cfg)?,
                ModelInstance::Heat(m) => subset_costs(&m, h, cfg)?,
            },
            _ => unreachable!("resolve() accepted the source"),
        };
        write_samples(dir, h, &costs)?;
    }
    let lambda_min = estimate.lambda_min()?;
    let mut blob = CovarianceBlob::from_matrix(cfg.estimator.label(), estimate.as_symmetric(), lambda_min);
    blob.realized_cost = Some(resolved.realized_cost);
    blob.frechet_gap = frechet_gap;
    Ok(blob)
}

/// Per-level costs matching the hierarchy actually sampled.
fn subset_costs<M: mfcov_core::models::CoupledModel>(
    model: &M,
    h: &CoupledSampleHierarchy,
    cfg: &EstimateConfig,
) -> Result<Vec<f64>, CliError> {
    let all = model.costs().costs().to_vec();
    match cfg.estimator {
        EstimatorKind::HfOnly => Ok(vec![all[0]]),
        EstimatorKind::SurrogateOnly => Ok(vec![*all.last().expect("nonempty")]),
        _ if h.num_levels() == all.len() => Ok(all),
        _ => {
            // plan route with dropped levels: reconstruct from the stored plan
            let plan_path = cfg
                .plan_path
                .as_ref()
                .ok_or_else(|| CliError::config("save_samples: cannot infer level costs"))?;
            let plan = load_plan(plan_path)?;
            let mut costs = vec![all[0]];
            for l in plan.active_surrogates() {
                costs.push(all[l]);
            }
            Ok(costs)
        }
    }
}
