//! JSON experiment configurations, one schema per subcommand. Unknown keys
//! are rejected so that a config file is a complete, diffable record of an
//! experiment.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use mfcov_core::models::{
    presets, GaussianNoiseHierarchy, HeatConduction1D, TwoClassGaussian,
};
use mfcov_core::{CostModel, MeanMode, MomentSummary, Rounding, SpdMatrix, SymmetricMatrix};

use crate::error::CliError;

/// The estimators a benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    HfOnly,
    SurrogateOnly,
    Emf,
    TruncatedEmf,
    Lemf,
}

impl EstimatorKind {
    pub fn all() -> Vec<EstimatorKind> {
        vec![
            EstimatorKind::HfOnly,
            EstimatorKind::SurrogateOnly,
            EstimatorKind::Emf,
            EstimatorKind::TruncatedEmf,
            EstimatorKind::Lemf,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::HfOnly => "hf_only",
            EstimatorKind::SurrogateOnly => "surrogate_only",
            EstimatorKind::Emf => "emf",
            EstimatorKind::TruncatedEmf => "truncated_emf",
            EstimatorKind::Lemf => "lemf",
        }
    }

    pub fn is_multi_fidelity(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Emf | EstimatorKind::TruncatedEmf | EstimatorKind::Lemf
        )
    }
}

/// Distances a benchmark can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Frobenius,
    LogEuclidean,
    AffineInvariant,
}

impl MetricKind {
    pub fn all() -> Vec<MetricKind> {
        vec![
            MetricKind::Frobenius,
            MetricKind::LogEuclidean,
            MetricKind::AffineInvariant,
        ]
    }
}

fn de_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let d = rows.len();
    if d == 0 {
        return Err(CliError::config(format!("{what}: matrix is empty")));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(CliError::config(format!(
                "{what}: row {i} has {} entries, expected {d}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn de_spd(rows: &[Vec<f64>], what: &str) -> Result<SpdMatrix, CliError> {
    SpdMatrix::from_entries(de_matrix(rows, what)?)
        .map_err(|e| CliError::config(format!("{what}: {e}")))
}

fn de_symmetric(rows: &[Vec<f64>], what: &str) -> Result<SymmetricMatrix, CliError> {
    SymmetricMatrix::new(de_matrix(rows, what)?)
        .map_err(|e| CliError::config(format!("{what}: {e}")))
}

/// Model block of a config: explicit parameters or a bundled preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Gaussian noise-corruption hierarchy with explicit matrices.
    Gaussian {
        sigma: Vec<Vec<f64>>,
        gammas: Vec<Vec<Vec<f64>>>,
        costs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
    },
    /// Bundled 4-dimensional Gaussian benchmark.
    Gaussian4d,
    /// Heat-conduction ladder with explicit interior grid sizes
    /// (costs are the grid sizes).
    Heat1d { grid_sizes: Vec<usize> },
    /// Bundled desk-scale heat ladder (4096, 256).
    HeatDesk,
    /// Bundled full-scale heat ladder (65536, 1024).
    HeatFull,
    /// Two-class Gaussian source for the metric-learning pipeline.
    TwoClassGaussian {
        mu0: Vec<f64>,
        mu1: Vec<f64>,
        sigma0: Vec<Vec<f64>>,
        sigma1: Vec<Vec<f64>>,
        gammas: Vec<Vec<Vec<f64>>>,
        costs: Vec<f64>,
    },
    /// Bundled two-class Gaussian preset.
    TwoClassPreset,
}

/// A constructed single-source model.
pub enum ModelInstance {
    Gaussian(GaussianNoiseHierarchy),
    Heat(HeatConduction1D),
}

impl ModelInstance {
    /// Exact moments when the model admits them.
    pub fn closed_form_moments(&self) -> Option<MomentSummary> {
        match self {
            ModelInstance::Gaussian(m) => m.closed_form_moments().ok(),
            ModelInstance::Heat(_) => None,
        }
    }
}

impl ModelSpec {
    /// Builds a single-source model; rejects two-class specs.
    pub fn build(&self) -> Result<ModelInstance, CliError> {
        match self {
            ModelSpec::Gaussian {
                sigma,
                gammas,
                costs,
                mean,
            } => {
                let sigma = de_spd(sigma, "model.sigma")?;
                let gam = gammas
                    .iter()
                    .enumerate()
                    .map(|(i, g)| de_symmetric(g, &format!("model.gammas[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let costs = CostModel::new(costs.clone())
                    .map_err(|e| CliError::config(format!("model.costs: {e}")))?;
                let model = match mean {
                    Some(m) => GaussianNoiseHierarchy::with_mean(
                        DVector::from_row_slice(m),
                        sigma,
                        gam,
                        costs,
                    ),
                    None => GaussianNoiseHierarchy::new(sigma, gam, costs),
                }
                .map_err(|e| CliError::config(format!("model: {e}")))?;
                Ok(ModelInstance::Gaussian(model))
            }
            ModelSpec::Gaussian4d => Ok(ModelInstance::Gaussian(presets::gaussian_4d())),
            ModelSpec::Heat1d { grid_sizes } => Ok(ModelInstance::Heat(
                HeatConduction1D::new(grid_sizes.clone())
                    .map_err(|e| CliError::config(format!("model.grid_sizes: {e}")))?,
            )),
            ModelSpec::HeatDesk => Ok(ModelInstance::Heat(presets::heat_desk())),
            ModelSpec::HeatFull => Ok(ModelInstance::Heat(presets::heat_full())),
            ModelSpec::TwoClassGaussian { .. } | ModelSpec::TwoClassPreset => Err(
                CliError::config("model: a two-class model is only valid for the metric command"),
            ),
        }
    }

    /// Builds a two-class model; rejects single-source specs.
    pub fn build_two_class(&self) -> Result<TwoClassGaussian, CliError> {
        match self {
            ModelSpec::TwoClassPreset => Ok(presets::two_class_gaussian()),
            ModelSpec::TwoClassGaussian {
                mu0,
                mu1,
                sigma0,
                sigma1,
                gammas,
                costs,
            } => {
                let gam = gammas
                    .iter()
                    .enumerate()
                    .map(|(i, g)| de_symmetric(g, &format!("model.gammas[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let costs = CostModel::new(costs.clone())
                    .map_err(|e| CliError::config(format!("model.costs: {e}")))?;
                let class0 = GaussianNoiseHierarchy::with_mean(
                    DVector::from_row_slice(mu0),
                    de_spd(sigma0, "model.sigma0")?,
                    gam.clone(),
                    costs.clone(),
                )
                .map_err(|e| CliError::config(format!("model (class 0): {e}")))?;
                let class1 = GaussianNoiseHierarchy::with_mean(
                    DVector::from_row_slice(mu1),
                    de_spd(sigma1, "model.sigma1")?,
                    gam,
                    costs,
                )
                .map_err(|e| CliError::config(format!("model (class 1): {e}")))?;
                TwoClassGaussian::new(class0, class1)
                    .map_err(|e| CliError::config(format!("model: {e}")))
            }
            _ => Err(CliError::config(
                "model: the metric command needs a two-class model",
            )),
        }
    }
}

fn default_mean_mode() -> MeanMode {
    MeanMode::SampleMean
}

fn default_delta() -> f64 {
    1e-16
}

fn default_rounding() -> Rounding {
    Rounding::Floor
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::all()
}

fn default_metrics() -> Vec<MetricKind> {
    MetricKind::all()
}

fn default_t() -> f64 {
    0.1
}

fn default_test_points() -> u64 {
    5000
}

/// `mfcov pilot` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    pub model: ModelSpec,
    pub pilot_size: u64,
    #[serde(default = "default_mean_mode")]
    pub mean_mode: MeanMode,
    pub root_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// `mfcov plan` configuration. Moments come inline or from a pilot output
/// file; exactly one of the two must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments_path: Option<PathBuf>,
    pub costs: Vec<f64>,
    pub budget: f64,
    #[serde(default = "default_rounding")]
    pub rounding: Rounding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// `mfcov estimate` configuration. Samples come from stored CSV files (via a
/// manifest) or from a model plus sample counts; counts and weights may be
/// given explicitly or through a stored plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub estimator: EstimatorKind,
    #[serde(default = "default_mean_mode")]
    pub mean_mode: MeanMode,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_samples: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Where the reference covariance of a benchmark comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// The model's exact level-0 covariance (synthetic models).
    ClosedForm,
    /// A one-time high-fidelity Monte Carlo estimate with `samples` events,
    /// drawn from a dedicated stream of the root seed.
    MonteCarlo { samples: u64 },
    /// A stored covariance JSON (as written by `estimate`).
    File { path: PathBuf },
}

/// `mfcov bench` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub model: ModelSpec,
    pub budgets: Vec<f64>,
    pub trials: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default = "default_mean_mode")]
    pub mean_mode: MeanMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_size: Option<u64>,
    pub root_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// `mfcov metric` configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub model: ModelSpec,
    pub budgets: Vec<f64>,
    pub trials: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub pilot_size: u64,
    #[serde(default = "default_test_points")]
    pub test_points: u64,
    pub root_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Parses a JSON config file into the given schema with field-level errors.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.budgets.is_empty() {
            return Err(CliError::config("budgets: must be nonempty"));
        }
        if self.budgets.iter().any(|&b| !(b > 0.0)) {
            return Err(CliError::config("budgets: must be positive"));
        }
        if self.trials < 1 {
            return Err(CliError::config("trials: must be >= 1"));
        }
        if self.estimators.is_empty() {
            return Err(CliError::config("estimators: must be nonempty"));
        }
        if !(self.delta > 0.0) {
            return Err(CliError::config("delta: must be positive"));
        }
        Ok(())
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.budgets.is_empty() {
            return Err(CliError::config("budgets: must be nonempty"));
        }
        if self.trials < 1 {
            return Err(CliError::config("trials: must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(CliError::config("t: must lie in [0, 1]"));
        }
        if self.pilot_size < 2 {
            return Err(CliError::config("pilot_size: must be >= 2"));
        }
        if self.test_points < 1 {
            return Err(CliError::config("test_points: must be >= 1"));
        }
        Ok(())
    }
}

impl PlanConfig {
    /// Resolves the moment summary from the inline block or the file.
    pub fn resolve_moments(&self) -> Result<MomentSummary, CliError> {
        match (&self.moments, &self.moments_path) {
            (Some(m), None) => Ok(m.clone()),
            (None, Some(p)) => {
                let text = read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))
            }
            (Some(_), Some(_)) => Err(CliError::config(
                "moments / moments_path: provide exactly one, not both",
            )),
            (None, None) => Err(CliError::config(
                "moments / moments_path: one of the two is required",
            )),
        }
    }
}
