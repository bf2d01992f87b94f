//! The five subcommands. Each takes a parsed config and returns its
//! serializable output; `main` owns argument parsing, file writing, and exit
//! codes.

mod bench;
mod estimate;
mod metric;
mod pilot;
mod plan;

pub use bench::{cmd_bench, BenchOutput};
pub use estimate::{cmd_estimate, EstimateOutput};
pub use metric::{cmd_metric, MetricOutput};
pub use pilot::{cmd_pilot, PilotOutput};
pub use plan::{cmd_plan, PlanOutput};

use mfcov_core::spd::{
    dist_affine_invariant, dist_frobenius, dist_log_euclidean, smallest_eigenvalue, SpdError,
};
use mfcov_core::{SpdMatrix, SymmetricMatrix};

use crate::error::CliError;

/// A covariance estimate: definiteness-carrying when the estimator
/// guarantees it, plain symmetric otherwise.
pub(crate) enum Estimate {
    Symmetric(SymmetricMatrix),
    Spd(SpdMatrix),
}

/// Distances of an estimate to the reference, with the log-based metrics
/// mapped to `inf` for indefinite estimates (their distance to any SPD
/// matrix is undefined/infinite).
pub(crate) struct Distances {
    pub frob: f64,
    pub loge: f64,
    pub aff: f64,
    pub lambda_min: f64,
}

impl Estimate {
    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        match self {
            Estimate::Symmetric(s) => s,
            Estimate::Spd(m) => m.as_symmetric(),
        }
    }

    pub fn lambda_min(&self) -> Result<f64, CliError> {
        match self {
            Estimate::Symmetric(s) => smallest_eigenvalue(s).map_err(CliError::from),
            Estimate::Spd(m) => Ok(m.smallest_eigenvalue()),
        }
    }

    /// The estimate as an SPD matrix, when definite. Estimators that carry
    /// their spectrum keep it (essential for truncation thresholds below
    /// round-off); plain symmetric estimates are validated fresh.
    fn to_spd(&self) -> Result<Option<SpdMatrix>, CliError> {
        match self {
            Estimate::Spd(m) => Ok(Some(m.clone())),
            Estimate::Symmetric(s) => {
                if smallest_eigenvalue(s).map_err(CliError::from)? <= 0.0 {
                    return Ok(None);
                }
                match SpdMatrix::new(s.clone()) {
                    Ok(m) => Ok(Some(m)),
                    Err(SpdError::NotPositiveDefinite { .. }) => Ok(None),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    pub fn distances(&self, reference: &SpdMatrix) -> Result<Distances, CliError> {
        let frob = dist_frobenius(self.as_symmetric(), reference.as_symmetric())?;
        let lambda_min = self.lambda_min()?;
        let (loge, aff) = match self.to_spd()? {
            Some(spd) => {
                let loge = match dist_log_euclidean(&spd, reference) {
                    Ok(v) => v,
                    Err(SpdError::NotPositiveDefinite { .. }) => f64::INFINITY,
                    Err(e) => return Err(e.into()),
                };
                let aff = match dist_affine_invariant(&spd, reference) {
                    Ok(v) => v,
                    Err(SpdError::NotPositiveDefinite { .. }) => f64::INFINITY,
                    Err(e) => return Err(e.into()),
                };
                (loge, aff)
            }
            None => (f64::INFINITY, f64::INFINITY),
        };
        Ok(Distances {
            frob,
            loge,
            aff,
            lambda_min,
        })
    }
}
