//! `mfcov pilot`: run a coupled pilot study and emit the generalized
//! moments.

use serde::Serialize;

use mfcov_core::models::{pilot_hierarchy, ModelError};
use mfcov_core::{estimate_moments, MomentSummary};

use crate::config::{ModelInstance, PilotConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct PilotOutput {
    #[serde(flatten)]
    pub moments: MomentSummary,
    pub pilot_size: u64,
    pub pilot_cost: f64,
}

pub fn cmd_pilot(cfg: &PilotConfig) -> Result<PilotOutput, CliError> {
    if cfg.pilot_size == 0 {
        return Err(CliError::config("pilot_size: must be >= 1"));
    }
    let instance = cfg.model.build()?;
    let (hierarchy, pilot_cost) = match &instance {
        ModelInstance::Gaussian(m) => pilot_hierarchy(m, cfg.pilot_size, cfg.root_seed),
        ModelInstance::Heat(m) => pilot_hierarchy(m, cfg.pilot_size, cfg.root_seed),
    }
    .map_err(|e: ModelError| CliError::numeric(e))?;
    let moments = estimate_moments(&hierarchy, cfg.mean_mode)?;
    Ok(PilotOutput {
        moments,
        pilot_size: cfg.pilot_size,
        pilot_cost,
    })
}
