//! `mfcov plan`: optimal sample allocation for a budget, bundled with the
//! benefit condition and the predicted speedup.

use serde::Serialize;

use mfcov_core::{
    benefit_condition, first_order_optimal_mse, optimal_allocation, predicted_speedup,
    AllocationPlan, BenefitCondition, CostModel,
};

use crate::config::PlanConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct PlanOutput {
    #[serde(flatten)]
    pub plan: AllocationPlan,
    pub benefit: BenefitCondition,
    pub speedup: f64,
    pub first_order_mse: f64,
}

pub fn cmd_plan(cfg: &PlanConfig) -> Result<PlanOutput, CliError> {
    let moments = cfg.resolve_moments()?;
    let costs = CostModel::new(cfg.costs.clone())
        .map_err(|e| CliError::config(format!("costs: {e}")))?;
    if costs.num_levels() != moments.num_surrogates() + 1 {
        return Err(CliError::config(format!(
            "costs: expected {} per-level entries, got {}",
            moments.num_surrogates() + 1,
            costs.num_levels()
        )));
    }
    if costs.ordering_violated() {
        eprintln!("warning: costs are not nonincreasing across fidelity levels");
    }
    let plan = optimal_allocation(&moments, &costs, cfg.budget, cfg.rounding)?;
    let benefit = benefit_condition(&moments, &costs)?;
    let speedup = predicted_speedup(&moments, &costs)?;
    let first_order_mse = first_order_optimal_mse(&moments, &costs, cfg.budget)?;
    Ok(PlanOutput {
        plan,
        benefit,
        speedup,
        first_order_mse,
    })
}
