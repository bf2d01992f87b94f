//! Multi-fidelity covariance estimation in the log-Euclidean geometry of
//! the SPD manifold.
//!
//! The crate provides, bottom to top:
//!
//! - [`spd`]: symmetric/SPD linear algebra — matrix `Log`/`Exp`, logarithmic
//!   addition and scaling, three distances, eigenvalue truncation, and the
//!   weighted log-Euclidean Fréchet mean;
//! - [`estimators`]: single-fidelity, Euclidean multi-fidelity (EMF),
//!   truncated-EMF, and log-Euclidean multi-fidelity (LEMF) covariance
//!   estimators over a coupled sample hierarchy;
//! - [`moments`]: generalized variances/correlations (pilot and closed
//!   form), optimal control-variate weights, the first-order MSE, optimal
//!   budgeted sample allocation, and the benefit condition;
//! - [`models`]: coupled data sources — a Gaussian noise-corruption
//!   hierarchy and a 1D heat-conduction solver at multiple grid
//!   resolutions;
//! - [`metric`]: the geometric-mean metric-learning downstream task;
//! - [`rng`] and [`parallel`]: deterministic stream derivation and
//!   schedule-independent data-parallel helpers (rayon behind the default
//!   `parallel` feature, with a sequential fallback).

pub mod estimators;
pub mod metric;
pub mod models;
pub mod moments;
pub mod parallel;
pub mod rng;
pub mod spd;

pub use estimators::{
    emf_estimate, lemf_estimate, lemf_estimate_via_differences, sample_covariance,
    truncated_emf_estimate, CoupledSampleHierarchy, EstimatorError, MeanMode,
};
pub use models::{pilot_hierarchy, sample_hierarchy, single_level_covariance, CoupledModel};
pub use moments::{
    benefit_condition, closed_form_moments_gaussian, estimate_moments, first_order_optimal_mse,
    optimal_allocation, optimal_coefficients, predicted_mse, predicted_speedup, AllocationError,
    AllocationPlan, BenefitCondition, CostModel, MomentSummary, MomentsError, Rounding,
};
pub use spd::{
    dist_affine_invariant, dist_frobenius, dist_log_euclidean, frechet_mean_log_euclidean,
    log_add, log_sub, smallest_eigenvalue, spd_log, spd_pow, sym_eig, sym_exp,
    truncate_eigenvalues, EigenDecomposition, SpdError, SpdMatrix, SymmetricMatrix,
};
