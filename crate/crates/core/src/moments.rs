//! Generalized moments of the sample-covariance hierarchy and the optimal
//! budget allocation built on them.
//!
//! The control-variate analysis runs on two scalars per level: the
//! generalized variance `σ_ℓ² = Tr(Cov[y⁽ℓ⁾(y⁽ℓ⁾)ᵀ]) = E‖y⁽ℓ⁾(y⁽ℓ⁾)ᵀ − Σ⁽ℓ⁾‖_F²`
//! and the generalized correlation
//! `ρ_ℓ = Tr(Cov[y⁽⁰⁾(y⁽⁰⁾)ᵀ, y⁽ℓ⁾(y⁽ℓ⁾)ᵀ]) / (σ₀ σ_ℓ)`. Given these and
//! per-level sampling costs, the first-order-minimal mean squared error is
//! attained at the coefficients `α*_ℓ = ρ_ℓ σ₀ / σ_ℓ` and the sample counts
//!
//! ```text
//! n*_ℓ ∝ √((ρ_ℓ² − ρ_{ℓ+1}²) / c_ℓ)   with   Σ n*_ℓ c_ℓ = B.
//! ```
//!
//! Moments can be estimated from a coupled pilot study or, for the Gaussian
//! noise-corruption model, evaluated in closed form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{CoupledSampleHierarchy, MeanMode};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Error)]
pub enum MomentsError {
    #[error("fewer than 2 paired events (got {0})")]
    TooFewPairedEvents(usize),
    #[error("generalized variance must be positive, got {sigma} at level {level}")]
    NonPositiveSigma { level: usize, sigma: f64 },
    #[error("generalized correlation must lie in [-1, 1], got {rho} at level {level}")]
    RhoOutOfRange { level: usize, rho: f64 },
    #[error("rho must have length L+2 with rho[0] = 1 and rho[L+1] = 0 (sigma has length {sigmas}, rho has length {rhos})")]
    BadRhoShape { sigmas: usize, rhos: usize },
    #[error("no levels provided")]
    NoLevels,
    #[error("noise covariance {index} has dimension {got}, expected {expected}")]
    GammaDimMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Error)]
pub enum AllocationError {
    #[error("generalized correlation rho1 = {0} is degenerate; |rho1| must be < 1")]
    DegenerateCorrelation(f64),
    #[error("pilot correlations are not monotone: rho{level}^2 < rho{next}^2 — re-sort levels by |rho| or merge them before planning")]
    NonMonotoneCorrelation { level: usize, next: usize },
    #[error("budget {budget} cannot afford one high-fidelity sample (cost {cost})")]
    BudgetTooSmall { budget: f64, cost: f64 },
    #[error("budget must be positive, got {0}")]
    NonPositiveBudget(f64),
    #[error("costs must be strictly positive, got {cost} at level {level}")]
    NonPositiveCost { level: usize, cost: f64 },
    #[error("expected {expected} per-level costs, got {got}")]
    CostCount { expected: usize, got: usize },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("expected {expected} sample counts, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("sample sizes must be positive")]
    NonPositiveSampleSize,
    #[error("sample sizes must be nondecreasing across levels")]
    DecreasingSampleSizes,
}

/// Generalized variances `σ_ℓ` and correlations `ρ_ℓ` for levels `0..=L`.
///
/// `rho` always has length `L + 2`, with `rho[0] = 1` and `rho[L+1] = 0`
/// pinned; the allocation formulas consume the differences
/// `ρ_ℓ² − ρ_{ℓ+1}²`. Whether `|ρ_1| ≥ … ≥ |ρ_L|` actually holds is
/// recorded, not enforced — pilot noise can violate it, and the planner
/// rejects such summaries with guidance instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawMomentSummary")]
pub struct MomentSummary {
    sigma: Vec<f64>,
    rho: Vec<f64>,
    monotone_fidelity: bool,
}

#[derive(Deserialize)]
struct RawMomentSummary {
    sigma: Vec<f64>,
    rho: Vec<f64>,
    #[serde(default)]
    #[allow(dead_code)]
    monotone_fidelity: Option<bool>,
}

impl TryFrom<RawMomentSummary> for MomentSummary {
    type Error = MomentsError;

    fn try_from(raw: RawMomentSummary) -> Result<Self, MomentsError> {
        if raw.sigma.is_empty() {
            return Err(MomentsError::NoLevels);
        }
        if raw.rho.len() != raw.sigma.len() + 1
            || raw.rho[0] != 1.0
            || *raw.rho.last().unwrap() != 0.0
        {
            return Err(MomentsError::BadRhoShape {
                sigmas: raw.sigma.len(),
                rhos: raw.rho.len(),
            });
        }
        let inner = raw.rho[1..raw.rho.len() - 1].to_vec();
        MomentSummary::new(raw.sigma, inner)
    }
}

impl MomentSummary {
    /// Builds a summary from per-level `σ_ℓ` (length `L+1`) and surrogate
    /// correlations `ρ_1..ρ_L` (length `L`); the endpoints of `rho` are
    /// pinned automatically.
    pub fn new(sigma: Vec<f64>, surrogate_rho: Vec<f64>) -> Result<Self, MomentsError> {
        if sigma.is_empty() {
            return Err(MomentsError::NoLevels);
        }
        if surrogate_rho.len() != sigma.len() - 1 {
            return Err(MomentsError::BadRhoShape {
                sigmas: sigma.len(),
                rhos: surrogate_rho.len() + 2,
            });
        }
        for (level, &s) in sigma.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(MomentsError::NonPositiveSigma { level, sigma: s });
            }
        }
        for (i, &r) in surrogate_rho.iter().enumerate() {
            if !(-1.0..=1.0).contains(&r) {
                return Err(MomentsError::RhoOutOfRange {
                    level: i + 1,
                    rho: r,
                });
            }
        }
        let monotone_fidelity = surrogate_rho
            .windows(2)
            .all(|w| w[0].abs() >= w[1].abs());
        let mut rho = Vec::with_capacity(sigma.len() + 1);
        rho.push(1.0);
        rho.extend_from_slice(&surrogate_rho);
        rho.push(0.0);
        Ok(Self {
            sigma,
            rho,
            monotone_fidelity,
        })
    }

    /// Number of surrogate levels `L`.
    pub fn num_surrogates(&self) -> usize {
        self.sigma.len() - 1
    }

    /// `σ_ℓ` for `ℓ = 0..=L`.
    pub fn sigma(&self, level: usize) -> f64 {
        self.sigma[level]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// `ρ_ℓ` for `ℓ = 0..=L+1` (with the pinned endpoints).
    pub fn rho(&self, level: usize) -> f64 {
        self.rho[level]
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rho
    }

    pub fn monotone_fidelity(&self) -> bool {
        self.monotone_fidelity
    }

    /// Restriction to a subset of levels (level 0 plus the listed surrogate
    /// levels, in order). Used when an allocation drops useless levels.
    fn restrict(&self, surrogate_levels: &[usize]) -> MomentSummary {
        let mut sigma = vec![self.sigma[0]];
        let mut rho = Vec::new();
        for &l in surrogate_levels {
            sigma.push(self.sigma[l]);
            rho.push(self.rho[l]);
        }
        MomentSummary::new(sigma, rho).expect("restriction of a valid summary")
    }
}

/// Per-level sampling costs `c_0 ≥ c_1 ≥ … ≥ c_L` in abstract units.
///
/// Strict positivity is enforced; a violation of the nonincreasing ordering
/// is recorded for the caller to warn about, not rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CostModel {
    costs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for CostModel {
    type Error = AllocationError;

    fn try_from(costs: Vec<f64>) -> Result<Self, AllocationError> {
        CostModel::new(costs)
    }
}

impl From<CostModel> for Vec<f64> {
    fn from(c: CostModel) -> Vec<f64> {
        c.costs
    }
}

impl CostModel {
    pub fn new(costs: Vec<f64>) -> Result<Self, AllocationError> {
        if costs.is_empty() {
            return Err(AllocationError::CostCount {
                expected: 1,
                got: 0,
            });
        }
        for (level, &c) in costs.iter().enumerate() {
            if !(c > 0.0) || !c.is_finite() {
                return Err(AllocationError::NonPositiveCost { level, cost: c });
            }
        }
        Ok(Self { costs })
    }

    pub fn num_levels(&self) -> usize {
        self.costs.len()
    }

    pub fn cost(&self, level: usize) -> f64 {
        self.costs[level]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// True when the expected ordering `c_0 ≥ c_1 ≥ …` is violated somewhere.
    pub fn ordering_violated(&self) -> bool {
        self.costs.windows(2).any(|w| w[1] > w[0])
    }

    /// Total cost `Σ n_ℓ c_ℓ` of a sample-count vector.
    pub fn total(&self, n: &[u64]) -> f64 {
        n.iter()
            .zip(&self.costs)
            .map(|(&n, &c)| n as f64 * c)
            .sum()
    }
}

/// How the unrounded optimal counts become integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Round down; guarantees `realized_cost <= budget`.
    Floor,
    /// Round up; may exceed the budget by up to one sample per level.
    Ceil,
    /// Round to nearest; no feasibility adjustment is applied.
    None,
}

/// An optimal sampling plan: control-variate weights, per-level counts, and
/// the cost/error bookkeeping that goes with them.
///
/// `n` may contain zeros for levels the allocation deems useless
/// (`ρ_ℓ² = ρ_{ℓ+1}²`); such levels are dropped from the estimator and their
/// `alphas` entry is irrelevant. `predicted_mse` is evaluated at the rounded,
/// repaired counts over the retained levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub alphas: Vec<f64>,
    pub n_real: Vec<f64>,
    pub n: Vec<u64>,
    pub realized_cost: f64,
    pub predicted_mse: f64,
}

impl AllocationPlan {
    /// Surrogate levels retained by the plan (1-based level indices).
    pub fn active_surrogates(&self) -> Vec<usize> {
        (1..self.n.len()).filter(|&l| self.n[l] > 0).collect()
    }

    /// Counts and weights restricted to the retained levels, in the shape
    /// the estimators expect.
    pub fn active_counts_and_weights(&self) -> (Vec<u64>, Vec<f64>) {
        let mut counts = vec![self.n[0]];
        let mut weights = Vec::new();
        for l in self.active_surrogates() {
            counts.push(self.n[l]);
            weights.push(self.alphas[l - 1]);
        }
        (counts, weights)
    }
}

/// Pilot estimation of the generalized moments from a coupled hierarchy.
///
/// Outer products are centered per level (`SampleMean`) or taken raw
/// (`KnownZero`); variances use all `n_ℓ` samples of the level and
/// correlations the first `min(n_0, n_ℓ)` paired events, both with `m − 1`
/// normalization. Estimated correlations are clamped to `[-1, 1]`.
pub fn estimate_moments(
    h: &CoupledSampleHierarchy,
    mode: MeanMode,
) -> Result<MomentSummary, MomentsError> {
    let d = h.dim();
    let num_levels = h.num_levels();
    // per-level centered samples and mean outer products
    let mut centered: Vec<nalgebra::DMatrix<f64>> = Vec::with_capacity(num_levels);
    let mut mean_outer: Vec<nalgebra::DMatrix<f64>> = Vec::with_capacity(num_levels);
    for l in 0..num_levels {
        let level = h.level(l);
        let n = level.ncols();
        if n < 2 {
            return Err(MomentsError::TooFewPairedEvents(n));
        }
        let mut z = level.clone();
        if mode == MeanMode::SampleMean {
            let mean = z.column_mean();
            for mut col in z.column_iter_mut() {
                col -= &mean;
            }
        }
        let p_bar = &z * z.transpose() / n as f64;
        centered.push(z);
        mean_outer.push(p_bar);
    }

    let mut sigma = Vec::with_capacity(num_levels);
    for l in 0..num_levels {
        let z = &centered[l];
        let n = z.ncols();
        // Σ_i ||z_i z_iᵀ − P̄||² = Σ_i (z_iᵀ z_i)² − n ||P̄||²
        let mut fourth = 0.0;
        for col in z.column_iter() {
            fourth += col.norm_squared().powi(2);
        }
        let var = (fourth - n as f64 * mean_outer[l].norm_squared()) / (n - 1) as f64;
        let s = var.max(0.0).sqrt();
        if !(s > 0.0) {
            return Err(MomentsError::NonPositiveSigma { level: l, sigma: s });
        }
        sigma.push(s);
    }

    let mut rho = Vec::with_capacity(num_levels - 1);
    let z0 = &centered[0];
    let m_pairs = z0.ncols();
    for l in 1..num_levels {
        let zl = &centered[l];
        let m = m_pairs.min(zl.ncols());
        if m < 2 {
            return Err(MomentsError::TooFewPairedEvents(m));
        }
        // Σ_{i<m} <z⁰_i(z⁰_i)ᵀ − P̄⁰, zˡ_i(zˡ_i)ᵀ − P̄ˡ>_F
        let mut cross = 0.0;
        for i in 0..m {
            let dot = z0.column(i).dot(&zl.column(i));
            cross += dot * dot;
            cross -= quad_form(&mean_outer[l], &z0.column(i));
            cross -= quad_form(&mean_outer[0], &zl.column(i));
        }
        cross += m as f64 * frob_inner(&mean_outer[0], &mean_outer[l]);
        let r = cross / (m - 1) as f64 / (sigma[0] * sigma[l]);
        rho.push(r.clamp(-1.0, 1.0));
        debug_assert_eq!(d, zl.nrows());
    }

    MomentSummary::new(sigma, rho)
}

fn quad_form(
    m: &nalgebra::DMatrix<f64>,
    v: &nalgebra::DVectorView<'_, f64>,
) -> f64 {
    (m * v).dot(v)
}

fn frob_inner(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Closed-form moments of the Gaussian noise-corruption hierarchy
/// `y⁽ℓ⁾ = y + ε⁽ℓ⁾` with `y ~ N(0, Σ)` and `ε⁽ℓ⁾ ~ N(0, Γ⁽ℓ⁾)` independent:
/// `σ_ℓ² = Tr((Σ+Γ⁽ℓ⁾)²) + Tr(Σ+Γ⁽ℓ⁾)²` and `ρ_ℓ = σ₀/σ_ℓ`.
pub fn closed_form_moments_gaussian(
    sigma: &SpdMatrix,
    gammas: &[crate::spd::SymmetricMatrix],
) -> Result<MomentSummary, MomentsError> {
    let d = sigma.dim();
    let gen_var = |m: &nalgebra::DMatrix<f64>| -> f64 {
        let tr = m.trace();
        (m * m).trace() + tr * tr
    };
    let s0 = gen_var(sigma.entries()).sqrt();
    let mut sig = vec![s0];
    let mut rho = Vec::with_capacity(gammas.len());
    for (index, g) in gammas.iter().enumerate() {
        if g.dim() != d {
            return Err(MomentsError::GammaDimMismatch {
                index,
                got: g.dim(),
                expected: d,
            });
        }
        let sl = gen_var(&(sigma.entries() + g.entries())).sqrt();
        sig.push(sl);
        rho.push(s0 / sl);
    }
    MomentSummary::new(sig, rho)
}

/// First-order optimal control-variate weights `α*_ℓ = ρ_ℓ σ₀ / σ_ℓ`.
pub fn optimal_coefficients(m: &MomentSummary) -> Vec<f64> {
    (1..=m.num_surrogates())
        .map(|l| m.rho(l) * m.sigma(0) / m.sigma(l))
        .collect()
}

/// First-order MSE of the multi-fidelity estimators at counts `n` and
/// weights `alphas`:
///
/// ```text
/// σ₀²/n₀ + Σ_ℓ (1/n_{ℓ−1} − 1/n_ℓ)(α_ℓ²σ_ℓ² − 2α_ℓρ_ℓσ_ℓσ₀)
/// ```
///
/// This is exact for the Euclidean estimator in the Euclidean metric
/// (known-zero means) and first-order for LEMF in the log-Euclidean metric.
pub fn predicted_mse(
    m: &MomentSummary,
    n: &[f64],
    alphas: &[f64],
) -> Result<f64, AllocationError> {
    let levels = m.num_surrogates() + 1;
    if n.len() != levels {
        return Err(AllocationError::SampleCount {
            expected: levels,
            got: n.len(),
        });
    }
    if alphas.len() != levels - 1 {
        return Err(AllocationError::CoefficientCount {
            expected: levels - 1,
            got: alphas.len(),
        });
    }
    if n.iter().any(|&x| !(x > 0.0)) {
        return Err(AllocationError::NonPositiveSampleSize);
    }
    if n.windows(2).any(|w| w[1] < w[0]) {
        return Err(AllocationError::DecreasingSampleSizes);
    }
    let mut mse = m.sigma(0).powi(2) / n[0];
    for l in 1..levels {
        let gap = 1.0 / n[l - 1] - 1.0 / n[l];
        let a = alphas[l - 1];
        mse += gap * (a * a * m.sigma(l).powi(2) - 2.0 * a * m.rho(l) * m.sigma(l) * m.sigma(0));
    }
    Ok(mse)
}

fn check_plan_inputs(m: &MomentSummary, c: &CostModel) -> Result<(), AllocationError> {
    let levels = m.num_surrogates() + 1;
    if c.num_levels() != levels {
        return Err(AllocationError::CostCount {
            expected: levels,
            got: c.num_levels(),
        });
    }
    if m.rho(1).abs() >= 1.0 && levels > 1 {
        return Err(AllocationError::DegenerateCorrelation(m.rho(1)));
    }
    for l in 0..levels {
        let gap = m.rho(l).powi(2) - m.rho(l + 1).powi(2);
        if gap < 0.0 {
            return Err(AllocationError::NonMonotoneCorrelation {
                level: l,
                next: l + 1,
            });
        }
    }
    Ok(())
}

/// Unrounded first-order optimal counts for budget `budget`.
fn unrounded_allocation(
    m: &MomentSummary,
    c: &CostModel,
    budget: f64,
) -> Result<Vec<f64>, AllocationError> {
    check_plan_inputs(m, c)?;
    if !(budget > 0.0) {
        return Err(AllocationError::NonPositiveBudget(budget));
    }
    let levels = m.num_surrogates() + 1;
    let c0 = c.cost(0);
    let one_minus = 1.0 - m.rho(1).powi(2);
    let weight = |l: usize| -> f64 {
        let gap = (m.rho(l).powi(2) - m.rho(l + 1).powi(2)).max(0.0);
        (c0 * gap / (c.cost(l) * one_minus)).sqrt()
    };
    let denom: f64 = (0..levels).map(|l| c.cost(l) * weight(l)).sum();
    Ok((0..levels).map(|l| budget * weight(l) / denom).collect())
}

/// First-order optimal sample allocation under a budget.
///
/// Levels whose unrounded count rounds to zero are dropped (recorded as
/// `n = 0`). After rounding, counts are repaired to stay nondecreasing
/// across retained levels, and in `Floor` mode the largest count is
/// decremented until the plan fits the budget.
pub fn optimal_allocation(
    m: &MomentSummary,
    c: &CostModel,
    budget: f64,
    rounding: Rounding,
) -> Result<AllocationPlan, AllocationError> {
    let n_real = unrounded_allocation(m, c, budget)?;
    let mut n: Vec<u64> = n_real
        .iter()
        .map(|&x| match rounding {
            Rounding::Floor => x.floor() as u64,
            Rounding::Ceil => x.ceil() as u64,
            Rounding::None => x.round() as u64,
        })
        .collect();
    if n[0] == 0 {
        return Err(AllocationError::BudgetTooSmall {
            budget,
            cost: c.cost(0),
        });
    }
    // repair monotonicity across retained levels
    let mut prev = n[0];
    for l in 1..n.len() {
        if n[l] == 0 {
            continue;
        }
        if n[l] < prev {
            n[l] = prev;
        }
        prev = n[l];
    }
    if rounding == Rounding::Floor {
        // the repair can push the cost back over budget; shave the largest
        // count until feasible
        while c.total(&n) > budget {
            let (lmax, _) = n
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1))
                .expect("nonempty");
            if n[lmax] <= 1 {
                return Err(AllocationError::BudgetTooSmall {
                    budget,
                    cost: c.cost(0),
                });
            }
            n[lmax] -= 1;
        }
        if n[0] == 0 {
            return Err(AllocationError::BudgetTooSmall {
                budget,
                cost: c.cost(0),
            });
        }
    }
    let alphas = optimal_coefficients(m);
    // predicted MSE over the retained levels only
    let active: Vec<usize> = (1..n.len()).filter(|&l| n[l] > 0).collect();
    let restricted = m.restrict(&active);
    let mut n_active = vec![n[0] as f64];
    let mut a_active = Vec::new();
    for &l in &active {
        n_active.push(n[l] as f64);
        a_active.push(alphas[l - 1]);
    }
    let predicted = predicted_mse(&restricted, &n_active, &a_active)?;
    Ok(AllocationPlan {
        alphas,
        realized_cost: c.total(&n),
        n,
        n_real,
        predicted_mse: predicted,
    })
}

/// First-order term of the MSE at the optimal allocation:
/// `(σ₀²/B)(Σ_ℓ √(c_ℓ(ρ_ℓ² − ρ_{ℓ+1}²)))²`.
pub fn first_order_optimal_mse(
    m: &MomentSummary,
    c: &CostModel,
    budget: f64,
) -> Result<f64, AllocationError> {
    check_plan_inputs(m, c)?;
    if !(budget > 0.0) {
        return Err(AllocationError::NonPositiveBudget(budget));
    }
    let sum: f64 = (0..=m.num_surrogates())
        .map(|l| {
            let gap = (m.rho(l).powi(2) - m.rho(l + 1).powi(2)).max(0.0);
            (c.cost(l) * gap).sqrt()
        })
        .sum();
    Ok(m.sigma(0).powi(2) / budget * sum * sum)
}

/// Whether the multi-fidelity estimator beats the cost-equivalent
/// single-fidelity one, and the left-hand side of the criterion
/// `Σ_ℓ √((c_ℓ/c₀)(ρ_ℓ² − ρ_{ℓ+1}²)) < 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenefitCondition {
    pub holds: bool,
    pub lhs: f64,
}

pub fn benefit_condition(
    m: &MomentSummary,
    c: &CostModel,
) -> Result<BenefitCondition, AllocationError> {
    check_plan_inputs(m, c)?;
    let c0 = c.cost(0);
    let lhs: f64 = (0..=m.num_surrogates())
        .map(|l| {
            let gap = (m.rho(l).powi(2) - m.rho(l + 1).powi(2)).max(0.0);
            (c.cost(l) / c0 * gap).sqrt()
        })
        .sum();
    Ok(BenefitCondition {
        holds: lhs < 1.0,
        lhs,
    })
}

/// Budget ratio at equal first-order MSE against the single-fidelity
/// estimator: `1 / lhs²` of the benefit condition.
pub fn predicted_speedup(m: &MomentSummary, c: &CostModel) -> Result<f64, AllocationError> {
    let b = benefit_condition(m, c)?;
    Ok(1.0 / (b.lhs * b.lhs))
}
