//! Gaussian noise-corruption hierarchy: surrogate levels are the
//! high-fidelity draw plus independent Gaussian noise,
//! `y⁽ℓ⁾(ω) = y(ω) + ε⁽ℓ⁾(ω)` with `ε⁽ℓ⁾ ~ N(0, Γ⁽ℓ⁾)`.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CoupledModel, ModelError};
use crate::moments::{closed_form_moments_gaussian, CostModel, MomentSummary, MomentsError};
use crate::spd::{sym_eig, SpdMatrix, SymmetricMatrix};

/// Square-root factor of a positive semidefinite matrix via its spectrum.
/// Eigenvalues within round-off of zero are clamped to zero, so exactly-zero
/// noise covariances are legal (levels then coincide).
fn psd_factor(m: &SymmetricMatrix) -> Result<DMatrix<f64>, ModelError> {
    let eig = sym_eig(m).map_err(|e| ModelError::BadCovariance(e.to_string()))?;
    let tol = 1e-12 * eig.largest().abs().max(1.0);
    let mut vals = Vec::with_capacity(eig.dim());
    for &l in &eig.eigenvalues {
        if l < -tol {
            return Err(ModelError::BadCovariance(format!(
                "eigenvalue {l:.6e} is negative"
            )));
        }
        vals.push(l.max(0.0).sqrt());
    }
    let lam = DVector::from_vec(vals);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&lam))
}

/// The noise-corruption hierarchy with optional nonzero mean.
#[derive(Debug, Clone)]
pub struct GaussianNoiseHierarchy {
    mean: DVector<f64>,
    sigma: SpdMatrix,
    gammas: Vec<SymmetricMatrix>,
    sigma_factor: DMatrix<f64>,
    noise_factors: Vec<DMatrix<f64>>,
    costs: CostModel,
}

impl GaussianNoiseHierarchy {
    /// Zero-mean hierarchy with `L = gammas.len()` surrogate levels.
    pub fn new(
        sigma: SpdMatrix,
        gammas: Vec<SymmetricMatrix>,
        costs: CostModel,
    ) -> Result<Self, ModelError> {
        let d = sigma.dim();
        Self::with_mean(DVector::zeros(d), sigma, gammas, costs)
    }

    pub fn with_mean(
        mean: DVector<f64>,
        sigma: SpdMatrix,
        gammas: Vec<SymmetricMatrix>,
        costs: CostModel,
    ) -> Result<Self, ModelError> {
        let d = sigma.dim();
        if mean.len() != d {
            return Err(ModelError::DimensionMismatch {
                left: mean.len(),
                right: d,
            });
        }
        if costs.num_levels() != gammas.len() + 1 {
            return Err(ModelError::CountLength {
                expected: gammas.len() + 1,
                got: costs.num_levels(),
            });
        }
        for g in &gammas {
            if g.dim() != d {
                return Err(ModelError::DimensionMismatch {
                    left: g.dim(),
                    right: d,
                });
            }
        }
        let sigma_factor = psd_factor(sigma.as_symmetric())?;
        let noise_factors = gammas
            .iter()
            .map(psd_factor)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            mean,
            sigma,
            gammas,
            sigma_factor,
            noise_factors,
            costs,
        })
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn gammas(&self) -> &[SymmetricMatrix] {
        &self.gammas
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Covariance of level `ℓ`: `Σ + Γ⁽ℓ⁾` (with `Γ⁽⁰⁾ = 0`).
    pub fn level_covariance(&self, level: usize) -> Result<SymmetricMatrix, ModelError> {
        if level >= self.num_levels() {
            return Err(ModelError::LevelOutOfRange {
                level,
                levels: self.num_levels(),
            });
        }
        if level == 0 {
            Ok(self.sigma.as_symmetric().clone())
        } else {
            self.sigma
                .as_symmetric()
                .axpy(1.0, &self.gammas[level - 1])
                .map_err(|e| ModelError::BadCovariance(e.to_string()))
        }
    }

    /// Exact generalized moments of the hierarchy.
    pub fn closed_form_moments(&self) -> Result<MomentSummary, MomentsError> {
        closed_form_moments_gaussian(&self.sigma, &self.gammas)
    }

    fn standard_normal(&self, rng: &mut ChaCha12Rng) -> DVector<f64> {
        DVector::from_fn(self.sigma.dim(), |_, _| StandardNormal.sample(rng))
    }
}

impl CoupledModel for GaussianNoiseHierarchy {
    /// All level outputs of one event, evaluated eagerly (they are cheap).
    type Event = Vec<DVector<f64>>;

    fn output_dim(&self) -> usize {
        self.sigma.dim()
    }

    fn num_levels(&self) -> usize {
        self.noise_factors.len() + 1
    }

    fn costs(&self) -> &CostModel {
        &self.costs
    }

    fn true_covariance(&self) -> Option<SpdMatrix> {
        Some(self.sigma.clone())
    }

    fn draw_event(&self, rng: &mut ChaCha12Rng) -> Self::Event {
        // draw order fixed: base sample first, then one noise per level
        let y = &self.mean + &self.sigma_factor * self.standard_normal(rng);
        let mut outputs = Vec::with_capacity(self.num_levels());
        outputs.push(y.clone());
        for factor in &self.noise_factors {
            outputs.push(&y + factor * self.standard_normal(rng));
        }
        outputs
    }

    fn evaluate(&self, event: &Self::Event, level: usize) -> Result<DVector<f64>, ModelError> {
        event
            .get(level)
            .cloned()
            .ok_or(ModelError::LevelOutOfRange {
                level,
                levels: self.num_levels(),
            })
    }
}

/// Two labeled Gaussian noise-corruption hierarchies sharing a noise
/// structure; the downstream metric-learning task estimates one covariance
/// per class.
#[derive(Debug, Clone)]
pub struct TwoClassGaussian {
    class0: GaussianNoiseHierarchy,
    class1: GaussianNoiseHierarchy,
}

impl TwoClassGaussian {
    pub fn new(
        class0: GaussianNoiseHierarchy,
        class1: GaussianNoiseHierarchy,
    ) -> Result<Self, ModelError> {
        if class0.output_dim() != class1.output_dim() {
            return Err(ModelError::DimensionMismatch {
                left: class0.output_dim(),
                right: class1.output_dim(),
            });
        }
        if class0.num_levels() != class1.num_levels() {
            return Err(ModelError::CountLength {
                expected: class0.num_levels(),
                got: class1.num_levels(),
            });
        }
        Ok(Self { class0, class1 })
    }

    pub fn class(&self, i: usize) -> &GaussianNoiseHierarchy {
        match i {
            0 => &self.class0,
            1 => &self.class1,
            _ => panic!("class index must be 0 or 1"),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.class0.output_dim()
    }

    /// Difference of the class-conditional means, `E[y|0] − E[y|1]`.
    pub fn mean_gap(&self) -> DVector<f64> {
        self.class0.mean() - self.class1.mean()
    }

    /// High-fidelity draws from the label-balanced mixture, one per-point
    /// stream each (deterministic in `seed`, order-insensitive).
    pub fn sample_mixture_level0(&self, count: u64, seed: u64) -> Vec<DVector<f64>> {
        use rand::Rng;
        (0..count)
            .map(|j| {
                let mut rng = crate::rng::event_rng(seed, j);
                let class = if rng.random::<bool>() {
                    &self.class1
                } else {
                    &self.class0
                };
                let event = class.draw_event(&mut rng);
                event[0].clone()
            })
            .collect()
    }
}
