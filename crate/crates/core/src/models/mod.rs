//! Coupled multi-fidelity data sources.
//!
//! A model exposes `L + 1` fidelity levels of one underlying random
//! experiment: a single draw of the model's randomness (an *event*)
//! deterministically yields the outputs of every level, which is what
//! correlates the levels. Sampling a hierarchy evaluates each level only for
//! the events its budget covers — expensive levels see only the first `n_ℓ`
//! events.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::estimators::{CoupledSampleHierarchy, EstimatorError, MeanMode};
use crate::moments::CostModel;
use crate::parallel::run_chunked;
use crate::rng::event_rng;
use crate::spd::{SpdMatrix, SymmetricMatrix};

mod gaussian;
mod heat;
pub mod presets;

pub use gaussian::{GaussianNoiseHierarchy, TwoClassGaussian};
pub use heat::{solve_heat_fd, HeatConduction1D};

/// Events per work unit when sampling in parallel. Fixed so that the
/// assembly (and hence every floating-point result) is schedule-independent.
const EVENT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("level {level} is out of range for a model with {levels} levels")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("sample counts must be nondecreasing across levels, got {0:?}")]
    NonNestedCounts(Vec<u64>),
    #[error("expected {expected} per-level sample counts, got {got}")]
    CountLength { expected: usize, got: usize },
    #[error("at least one sample is required")]
    NoSamples,
    #[error("grid must have at least {min} interior points, got {got}")]
    GridTooCoarse { min: usize, got: usize },
    #[error("grid sizes must be strictly decreasing across levels, got {0:?}")]
    NonDecreasingGrids(Vec<usize>),
    #[error("finite-difference system is singular at row {row}")]
    SingularSystem { row: usize },
    #[error("covariance is not positive semidefinite: {0}")]
    BadCovariance(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// A hierarchy of coupled data sources of differing cost and fidelity.
///
/// `draw_event` realizes the underlying randomness; `evaluate` maps a
/// realized event through one fidelity level. Both are deterministic given
/// the stream state, so a hierarchy is reproducible bit-for-bit from its
/// seed.
pub trait CoupledModel: Sync {
    type Event: Send + Sync;

    /// Output dimension `d` shared by all levels.
    fn output_dim(&self) -> usize;

    /// Number of levels including the high-fidelity one (`L + 1`).
    fn num_levels(&self) -> usize;

    fn costs(&self) -> &CostModel;

    /// The level-0 covariance when the model knows it in closed form.
    fn true_covariance(&self) -> Option<SpdMatrix> {
        None
    }

    fn draw_event(&self, rng: &mut ChaCha12Rng) -> Self::Event;

    fn evaluate(&self, event: &Self::Event, level: usize) -> Result<DVector<f64>, ModelError>;
}

/// Restriction of a model to a subset of its levels (used when an allocation
/// drops useless levels). Level indices are increasing and must include 0.
pub struct LevelSubset<'a, M: CoupledModel> {
    model: &'a M,
    levels: Vec<usize>,
    costs: CostModel,
}

impl<'a, M: CoupledModel> LevelSubset<'a, M> {
    pub fn new(model: &'a M, levels: Vec<usize>) -> Result<Self, ModelError> {
        assert!(!levels.is_empty() && levels[0] == 0, "level 0 is mandatory");
        for &l in &levels {
            if l >= model.num_levels() {
                return Err(ModelError::LevelOutOfRange {
                    level: l,
                    levels: model.num_levels(),
                });
            }
        }
        let costs = CostModel::new(levels.iter().map(|&l| model.costs().cost(l)).collect())
            .expect("positive costs stay positive");
        Ok(Self {
            model,
            levels,
            costs,
        })
    }
}

impl<M: CoupledModel> CoupledModel for LevelSubset<'_, M> {
    type Event = M::Event;

    fn output_dim(&self) -> usize {
        self.model.output_dim()
    }

    fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn costs(&self) -> &CostModel {
        &self.costs
    }

    fn true_covariance(&self) -> Option<SpdMatrix> {
        self.model.true_covariance()
    }

    fn draw_event(&self, rng: &mut ChaCha12Rng) -> Self::Event {
        self.model.draw_event(rng)
    }

    fn evaluate(&self, event: &Self::Event, level: usize) -> Result<DVector<f64>, ModelError> {
        self.model.evaluate(event, self.levels[level])
    }
}

/// Merges two chunk results, keeping the first error.
fn merge_chunks<T>(
    a: Result<Vec<T>, ModelError>,
    b: Result<Vec<T>, ModelError>,
) -> Result<Vec<T>, ModelError> {
    let mut a = a?;
    a.extend(b?);
    Ok(a)
}

/// Draws a coupled hierarchy with `n[ℓ]` samples at level `ℓ`.
///
/// Events `ω_1..ω_{n_L}` are drawn once from per-event substreams of `seed`;
/// level `ℓ` is evaluated only for the first `n_ℓ` of them. Returns the
/// hierarchy together with its sampling cost `Σ n_ℓ c_ℓ`.
pub fn sample_hierarchy<M: CoupledModel>(
    model: &M,
    n: &[u64],
    seed: u64,
) -> Result<(CoupledSampleHierarchy, f64), ModelError> {
    let levels = model.num_levels();
    if n.len() != levels {
        return Err(ModelError::CountLength {
            expected: levels,
            got: n.len(),
        });
    }
    if n.windows(2).any(|w| w[1] < w[0]) {
        return Err(ModelError::NonNestedCounts(n.to_vec()));
    }
    if n[0] == 0 {
        return Err(ModelError::NoSamples);
    }
    let d = model.output_dim();
    let n_max = *n.last().unwrap() as usize;

    // per-chunk evaluation: (chunk start, per-level column blocks)
    let work = |range: std::ops::Range<usize>| -> Result<Vec<(usize, Vec<Vec<f64>>)>, ModelError> {
        let start = range.start;
        let mut blocks: Vec<Vec<f64>> = (0..levels).map(|_| Vec::new()).collect();
        for i in range {
            let mut rng = event_rng(seed, i as u64);
            let event = model.draw_event(&mut rng);
            for (l, block) in blocks.iter_mut().enumerate() {
                if (i as u64) < n[l] {
                    let y = model.evaluate(&event, l)?;
                    debug_assert_eq!(y.len(), d);
                    block.extend_from_slice(y.as_slice());
                }
            }
        }
        Ok(vec![(start, blocks)])
    };
    let collected = run_chunked(n_max, EVENT_CHUNK, work, merge_chunks).expect("n_max > 0")?;

    let mut matrices: Vec<DMatrix<f64>> = n
        .iter()
        .map(|&count| DMatrix::zeros(d, count as usize))
        .collect();
    for (start, blocks) in collected {
        for (l, block) in blocks.into_iter().enumerate() {
            for (j, col) in block.chunks_exact(d).enumerate() {
                for (i, &v) in col.iter().enumerate() {
                    matrices[l][(i, start + j)] = v;
                }
            }
        }
    }
    let hierarchy = CoupledSampleHierarchy::new(matrices)?;
    let cost = model.costs().total(n);
    Ok((hierarchy, cost))
}

/// Pilot hierarchy: the same number of events at every level.
pub fn pilot_hierarchy<M: CoupledModel>(
    model: &M,
    pilot_size: u64,
    seed: u64,
) -> Result<(CoupledSampleHierarchy, f64), ModelError> {
    let n = vec![pilot_size; model.num_levels()];
    sample_hierarchy(model, &n, seed)
}

/// Streaming sample covariance of a single level over `n` events, without
/// materializing the samples. Shares the event streams of
/// [`sample_hierarchy`], so the first `min(n, n_ℓ)` events coincide with a
/// hierarchy drawn from the same seed.
pub fn single_level_covariance<M: CoupledModel>(
    model: &M,
    level: usize,
    n: u64,
    seed: u64,
    mode: MeanMode,
) -> Result<(SymmetricMatrix, f64), ModelError> {
    if level >= model.num_levels() {
        return Err(ModelError::LevelOutOfRange {
            level,
            levels: model.num_levels(),
        });
    }
    if n == 0 {
        return Err(ModelError::NoSamples);
    }
    if mode == MeanMode::SampleMean && n < 2 {
        return Err(ModelError::Estimator(EstimatorError::TooFewSamples(
            n as usize,
        )));
    }
    let d = model.output_dim();
    let work = |range: std::ops::Range<usize>| -> Result<Vec<(DMatrix<f64>, DVector<f64>)>, ModelError> {
        let mut outer = DMatrix::zeros(d, d);
        let mut sum = DVector::zeros(d);
        for i in range {
            let mut rng = event_rng(seed, i as u64);
            let event = model.draw_event(&mut rng);
            let y = model.evaluate(&event, level)?;
            outer.ger(1.0, &y, &y, 1.0);
            sum += &y;
        }
        Ok(vec![(outer, sum)])
    };
    let parts = run_chunked(n as usize, EVENT_CHUNK, work, merge_chunks).expect("n > 0")?;
    let mut outer = DMatrix::zeros(d, d);
    let mut sum = DVector::zeros(d);
    for (o, s) in parts {
        outer += o;
        sum += s;
    }
    let nf = n as f64;
    let cov = match mode {
        MeanMode::KnownZero => outer / nf,
        MeanMode::SampleMean => {
            let mean = &sum / nf;
            (outer - nf * &mean * mean.transpose()) / (nf - 1.0)
        }
    };
    let cost = n as f64 * model.costs().cost(level);
    Ok((SymmetricMatrix::new(cov).expect("square"), cost))
}
