//! One-dimensional steady-state heat conduction at multiple grid
//! resolutions.
//!
//! The boundary-value problem on `(0, 1)` is
//!
//! ```text
//! −(exp(κ(x; θ)) u′(x))′ = 1,   u(0) = 0,  u(1) = 1,
//! ```
//!
//! with log-conductivity `κ(x; θ) = Σ_{k=1}^4 θ_k sin(2πkx)` and
//! `θ ~ N(0, I₄)`. Each fidelity level discretizes with a conservative
//! second-order finite-difference scheme on `m_ℓ` interior points (flux
//! coefficients at cell midpoints) and observes the temperature at the ten
//! interior locations `x_i = i/11`, interpolating linearly between the
//! bracketing nodes when a location is off-grid. Sampling cost is identified
//! with the grid size.

use nalgebra::DVector;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CoupledModel, ModelError};
use crate::moments::CostModel;

/// Number of conductivity modes (`θ ∈ ℝ⁴`).
pub const THETA_DIM: usize = 4;

/// Number of observation points (`x_i = i/11`, `i = 1..=10`).
pub const OBS_DIM: usize = 10;

/// Smallest supported grid.
pub const MIN_GRID: usize = 16;

thread_local! {
    /// Reusable solver workspace; the solve is called millions of times from
    /// the trial loops and per-call allocation would dominate it.
    static SCRATCH: std::cell::RefCell<Scratch> = std::cell::RefCell::new(Scratch::default());
}

#[derive(Default)]
struct Scratch {
    flux: Vec<f64>,
    upper: Vec<f64>,
    sol: Vec<f64>,
}

/// Solves the conservative FD system for one conductivity draw and returns
/// the ten observations. `m` is the number of interior grid points.
pub fn solve_heat_fd(theta: &[f64; THETA_DIM], m: usize) -> Result<DVector<f64>, ModelError> {
    if m < MIN_GRID {
        return Err(ModelError::GridTooCoarse { min: MIN_GRID, got: m });
    }
    let h = 1.0 / (m + 1) as f64;
    SCRATCH.with(|cell| {
        let scratch = &mut *cell.borrow_mut();
        scratch.flux.clear();
        scratch.flux.extend((0..=m).map(|i| {
            let x = (i as f64 + 0.5) * h;
            let mut kappa = 0.0;
            for (k, &t) in theta.iter().enumerate() {
                kappa += t * (2.0 * std::f64::consts::PI * (k + 1) as f64 * x).sin();
            }
            kappa.exp()
        }));
        solve_with_flux(scratch, m, h)
    })
}

/// Tridiagonal solve of `−(a u′)′ = 1`, `u(0) = 0`, `u(1) = 1`, with the
/// flux coefficients `a_{i+1/2}` already in `scratch.flux`. The `1/h²`
/// scaling of the system cancels between both sides and is folded into the
/// right-hand side instead.
fn solve_with_flux(scratch: &mut Scratch, m: usize, h: f64) -> Result<DVector<f64>, ModelError> {
    let h2 = h * h;
    let flux = &scratch.flux;
    let upper = &mut scratch.upper;
    let sol = &mut scratch.sol;
    upper.clear();
    upper.resize(m, 0.0);
    sol.clear();
    sol.resize(m, 0.0);

    // forward sweep of the Thomas algorithm; the system is SPD tridiagonal
    // with diag_i = a_{i-1/2} + a_{i+1/2} and off_i = -a_{i+1/2}
    let mut prev_cp = 0.0;
    let mut prev_dp = 0.0;
    for i in 0..m {
        let off_prev = -flux[i];
        let diag = flux[i] + flux[i + 1];
        let mut rhs = h2;
        if i == m - 1 {
            rhs += flux[m]; // u(1) = 1 boundary term
        }
        let denom = if i == 0 {
            diag
        } else {
            diag - off_prev * prev_cp
        };
        if denom <= 0.0 {
            return Err(ModelError::SingularSystem { row: i });
        }
        let inv = 1.0 / denom;
        prev_cp = -flux[i + 1] * inv;
        prev_dp = if i == 0 {
            rhs * inv
        } else {
            (rhs - off_prev * prev_dp) * inv
        };
        upper[i] = prev_cp;
        sol[i] = prev_dp;
    }
    // back substitution in place
    for i in (0..m - 1).rev() {
        sol[i] -= upper[i] * sol[i + 1];
    }

    // observations at x = i/11, linear interpolation off-grid; the solution
    // array is conceptually [u(0)=0, u_1..u_m, u(1)=1]
    let node = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else if j == m + 1 {
            1.0
        } else {
            sol[j - 1]
        }
    };
    let mut obs = DVector::zeros(OBS_DIM);
    for i in 1..=OBS_DIM {
        let pos = i as f64 / 11.0 * (m + 1) as f64;
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        obs[i - 1] = if frac == 0.0 {
            node(j)
        } else {
            node(j) * (1.0 - frac) + node(j + 1) * frac
        };
    }
    Ok(obs)
}

/// The heat-conduction model at a descending ladder of grid resolutions.
#[derive(Debug, Clone)]
pub struct HeatConduction1D {
    grid_sizes: Vec<usize>,
    costs: CostModel,
    /// per level: sin(2πk x) tables at the m+1 midpoints, one row per mode
    sin_tables: Vec<Vec<[f64; THETA_DIM]>>,
}

impl HeatConduction1D {
    /// `grid_sizes[ℓ]` is the interior point count of level `ℓ`; fidelity
    /// (and cost) decreases with the level, so sizes must be strictly
    /// decreasing.
    pub fn new(grid_sizes: Vec<usize>) -> Result<Self, ModelError> {
        if grid_sizes.is_empty() {
            return Err(ModelError::CountLength {
                expected: 1,
                got: 0,
            });
        }
        for &m in &grid_sizes {
            if m < MIN_GRID {
                return Err(ModelError::GridTooCoarse { min: MIN_GRID, got: m });
            }
        }
        if grid_sizes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ModelError::NonDecreasingGrids(grid_sizes));
        }
        let costs = CostModel::new(grid_sizes.iter().map(|&m| m as f64).collect())
            .expect("grid sizes are positive");
        let sin_tables = grid_sizes
            .iter()
            .map(|&m| {
                let h = 1.0 / (m + 1) as f64;
                (0..=m)
                    .map(|i| {
                        let x = (i as f64 + 0.5) * h;
                        std::array::from_fn(|k| {
                            (2.0 * std::f64::consts::PI * (k + 1) as f64 * x).sin()
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            grid_sizes,
            costs,
            sin_tables,
        })
    }

    pub fn grid_sizes(&self) -> &[usize] {
        &self.grid_sizes
    }
}

impl CoupledModel for HeatConduction1D {
    /// One draw of the conductivity coefficients.
    type Event = [f64; THETA_DIM];

    fn output_dim(&self) -> usize {
        OBS_DIM
    }

    fn num_levels(&self) -> usize {
        self.grid_sizes.len()
    }

    fn costs(&self) -> &CostModel {
        &self.costs
    }

    fn draw_event(&self, rng: &mut ChaCha12Rng) -> Self::Event {
        std::array::from_fn(|_| StandardNormal.sample(rng))
    }

    fn evaluate(&self, theta: &Self::Event, level: usize) -> Result<DVector<f64>, ModelError> {
        let m = *self
            .grid_sizes
            .get(level)
            .ok_or(ModelError::LevelOutOfRange {
                level,
                levels: self.grid_sizes.len(),
            })?;
        let table = &self.sin_tables[level];
        SCRATCH.with(|cell| {
            let scratch = &mut *cell.borrow_mut();
            scratch.flux.clear();
            scratch.flux.extend(table.iter().map(|sines| {
                let mut kappa = 0.0;
                for k in 0..THETA_DIM {
                    kappa += theta[k] * sines[k];
                }
                kappa.exp()
            }));
            solve_with_flux(scratch, m, 1.0 / (m + 1) as f64)
        })
    }
}
