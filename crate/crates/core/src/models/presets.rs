//! Bundled model configurations used by the benchmarks and tests.

use nalgebra::DVector;

use super::{GaussianNoiseHierarchy, HeatConduction1D, TwoClassGaussian};
use crate::moments::CostModel;
use crate::spd::{SpdMatrix, SymmetricMatrix};

/// Four-dimensional Gaussian benchmark: a fixed Wishart-style covariance
/// with three noise-corrupted surrogate levels at costs (1, 1e-2, 1e-3,
/// 1e-4). Generalized correlations come out near (0.94, 0.74, 0.59).
pub fn gaussian_4d() -> GaussianNoiseHierarchy {
    let sigma = SpdMatrix::from_row_slice(
        4,
        &[
            2.52, -0.17, 0.67, -0.98, //
            -0.17, 0.64, -0.29, 0.35, //
            0.67, -0.29, 0.49, -0.52, //
            -0.98, 0.35, -0.52, 1.31,
        ],
    )
    .expect("preset covariance is SPD");
    let gammas = vec![
        SymmetricMatrix::from_diagonal(&[0.1; 4]),
        SymmetricMatrix::from_diagonal(&[0.5; 4]),
        SymmetricMatrix::from_diagonal(&[1.0; 4]),
    ];
    let costs = CostModel::new(vec![1.0, 1e-2, 1e-3, 1e-4]).expect("positive costs");
    GaussianNoiseHierarchy::new(sigma, gammas, costs).expect("valid preset")
}

/// Heat-conduction ladder at desk scale: 4096 and 256 interior points.
/// Small enough for CI, with surrogate correlation still above 0.99.
pub fn heat_desk() -> HeatConduction1D {
    HeatConduction1D::new(vec![4096, 256]).expect("valid preset")
}

/// Heat-conduction ladder at full scale: 65536 and 1024 interior points.
pub fn heat_full() -> HeatConduction1D {
    HeatConduction1D::new(vec![65_536, 1_024]).expect("valid preset")
}

/// Two-class Gaussian source for the metric-learning pipeline: class means
/// differ in the first coordinate only, classes have distinct SPD
/// covariances, and one noisy surrogate level is available at 1% of the
/// high-fidelity cost.
pub fn two_class_gaussian() -> TwoClassGaussian {
    let d = 4;
    let sigma0 = SpdMatrix::from_row_slice(
        d,
        &[
            1.00, 0.30, -0.20, 0.10, //
            0.30, 0.80, 0.10, -0.10, //
            -0.20, 0.10, 1.20, 0.20, //
            0.10, -0.10, 0.20, 0.60,
        ],
    )
    .expect("SPD");
    let sigma1 = SpdMatrix::from_row_slice(
        d,
        &[
            0.70, -0.10, 0.10, 0.00, //
            -0.10, 1.10, 0.20, 0.10, //
            0.10, 0.20, 0.90, -0.30, //
            0.00, 0.10, -0.30, 1.00,
        ],
    )
    .expect("SPD");
    let gamma = SymmetricMatrix::from_diagonal(&[0.25; 4]);
    let costs = CostModel::new(vec![1.0, 1e-2]).expect("positive costs");
    let mu0 = DVector::from_row_slice(&[0.75, 0.0, 0.0, 0.0]);
    let mu1 = DVector::from_row_slice(&[-0.75, 0.0, 0.0, 0.0]);
    let class0 = GaussianNoiseHierarchy::with_mean(mu0, sigma0, vec![gamma.clone()], costs.clone())
        .expect("valid class 0");
    let class1 = GaussianNoiseHierarchy::with_mean(mu1, sigma1, vec![gamma], costs)
        .expect("valid class 1");
    TwoClassGaussian::new(class0, class1).expect("matching classes")
}
