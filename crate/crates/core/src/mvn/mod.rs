//! Probabilities that a (possibly degenerate) multivariate normal vector falls
//! in an axis-aligned box.
//!
//! Every sign-recovery probability reduces to one of these integrals. Two
//! estimators are provided:
//!
//! * [`Method::Conditioning`] (default): a rank-revealing, reordered Cholesky
//!   factor turns the box into a sequence of one-dimensional truncations
//!   (Genz's transform). Rows that are linear combinations of earlier pivots
//!   (rank-deficient covariances) become extra bounds on the pivot where their
//!   last nonzero loading sits, so singular covariances stay on the same
//!   smooth integrand.
//! * [`Method::Indicator`]: the eigen factor of [`factorize_psd`] maps a
//!   standard normal of dimension `rank` into the box and averages the
//!   indicator of all `2d` half-space constraints.
//!
//! Both average over a randomly shifted lattice, repeated `randomizations`
//! times; the standard error is the spread of those replicate means.
//! Nonnegatively equicorrelated boxes also have an exact one-dimensional
//! quadrature, [`equicorrelated_box`].

mod equicorrelated;
mod genz;
mod indicator;
pub(crate) mod lattice;
pub mod normal;

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use equicorrelated::{equicorrelated_box, BoxGroup};
pub use genz::Prepared;

/// Mean, covariance and box bounds of one integration problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRegion {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GaussianRegion {
    /// Builds a region after checking dimensions, symmetry and bound order.
    /// Positive semidefiniteness is checked when the region is factorized.
    pub fn new(
        mean: Vec<f64>,
        covariance: DMatrix<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let region = Self {
            mean,
            covariance,
            lower,
            upper,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        for found in [
            self.covariance.nrows(),
            self.covariance.ncols(),
            self.lower.len(),
            self.upper.len(),
        ] {
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        if self.mean.iter().any(|m| !m.is_finite())
            || self.covariance.iter().any(|c| !c.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let scale = self.covariance.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (self.covariance[(i, j)] - self.covariance[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidRegion("covariance is not symmetric"));
                }
            }
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidRegion("lower bound exceeds upper bound"));
            }
        }
        Ok(())
    }
}

/// Which estimator [`box_probability`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    #[default]
    Conditioning,
    Indicator,
}

/// Randomized quasi-Monte Carlo budget and reproducibility settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QmcConfig {
    /// Lattice points per randomization.
    pub sample_budget: usize,
    pub randomizations: usize,
    pub seed: u64,
    /// Relative eigenvalue (pivot variance) cutoff for the numerical rank.
    pub rank_tolerance: f64,
    pub method: Method,
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self {
            sample_budget: 4096,
            randomizations: 8,
            seed: 0,
            rank_tolerance: 1e-10,
            method: Method::Conditioning,
        }
    }
}

impl QmcConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, sample_budget: usize) -> Self {
        self.sample_budget = sample_budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_budget < 256 {
            return Err(Error::InvalidConfig("sample_budget must be >= 256".into()));
        }
        if self.randomizations < 8 {
            return Err(Error::InvalidConfig("randomizations must be >= 8".into()));
        }
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance <= 1e-4) {
            return Err(Error::InvalidConfig(
                "rank_tolerance must lie in (0, 1e-4]".into(),
            ));
        }
        Ok(())
    }
}

/// Probability estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbabilityEstimate {
    pub value: f64,
    /// Zero only for results computed exactly.
    pub std_error: f64,
    pub rank_used: usize,
}

impl ProbabilityEstimate {
    pub fn exact(value: f64, rank_used: usize) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            std_error: 0.0,
            rank_used,
        }
    }
}

/// Eigen factor `B` with `B Bᵀ = covariance`, keeping only the eigenvalues
/// above `rank_tolerance * max eigenvalue`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    /// `d × rank`; column `j` is `sqrt(eigenvalue_j) * eigenvector_j`,
    /// eigenvalues in decreasing order.
    pub factor: DMatrix<f64>,
    pub rank: usize,
}

pub fn factorize_psd(covariance: &DMatrix<f64>, rank_tolerance: f64) -> Result<PsdFactor> {
    let d = covariance.nrows();
    if covariance.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: covariance.ncols(),
        });
    }
    if d == 0 {
        return Ok(PsdFactor {
            factor: DMatrix::zeros(0, 0),
            rank: 0,
        });
    }
    let eig = covariance.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let max = eig.eigenvalues[order[0]];
    let min = eig.eigenvalues[order[d - 1]];
    if min < -1e-8 * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    if max <= 0.0 {
        return Ok(PsdFactor {
            factor: DMatrix::zeros(d, 0),
            rank: 0,
        });
    }
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > rank_tolerance * max)
        .collect();
    let rank = kept.len();
    let mut factor = DMatrix::zeros(d, rank);
    for (col, &i) in kept.iter().enumerate() {
        let s = libm::sqrt(eig.eigenvalues[i]);
        for row in 0..d {
            factor[(row, col)] = s * eig.eigenvectors[(row, i)];
        }
    }
    Ok(PsdFactor { factor, rank })
}

/// `P(lower <= X <= upper)` for `X ~ N(mean, covariance)`.
///
/// Deterministic for a fixed `(region, config)`: the lattice shifts depend only
/// on `config.seed` and the randomization index.
pub fn box_probability(region: &GaussianRegion, config: &QmcConfig) -> Result<ProbabilityEstimate> {
    region.validate()?;
    config.validate()?;
    match config.method {
        Method::Conditioning => {
            let prepared = Prepared::new(region, config.rank_tolerance)?;
            Ok(prepared.estimate(config))
        }
        Method::Indicator => indicator::estimate(region, config),
    }
}

/// Mean and standard error over randomization replicates.
pub(crate) fn replicate_summary(replicates: &[f64]) -> (f64, f64) {
    let r = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / r;
    if replicates.len() < 2 {
        return (mean, 0.0);
    }
    let var = replicates.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
    (mean, libm::sqrt(var / r))
}
