use alloc::vec;
use alloc::vec::Vec;

use super::lattice::{generators, ShiftedLattice};
use super::normal::quantile;
use super::{factorize_psd, replicate_summary, GaussianRegion, ProbabilityEstimate, QmcConfig};
use crate::error::Result;
use crate::rng::derive_seed;

/// Averages the indicator that `mean + B e` satisfies all `2d` bounds, where
/// `B` is the eigen factor and `e` a standard normal of dimension `rank`.
pub(super) fn estimate(region: &GaussianRegion, config: &QmcConfig) -> Result<ProbabilityEstimate> {
    let d = region.dim();
    let psd = factorize_psd(&region.covariance, config.rank_tolerance)?;
    let rank = psd.rank;
    let inside = |x: &[f64]| {
        (0..d).all(|i| region.lower[i] <= x[i] && x[i] <= region.upper[i])
    };
    if rank == 0 {
        let hit = inside(&region.mean);
        return Ok(ProbabilityEstimate::exact(if hit { 1.0 } else { 0.0 }, 0));
    }
    let gens = generators(rank);
    let mut u = vec![0.0; rank];
    let mut e = vec![0.0; rank];
    let mut x = vec![0.0; d];
    let n = config.sample_budget;
    let replicates: Vec<f64> = (0..config.randomizations)
        .map(|r| {
            let lattice = ShiftedLattice::new(&gens, derive_seed(config.seed, &[r as u64]));
            let mut hits = 0usize;
            for i in 1..=n {
                lattice.point(i, &mut u);
                for (ej, &uj) in e.iter_mut().zip(&u) {
                    *ej = quantile(uj.clamp(1e-16, 1.0 - 1e-16));
                }
                for (row, xr) in x.iter_mut().enumerate() {
                    let mut v = region.mean[row];
                    for (col, ej) in e.iter().enumerate() {
                        v += psd.factor[(row, col)] * ej;
                    }
                    *xr = v;
                }
                if inside(&x) {
                    hits += 1;
                }
            }
            hits as f64 / n as f64
        })
        .collect();
    let (value, std_error) = replicate_summary(&replicates);
    Ok(ProbabilityEstimate {
        value,
        std_error,
        rank_used: rank,
    })
}
