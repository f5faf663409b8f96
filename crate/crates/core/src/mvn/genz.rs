use alloc::vec;
use alloc::vec::Vec;

use super::lattice::{generators, ShiftedLattice};
use super::normal::{cdf, interval, pdf, quantile, quantile_upper, sf};
use super::{factorize_psd, replicate_summary, GaussianRegion, ProbabilityEstimate, QmcConfig};
use crate::error::Result;
use crate::rng::derive_seed;

/// A box probability reduced to sequential one-dimensional truncations.
///
/// Constraint `c` reads `lower[c] <= coeffs[c] · e <= upper[c]` with `e`
/// standard normal of dimension `rank`; it is attached to the last pivot with
/// a nonzero loading, so pivot `j` is truncated by every constraint in
/// `col_start[j]..col_start[j + 1]` given the earlier pivots.
#[derive(Debug, Clone)]
pub struct Prepared {
    rank: usize,
    col_start: Vec<usize>,
    coeffs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    infeasible: bool,
    separable: bool,
}

impl Prepared {
    pub fn new(region: &GaussianRegion, rank_tolerance: f64) -> Result<Self> {
        // unconstrained coordinates integrate to one
        let active: Vec<usize> = (0..region.dim())
            .filter(|&i| region.lower[i].is_finite() || region.upper[i].is_finite())
            .collect();
        let d = active.len();
        let mut sigma = vec![0.0; d * d];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                sigma[a * d + b] = region.covariance[(i, j)];
            }
        }
        let mut lower: Vec<f64> = active.iter().map(|&i| region.lower[i] - region.mean[i]).collect();
        let mut upper: Vec<f64> = active.iter().map(|&i| region.upper[i] - region.mean[i]).collect();
        let max_diag = (0..d).map(|i| sigma[i * d + i]).fold(0.0, f64::max);
        let mut chol = vec![0.0; d * d];
        let mut expected = vec![0.0; d];
        let mut rank = 0;

        if max_diag > 0.0 {
            let cutoff = rank_tolerance * max_diag;
            for j in 0..d {
                // pick the remaining coordinate with the smallest conditional probability
                let mut best: Option<(usize, f64, f64, f64)> = None;
                for i in j..d {
                    let mut s = sigma[i * d + i];
                    let mut shift = 0.0;
                    for m in 0..j {
                        let l = chol[i * d + m];
                        s -= l * l;
                        shift += l * expected[m];
                    }
                    if s <= cutoff {
                        continue;
                    }
                    let sd = libm::sqrt(s);
                    let a = (lower[i] - shift) / sd;
                    let b = (upper[i] - shift) / sd;
                    let p = interval(a, b);
                    if best.map_or(true, |(_, bp, _, _)| p < bp) {
                        best = Some((i, p, a, b));
                    }
                }
                let Some((pivot, p, a, b)) = best else { break };
                if pivot != j {
                    for m in 0..d {
                        sigma.swap(j * d + m, pivot * d + m);
                    }
                    for m in 0..d {
                        sigma.swap(m * d + j, m * d + pivot);
                    }
                    for m in 0..j {
                        chol.swap(j * d + m, pivot * d + m);
                    }
                    lower.swap(j, pivot);
                    upper.swap(j, pivot);
                }
                let mut s = sigma[j * d + j];
                for m in 0..j {
                    s -= chol[j * d + m] * chol[j * d + m];
                }
                let diag = libm::sqrt(s);
                chol[j * d + j] = diag;
                for i in (j + 1)..d {
                    let mut v = sigma[i * d + j];
                    for m in 0..j {
                        v -= chol[i * d + m] * chol[j * d + m];
                    }
                    chol[i * d + j] = v / diag;
                }
                expected[j] = truncated_mean(a, b, p);
                rank = j + 1;
            }

            // remaining rows must be (numerically) exact combinations of the pivots
            let mut suspicious = false;
            for i in rank..d {
                for i2 in rank..=i {
                    let mut r = sigma[i * d + i2];
                    for m in 0..rank {
                        r -= chol[i * d + m] * chol[i2 * d + m];
                    }
                    if r.abs() > 1e-6 * max_diag {
                        suspicious = true;
                    }
                }
            }
            if suspicious {
                // definitive PSD check; propagates NotPsd
                factorize_psd(&region.covariance, rank_tolerance)?;
            }
        }

        // attach each constraint to its last nonzero pivot
        let zero = 1e-10 * libm::sqrt(max_diag.max(f64::MIN_POSITIVE));
        let mut attached: Vec<(usize, usize)> = Vec::with_capacity(d);
        let mut infeasible = false;
        for i in 0..d {
            let last = if i < rank {
                Some(i)
            } else {
                (0..rank).rev().find(|&m| chol[i * d + m].abs() > zero)
            };
            match last {
                Some(col) => attached.push((col, i)),
                None => {
                    if !(lower[i] <= 0.0 && 0.0 <= upper[i]) {
                        infeasible = true;
                    }
                }
            }
        }
        attached.sort_by_key(|&(col, i)| (col, i));
        let mut col_start = vec![0; rank + 1];
        let mut coeffs = Vec::with_capacity(attached.len() * rank);
        let mut lo = Vec::with_capacity(attached.len());
        let mut hi = Vec::with_capacity(attached.len());
        let mut separable = true;
        for &(col, i) in &attached {
            col_start[col + 1] += 1;
            for m in 0..rank {
                let v = if m <= col { chol[i * d + m] } else { 0.0 };
                let v = if m < col && v.abs() <= zero { 0.0 } else { v };
                if m < col && v != 0.0 {
                    separable = false;
                }
                coeffs.push(v);
            }
            lo.push(lower[i]);
            hi.push(upper[i]);
        }
        for j in 0..rank {
            col_start[j + 1] += col_start[j];
        }
        Ok(Self {
            rank,
            col_start,
            coeffs,
            lower: lo,
            upper: hi,
            infeasible,
            separable,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Whether the integrand is constant, making the estimate exact.
    pub fn is_exact(&self) -> bool {
        self.infeasible || self.rank <= 1 || self.separable
    }

    /// Product of the conditional interval probabilities along one point `w`
    /// of the unit cube (dimension `rank - 1`).
    fn integrand(&self, w: &[f64], e: &mut [f64]) -> f64 {
        let r = self.rank;
        let mut prod = 1.0;
        for j in 0..r {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for c in self.col_start[j]..self.col_start[j + 1] {
                let row = &self.coeffs[c * r..c * r + r];
                let mut t = 0.0;
                for m in 0..j {
                    t += row[m] * e[m];
                }
                let (mut a, mut b) = ((self.lower[c] - t) / row[j], (self.upper[c] - t) / row[j]);
                if row[j] < 0.0 {
                    core::mem::swap(&mut a, &mut b);
                }
                lo = lo.max(a);
                hi = hi.min(b);
            }
            if hi <= lo {
                return 0.0;
            }
            if j + 1 == r {
                prod *= interval(lo, hi);
                break;
            }
            let u = w[j];
            let x = if lo > 0.0 {
                let (s_lo, s_hi) = (sf(lo), sf(hi));
                let p = s_lo - s_hi;
                if p <= 0.0 {
                    return 0.0;
                }
                prod *= p;
                quantile_upper(s_lo - u * p)
            } else {
                let (c_lo, c_hi) = (cdf(lo), cdf(hi));
                let p = c_hi - c_lo;
                if p <= 0.0 {
                    return 0.0;
                }
                prod *= p;
                quantile(c_lo + u * p)
            };
            e[j] = x.clamp(lo, hi);
            if !e[j].is_finite() {
                e[j] = if lo.is_finite() { lo } else { hi };
            }
        }
        prod
    }

    pub fn estimate(&self, config: &QmcConfig) -> ProbabilityEstimate {
        if self.infeasible {
            return ProbabilityEstimate::exact(0.0, self.rank);
        }
        if self.rank == 0 {
            return ProbabilityEstimate::exact(1.0, 0);
        }
        let mut e = vec![0.0; self.rank];
        if self.is_exact() {
            let w = vec![0.5; self.rank];
            return ProbabilityEstimate::exact(self.integrand(&w, &mut e), self.rank);
        }
        let dim = self.rank - 1;
        let gens = generators(dim);
        let mut w = vec![0.0; dim];
        let n = config.sample_budget;
        let replicates: Vec<f64> = (0..config.randomizations)
            .map(|r| {
                let lattice = ShiftedLattice::new(&gens, derive_seed(config.seed, &[r as u64]));
                let mut sum = 0.0;
                for i in 1..=n {
                    lattice.point(i, &mut w);
                    sum += self.integrand(&w, &mut e);
                }
                sum / n as f64
            })
            .collect();
        let (value, std_error) = replicate_summary(&replicates);
        ProbabilityEstimate {
            value: value.clamp(0.0, 1.0),
            std_error,
            rank_used: self.rank,
        }
    }
}

fn truncated_mean(a: f64, b: f64, p: f64) -> f64 {
    if p > 1e-300 {
        let m = (pdf(a) - pdf(b)) / p;
        if m.is_finite() {
            return m.clamp(a, b);
        }
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => 0.5 * (a + b),
        (true, false) => a,
        (false, true) => b,
        (false, false) => 0.0,
    }
}
