//! A direct lasso solver on the standardized design, its KKT check, and a
//! simulation estimate of the sign-recovery probability.
//!
//! The objective is `(1/2n)‖ỹ − F b‖² + λ‖b‖₁` with `ỹ` the centered response,
//! so coefficients live on the `V^{1/2} β` scale.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::design::{Design, StandardizedDesign};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::rng::{derive_seed, rng_from_seed};

/// Coefficients smaller than this in magnitude count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-9;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    pub objective: f64,
    /// Objective after each sweep.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn centered(y: &[f64]) -> DVector<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    DVector::from_iterator(y.len(), y.iter().map(|v| v - mean))
}

fn objective(r: &DVector<f64>, b: &[f64], lambda: f64) -> f64 {
    r.norm_squared() / (2.0 * r.len() as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic coordinate descent. Each update is a soft-threshold of the partial
/// residual correlation, since the columns of `F` have unit mean square.
pub fn lasso_solve(std: &StandardizedDesign, y: &[f64], lambda: f64) -> Result<LassoFit> {
    if y.len() != std.n {
        return Err(Error::DimensionMismatch {
            expected: std.n,
            found: y.len(),
        });
    }
    if !(lambda > 0.0) || !lambda.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (n, p) = (std.n, std.p);
    let nf = n as f64;
    let mut r = centered(y);
    let mut b = vec![0.0; p];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_SWEEPS {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if std.is_degenerate(j) {
                continue;
            }
            let col = std.f.column(j);
            let rho = col.dot(&r) / nf + b[j];
            let new = soft_threshold(rho, lambda);
            let delta = new - b[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                b[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        trace.push(objective(&r, &b, lambda));
        if max_change < CONVERGENCE_TOLERANCE {
            converged = true;
            break;
        }
    }
    for v in b.iter_mut() {
        if v.abs() < ZERO_TOLERANCE {
            *v = 0.0;
        }
    }
    let support: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
    let signs = support.iter().map(|&j| if b[j] > 0.0 { 1 } else { -1 }).collect();
    Ok(LassoFit {
        objective: *trace.last().unwrap_or(&0.0),
        coefficients: b,
        support,
        signs,
        trace,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KktReport {
    /// `max_{j∈A} |(1/n) F_jᵀ(ỹ − F b) − λ ẑ_j|`.
    pub stationarity: f64,
    /// `C_A⁻¹((1/n) F_Aᵀ ỹ − λ ẑ)` has signs `ẑ`; vacuous when `C_A` is singular.
    pub sign_consistent: bool,
    /// `min_{j∈I} (λ − |(1/n) F_jᵀ(ỹ − F b)|)`.
    pub inactive_slack: f64,
    pub passes: bool,
}

pub const DEFAULT_KKT_TOLERANCE: f64 = 1e-8;

pub fn kkt_check(std: &StandardizedDesign, y: &[f64], lambda: f64, fit: &LassoFit, tol: f64) -> Result<KktReport> {
    if y.len() != std.n || fit.coefficients.len() != std.p {
        return Err(Error::DimensionMismatch {
            expected: std.n,
            found: y.len(),
        });
    }
    let nf = std.n as f64;
    let yc = centered(y);
    let b = DVector::from_column_slice(&fit.coefficients);
    let r = &yc - &std.f * &b;
    let grad = std.f.transpose() * &r / nf;
    let active: Vec<usize> = (0..std.p).filter(|&j| fit.coefficients[j] != 0.0).collect();
    let z: Vec<f64> = active.iter().map(|&j| fit.coefficients[j].signum()).collect();
    let stationarity = active
        .iter()
        .zip(&z)
        .map(|(&j, zj)| (grad[j] - lambda * zj).abs())
        .fold(0.0, f64::max);
    let inactive_slack = (0..std.p)
        .filter(|j| !active.contains(j) && !std.is_degenerate(*j))
        .map(|j| lambda - grad[j].abs())
        .fold(f64::INFINITY, f64::min);
    let sign_consistent = if active.is_empty() {
        true
    } else {
        let k = active.len();
        let c_a = DMatrix::from_fn(k, k, |a, c| std.c[(active[a], active[c])]);
        let rhs = DVector::from_fn(k, |a, _| std.f.column(active[a]).dot(&yc) / nf - lambda * z[a]);
        let eig = c_a.clone().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        // with a singular C_A the active block has no closed form; the fit
        // itself then carries the signs
        if lo <= 1e-10 * hi {
            true
        } else {
            match c_a.lu().solve(&rhs) {
                Some(sol) => sol.iter().zip(&z).all(|(v, zj)| v * zj > 0.0),
                None => false,
            }
        }
    };
    Ok(KktReport {
        stationarity,
        sign_consistent,
        inactive_slack,
        passes: stationarity <= tol && sign_consistent && inactive_slack >= -tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            replications: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimResult {
    pub hits: usize,
    pub replications: usize,
    pub empirical: f64,
    /// Binomial standard error `sqrt(p̂(1 − p̂)/R)`.
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

const Z95: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `hits` out of `trials`.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let ph = hits as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * libm::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of replications `y = Xβ + e`, `e ~ N(0, I)`, whose lasso fit has
/// exactly the support `support` with the signs of `beta`. `beta` holds the
/// signed effects on `support` at the original design scale; it may be empty.
pub fn simulate_sign_recovery(
    design: &Design,
    support: &[usize],
    beta: &[f64],
    lambda: f64,
    sim: &SimConfig,
) -> Result<SimResult> {
    if support.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: support.len(),
            found: beta.len(),
        });
    }
    if support.iter().any(|&j| j >= design.p()) || beta.iter().any(|b| !b.is_finite() || *b == 0.0) {
        return Err(Error::InvalidConfig("support indices must be < p and effects nonzero".into()));
    }
    if sim.replications == 0 {
        return Err(Error::InvalidConfig("replications must be positive".into()));
    }
    let std = design.standardize();
    let n = design.n();
    let mean: Vec<f64> = (0..n)
        .map(|r| support.iter().zip(beta).map(|(&j, b)| design.get(r, j) as f64 * b).sum())
        .collect();
    let mut order: Vec<usize> = (0..support.len()).collect();
    order.sort_by_key(|&i| support[i]);
    let want_support: Vec<usize> = order.iter().map(|&i| support[i]).collect();
    let want_signs: Vec<i8> = order.iter().map(|&i| if beta[i] > 0.0 { 1 } else { -1 }).collect();
    let hits = map_indexed(sim.replications, |rep| -> Result<bool> {
        let mut rng = rng_from_seed(derive_seed(sim.seed, &[rep as u64]));
        let y: Vec<f64> = mean
            .iter()
            .map(|m| m + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let fit = lasso_solve(&std, &y, lambda)?;
        Ok(fit.support == want_support && fit.signs == want_signs)
    })
    .into_iter()
    .collect::<Result<Vec<bool>>>()?
    .into_iter()
    .filter(|&h| h)
    .count();
    let r = sim.replications as f64;
    let empirical = hits as f64 / r;
    let (ci_low, ci_high) = wilson_interval(hits, sim.replications);
    Ok(SimResult {
        hits,
        replications: sim.replications,
        empirical,
        std_error: libm::sqrt(empirical * (1.0 - empirical) / r),
        ci_low,
        ci_high,
    })
}
