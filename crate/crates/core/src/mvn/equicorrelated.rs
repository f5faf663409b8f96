//! Box probabilities for nonnegatively equicorrelated normals by one-dimensional
//! quadrature over the shared factor.
//!
//! With `X_i = μ_i + a e_i + b T` (all standard normal and independent),
//! `P(l ≤ X ≤ u) = E_T[∏ᵢ P(l_i ≤ μ_i + a e_i + b T ≤ u_i | T)]`.

use alloc::vec::Vec;

use super::normal::{interval, pdf};

/// Coordinates sharing mean and bounds, counted `count` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGroup {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub count: u32,
}

const HALF_WIDTH: f64 = 8.5;
const PANELS: usize = 34;
const ORDER: usize = 16;

/// `P(l_i ≤ X_i ≤ u_i, all i)` where every coordinate has variance
/// `own_sd² + shared_sd²` and every pair covariance `shared_sd²`.
pub fn equicorrelated_box(own_sd: f64, shared_sd: f64, groups: &[BoxGroup]) -> f64 {
    let factor = |t: f64| -> f64 {
        let mut prod = 1.0;
        for g in groups {
            let shift = g.mean + shared_sd * t;
            let p = interval((g.lower - shift) / own_sd, (g.upper - shift) / own_sd);
            prod *= p.powi(g.count as i32);
            if prod == 0.0 {
                break;
            }
        }
        prod
    };
    if shared_sd == 0.0 {
        return factor(0.0);
    }
    let (nodes, weights) = gauss_legendre(ORDER);
    let h = 2.0 * HALF_WIDTH / PANELS as f64;
    let mut total = 0.0;
    for panel in 0..PANELS {
        let mid = -HALF_WIDTH + h * (panel as f64 + 0.5);
        for (x, w) in nodes.iter().zip(&weights) {
            let t = mid + 0.5 * h * x;
            total += 0.5 * h * w * pdf(t) * factor(t);
        }
    }
    total.clamp(0.0, 1.0)
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}
