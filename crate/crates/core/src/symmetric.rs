//! Criteria under a completely symmetric correlation matrix
//! `C = (1 − c) I + c J` with `V = I`.
//!
//! With `γ = c / (1 + c(k − 1))` and `s = Σ z_i` the two events reduce to
//!
//! * `u ~ N(λ√n/(1 − c) (1 − γ s z), (I − γ z zᵀ)/(1 − c))`, `u ≤ √n β`;
//! * `v ~ N(λ√n γ s 1_q, (1 − c)(I + γ J_q))`, `|v| ≤ λ√n`.
//!
//! Both depend on `z` only through the number of negative entries, so the
//! `2^{k-1}` reflection classes collapse to `⌊k/2⌋ + 1` exchangeable ones. At
//! `c = 0` both probabilities have closed forms, and whenever an event's
//! (sign-adjusted) correlations are nonnegative it is an exact
//! one-dimensional integral. The remaining cases go through the lattice
//! engine.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mvn::normal::{cdf, interval, inverse_mills, pdf};
use crate::mvn::{box_probability, equicorrelated_box, BoxGroup, GaussianRegion, ProbabilityEstimate, QmcConfig};
use crate::optimize::brent_max;
use crate::par::map_indexed;
use crate::recovery::{CriterionValue, Summary};
use crate::rng::{derive_seed, TAG_INACTIVE_EVENT, TAG_SIGN_EVENT};

/// Known signs (`z = 1`) or the average over all reflection classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SymSigns {
    #[default]
    Known,
    All,
}

/// `Auto` uses closed forms and quadrature where exact; `Engine` forces the
/// lattice estimator for every case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SymMethod {
    #[default]
    Auto,
    Engine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymScenario {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub beta: f64,
    pub c: f64,
    pub gamma: f64,
}

/// Open interval of `c` for which both event covariances are positive definite.
pub fn c_bounds(k: usize, q: usize) -> (f64, f64) {
    (-1.0 / (k + q - 1) as f64, 1.0)
}

impl SymScenario {
    pub fn new(n: usize, k: usize, q: usize, beta: f64, c: f64) -> Result<Self> {
        if k < 1 || q < 1 || n < 2 {
            return Err(Error::InvalidConfig("need k >= 1, q >= 1 and n >= 2".into()));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be positive and finite".into()));
        }
        let (lower, upper) = c_bounds(k, q);
        if !(c > lower && c < upper) {
            return Err(Error::InvalidC { c, lower, upper });
        }
        Ok(Self {
            n,
            k,
            q,
            beta,
            c,
            gamma: c / (1.0 + c * (k - 1) as f64),
        })
    }

    fn sqrt_n(&self) -> f64 {
        libm::sqrt(self.n as f64)
    }

    /// `u`-region for a sign vector with `minus` negative entries, placed last.
    pub fn sign_region(&self, minus: usize, lambda: f64) -> Result<GaussianRegion> {
        let (k, c, g) = (self.k, self.c, self.gamma);
        let z: Vec<f64> = (0..k).map(|i| if i < k - minus { 1.0 } else { -1.0 }).collect();
        let s: f64 = z.iter().sum();
        let base = lambda * self.sqrt_n() / (1.0 - c);
        let mean = z.iter().map(|zi| base * (1.0 - g * s * zi)).collect();
        let cov = DMatrix::from_fn(k, k, |i, j| {
            (if i == j { 1.0 } else { 0.0 } - g * z[i] * z[j]) / (1.0 - c)
        });
        GaussianRegion::new(mean, cov, vec![f64::NEG_INFINITY; k], vec![self.sqrt_n() * self.beta; k])
    }

    pub fn inactive_region(&self, minus: usize, lambda: f64) -> Result<GaussianRegion> {
        let q = self.q;
        let s = self.k as f64 - 2.0 * minus as f64;
        let box_half = lambda * self.sqrt_n();
        let mean = vec![box_half * self.gamma * s; q];
        let cov = DMatrix::from_fn(q, q, |i, j| {
            (1.0 - self.c) * (if i == j { 1.0 } else { 0.0 } + self.gamma)
        });
        GaussianRegion::new(mean, cov, vec![-box_half; q], vec![box_half; q])
    }

    fn sign_exact(&self, minus: usize, lambda: f64) -> Option<f64> {
        let (sn, k) = (self.sqrt_n(), self.k);
        if self.c == 0.0 {
            return Some(cdf(sn * (self.beta - lambda)).powi(k as i32));
        }
        if self.gamma > 0.0 {
            return None;
        }
        // w = Z u has covariance (I − γJ)/(1 − c), nonnegative when γ ≤ 0
        let s = k as f64 - 2.0 * minus as f64;
        let base = lambda * sn / (1.0 - self.c);
        let bound = sn * self.beta;
        let groups = [
            BoxGroup {
                mean: base * (1.0 - self.gamma * s),
                lower: f64::NEG_INFINITY,
                upper: bound,
                count: (k - minus) as u32,
            },
            BoxGroup {
                mean: base * (-1.0 - self.gamma * s),
                lower: -bound,
                upper: f64::INFINITY,
                count: minus as u32,
            },
        ];
        let own = 1.0 / libm::sqrt(1.0 - self.c);
        let shared = libm::sqrt(-self.gamma / (1.0 - self.c));
        Some(equicorrelated_box(own, shared, &groups))
    }

    fn inactive_exact(&self, minus: usize, lambda: f64) -> Option<f64> {
        let box_half = lambda * self.sqrt_n();
        if self.c == 0.0 {
            return Some(interval(-box_half, box_half).powi(self.q as i32));
        }
        if self.gamma < 0.0 {
            return None;
        }
        let s = self.k as f64 - 2.0 * minus as f64;
        let groups = [BoxGroup {
            mean: box_half * self.gamma * s,
            lower: -box_half,
            upper: box_half,
            count: self.q as u32,
        }];
        let own = libm::sqrt(1.0 - self.c);
        let shared = libm::sqrt((1.0 - self.c) * self.gamma);
        Some(equicorrelated_box(own, shared, &groups))
    }

    pub fn prob_s(&self, minus: usize, lambda: f64, method: SymMethod, config: &QmcConfig) -> Result<ProbabilityEstimate> {
        check_minus(minus, self.k)?;
        if method == SymMethod::Auto {
            if let Some(p) = self.sign_exact(minus, lambda) {
                return Ok(ProbabilityEstimate::exact(p, self.k));
            }
        }
        box_probability(&self.sign_region(minus, lambda)?, config)
    }

    pub fn prob_i(&self, minus: usize, lambda: f64, method: SymMethod, config: &QmcConfig) -> Result<ProbabilityEstimate> {
        check_minus(minus, self.k)?;
        if method == SymMethod::Auto {
            if let Some(p) = self.inactive_exact(minus, lambda) {
                return Ok(ProbabilityEstimate::exact(p, self.q));
            }
        }
        box_probability(&self.inactive_region(minus, lambda)?, config)
    }
}

fn check_minus(minus: usize, k: usize) -> Result<()> {
    if minus > k {
        return Err(Error::InvalidConfig("more negative signs than active effects".into()));
    }
    Ok(())
}

fn count_minus(signs: &[i8], k: usize) -> Result<usize> {
    if signs.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: signs.len(),
        });
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidConfig("signs must be +1 or -1".into()));
    }
    Ok(signs.iter().filter(|&&s| s < 0).count())
}

/// `z` and `−z` give the same events; use one representative so both share
/// lattice seeds.
fn reflected_minus(signs: &[i8], k: usize) -> Result<usize> {
    let m = count_minus(signs, k)?;
    Ok(m.min(k - m))
}

/// `P(S_λ)` for sign vector `signs`; only its count of negative entries matters.
pub fn sym_prob_s(
    sym: &SymScenario,
    signs: &[i8],
    lambda: f64,
    method: SymMethod,
    config: &QmcConfig,
) -> Result<ProbabilityEstimate> {
    sym.prob_s(reflected_minus(signs, sym.k)?, lambda, method, config)
}

pub fn sym_prob_i(
    sym: &SymScenario,
    signs: &[i8],
    lambda: f64,
    method: SymMethod,
    config: &QmcConfig,
) -> Result<ProbabilityEstimate> {
    sym.prob_i(reflected_minus(signs, sym.k)?, lambda, method, config)
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exchangeable sign classes `(negatives, weight)`; weights sum to one and
/// reproduce the average over all `2^{k-1}` reflection representatives.
pub fn sign_classes(k: usize) -> Vec<(usize, f64)> {
    let total = libm::pow(2.0, k as f64);
    (0..=k / 2)
        .map(|m| {
            let w = binomial(k, m) / total;
            (m, if 2 * m == k { w } else { 2.0 * w })
        })
        .collect()
}

/// Evaluates ψ criteria for fixed `(n, k, q, β)` as functions of `(c, λ)`.
///
/// Lattice seeds depend only on the sign class and event, never on `c` or
/// λ, so criteria are smooth in both arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymEvaluator {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub beta: f64,
    pub method: SymMethod,
    pub config: QmcConfig,
}

impl SymEvaluator {
    pub fn new(n: usize, k: usize, q: usize, beta: f64) -> Self {
        Self {
            n,
            k,
            q,
            beta,
            method: SymMethod::Auto,
            config: QmcConfig::default(),
        }
    }

    pub fn scenario(&self, c: f64) -> Result<SymScenario> {
        SymScenario::new(self.n, self.k, self.q, self.beta, c)
    }

    fn class_term(&self, sym: &SymScenario, minus: usize, lambda: f64) -> Result<CriterionValue> {
        let cfg = |tag| QmcConfig {
            seed: derive_seed(self.config.seed, &[minus as u64, tag]),
            ..self.config
        };
        let s = sym.prob_s(minus, lambda, self.method, &cfg(TAG_SIGN_EVENT))?;
        let i = sym.prob_i(minus, lambda, self.method, &cfg(TAG_INACTIVE_EVENT))?;
        Ok(CriterionValue {
            value: s.value * i.value,
            p_s: Some(s.value),
            p_i: Some(i.value),
            std_error: libm::sqrt((i.value * s.std_error).powi(2) + (s.value * i.std_error).powi(2)),
            lambda_at: Some(lambda),
            singular_supports: 0,
        })
    }

    /// `ψ_λ`: known signs `z = 1`.
    pub fn psi(&self, c: f64, lambda: f64) -> Result<CriterionValue> {
        self.class_term(&self.scenario(c)?, 0, lambda)
    }

    /// `ψ_λ^±`: weighted over the exchangeable sign classes.
    pub fn psi_pm(&self, c: f64, lambda: f64) -> Result<CriterionValue> {
        let sym = self.scenario(c)?;
        let mut out = CriterionValue {
            lambda_at: Some(lambda),
            ..CriterionValue::zero()
        };
        let mut var = 0.0;
        let (mut ps, mut pi) = (0.0, 0.0);
        for (m, w) in sign_classes(self.k) {
            let t = self.class_term(&sym, m, lambda)?;
            out.value += w * t.value;
            ps += w * t.p_s.unwrap_or(0.0);
            pi += w * t.p_i.unwrap_or(0.0);
            var += (w * t.std_error).powi(2);
        }
        out.p_s = Some(ps);
        out.p_i = Some(pi);
        out.std_error = libm::sqrt(var);
        Ok(out)
    }

    pub fn criterion(&self, signs: SymSigns, c: f64, lambda: f64) -> Result<CriterionValue> {
        match signs {
            SymSigns::Known => self.psi(c, lambda),
            SymSigns::All => self.psi_pm(c, lambda),
        }
    }

    /// A λ summary (`ψ_max`, `ψ_Λ`, or a fixed λ) of the criterion at `c`.
    pub fn summarize(&self, signs: SymSigns, c: f64, summary: &Summary) -> Result<CriterionValue> {
        self.scenario(c)?;
        Ok(summary.apply(|l| self.criterion(signs, c, l))?.result)
    }
}

/// Result of one multi-start branch of [`optimize_c`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StartResult {
    pub start: f64,
    pub c: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizeReport {
    pub c_star: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub starts: Vec<StartResult>,
}

pub const C_STARTS: [f64; 4] = [-0.2, 0.0, 0.2, 0.5];

/// Search interval for the optimal `c`: the lower end stays `1e-3` inside the
/// positive-definite range and never below `-0.5`; the upper end is `0.99`.
pub fn c_search_interval(k: usize, q: usize) -> (f64, f64) {
    ((c_bounds(k, q).0 + 1e-3).max(-0.5), 0.99)
}

/// Maximizes a λ summary of `ψ` or `ψ^±` over `c`.
///
/// Each start runs Brent's method on the bracket between its neighbouring
/// starts (or the interval ends), so the branches cover the whole interval
/// without overlapping.
pub fn optimize_c(eval: &SymEvaluator, signs: SymSigns, summary: &Summary, tolerance: f64) -> Result<OptimizeReport> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let (lower, upper) = c_search_interval(eval.k, eval.q);
    let starts: Vec<f64> = C_STARTS.iter().copied().filter(|&s| s > lower && s < upper).collect();
    let mut knots = vec![lower];
    knots.extend(&starts);
    knots.push(upper);
    let branches = map_indexed(starts.len(), |i| -> Result<StartResult> {
        let mut failure = None;
        let (c, value) = brent_max(
            |c| match eval.summarize(signs, c, summary) {
                Ok(v) => v.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            knots[i],
            knots[i + 2],
            starts[i],
            tolerance / 4.0,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(StartResult {
                start: starts[i],
                c,
                value,
            }),
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let best = branches
        .iter()
        .fold(branches[0], |b, r| if r.value > b.value { *r } else { b });
    Ok(OptimizeReport {
        c_star: best.c,
        value: best.value,
        lower,
        upper,
        starts: branches,
    })
}

/// One side-by-side evaluation of an analytic condition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `2λ√n ≥ g(τ)/G(τ)` with `τ = √n(β − λ)`; under it `P(S_λ)` increases in
/// `c` at `c = 0` for known signs.
pub fn lemma3_condition(n: usize, beta: f64, lambda: f64) -> ConditionReport {
    let sn = libm::sqrt(n as f64);
    let lhs = 2.0 * lambda * sn;
    let rhs = inverse_mills(sn * (beta - lambda));
    ConditionReport {
        lambda,
        lhs,
        rhs,
        holds: lhs >= rhs,
    }
}

/// The `log λ` above which [`lemma3_condition`] holds, searched on
/// `[-60, log β]`; `None` without a sign change there.
pub fn lemma3_threshold(n: usize, beta: f64) -> Option<f64> {
    let gap = |w: f64| {
        let r = lemma3_condition(n, beta, libm::exp(w));
        libm::log(r.lhs) - libm::log(r.rhs)
    };
    bisect(gap, -60.0, libm::log(beta), 1e-10)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return None;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// The inequality under which `c = 0` is a local maximum of `ψ_λ^±`:
/// `lhs ≤ rhs` with
///
/// * `lhs = q/binom(k,2) · (λₙ g(λₙ)/G(Δₙ)) · (k(1 − λₙ²) + (q − 1) λₙ g(λₙ)/G(Δₙ))`,
/// * `rhs = m(τₙ) (βₙ + λₙ + λₙ² τₙ − ((βₙ² − λₙ²)/2 + βₙλₙ) m(τₙ))`,
///
/// where `λₙ = λ√n`, `βₙ = β√n`, `τₙ = βₙ − λₙ`, `m = g/G` and
/// `G(Δₙ) = G(λₙ) − G(−λₙ)`.
pub fn theorem3_condition(n: usize, k: usize, q: usize, beta: f64, lambda: f64) -> Result<ConditionReport> {
    if k < 2 {
        return Err(Error::DegenerateK);
    }
    let sn = libm::sqrt(n as f64);
    let (ln, bn) = (lambda * sn, beta * sn);
    let tau = bn - ln;
    let ratio = ln * pdf(ln) / interval(-ln, ln);
    let kq = (k * (k - 1) / 2) as f64;
    let lhs = q as f64 / kq * ratio * (k as f64 * (1.0 - ln * ln) + (q as f64 - 1.0) * ratio);
    let m = inverse_mills(tau);
    let rhs = m * (bn + ln + ln * ln * tau - ((bn * bn - ln * ln) / 2.0 + bn * ln) * m);
    Ok(ConditionReport {
        lambda,
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Maximal `log λ` intervals inside `[lo, hi]` where [`theorem3_condition`]
/// holds; boundaries found by scanning with `step` then bisecting.
pub fn theorem3_regions(n: usize, k: usize, q: usize, beta: f64, lo: f64, hi: f64, step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0) || !(lo < hi) {
        return Err(Error::InvalidConfig("need lo < hi and a positive step".into()));
    }
    theorem3_condition(n, k, q, beta, 1.0)?;
    let gap = |w: f64| {
        let r = theorem3_condition(n, k, q, beta, libm::exp(w)).expect("k checked");
        r.rhs - r.lhs
    };
    let holds = |w: f64| gap(w) >= 0.0;
    let steps = libm::ceil((hi - lo) / step) as usize;
    let mut regions = Vec::new();
    let mut open = holds(lo).then_some(lo);
    let mut prev = lo;
    for i in 1..=steps {
        let w = (lo + step * i as f64).min(hi);
        let h = holds(w);
        match (open, h) {
            (None, true) => open = Some(bisect(gap, prev, w, 1e-10).unwrap_or(w)),
            (Some(start), false) => {
                regions.push((start, bisect(gap, prev, w, 1e-10).unwrap_or(prev)));
                open = None;
            }
            _ => {}
        }
        prev = w;
    }
    if let Some(start) = open {
        regions.push((start, hi));
    }
    Ok(regions)
}

/// A Richardson-extrapolated central difference with its error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteDifference {
    pub estimate: f64,
    /// Propagated lattice standard error.
    pub std_error: f64,
    /// From the change in the extrapolated value when the steps are halved;
    /// it also absorbs the extra step's lattice noise.
    pub truncation: f64,
}

impl FiniteDifference {
    /// Sampling and truncation error allowance, `5·std_error + truncation`.
    pub fn bound(&self) -> f64 {
        5.0 * self.std_error + self.truncation
    }

    pub fn consistent_with_zero(&self) -> bool {
        self.estimate.abs() <= self.bound()
    }

    pub fn clearly_positive(&self) -> bool {
        self.estimate > self.bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivativeReport {
    pub lambda: f64,
    /// `d/dc P(I_λ | c, z = 1)` at `c = 0`; predicted 0.
    pub d_prob_i: FiniteDifference,
    /// `d/dc ψ_λ` at 0; predicted positive when `lemma3_condition` holds.
    pub d_psi: FiniteDifference,
    /// `d/dc ψ_λ^±` at 0; predicted 0.
    pub d_psi_pm: FiniteDifference,
    /// `d²/dc² ψ_λ^±` at 0.
    pub d2_psi_pm: FiniteDifference,
    pub lemma3_holds: bool,
}

pub const DERIVATIVE_STEPS: [f64; 2] = [1e-2, 5e-3];

struct Difference {
    first: f64,
    first_se: f64,
    second: f64,
    second_se: f64,
}

fn difference(f: &impl Fn(f64) -> Result<CriterionValue>, h: f64, zero: &CriterionValue) -> Result<Difference> {
    let (p, m) = (f(h)?, f(-h)?);
    let pm_var = p.std_error.powi(2) + m.std_error.powi(2);
    Ok(Difference {
        first: (p.value - m.value) / (2.0 * h),
        first_se: libm::sqrt(pm_var) / (2.0 * h),
        second: (p.value - 2.0 * zero.value + m.value) / (h * h),
        second_se: libm::sqrt(pm_var + 4.0 * zero.std_error.powi(2)) / (h * h),
    })
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Richardson-extrapolated first and second central differences over
/// `DERIVATIVE_STEPS`. A third step `h/4` only feeds the truncation estimate:
/// twice the change in the extrapolated value when both steps are halved,
/// against a leading-order factor of 16/15.
fn central<F: Fn(f64) -> Result<CriterionValue>>(f: F) -> Result<(FiniteDifference, FiniteDifference)> {
    let [h1, h2] = DERIVATIVE_STEPS;
    let zero = f(0.0)?;
    let d1 = difference(&f, h1, &zero)?;
    let d2 = difference(&f, h2, &zero)?;
    let d3 = difference(&f, h2 / 2.0, &zero)?;
    // noise of the two step sizes is treated as independent; the shared
    // centre term makes this slightly conservative for second differences
    let combine = |a: f64, b: f64| libm::sqrt((4.0 * b).powi(2) + a.powi(2)) / 3.0;
    let first = FiniteDifference {
        estimate: richardson(d1.first, d2.first),
        std_error: combine(d1.first_se, d2.first_se),
        truncation: 2.0 * (richardson(d1.first, d2.first) - richardson(d2.first, d3.first)).abs(),
    };
    let second = FiniteDifference {
        estimate: richardson(d1.second, d2.second),
        std_error: combine(d1.second_se, d2.second_se),
        truncation: 2.0 * (richardson(d1.second, d2.second) - richardson(d2.second, d3.second)).abs(),
    };
    Ok((first, second))
}

/// Finite-difference derivatives in `c` at `c = 0`.
pub fn derivative_check(eval: &SymEvaluator, lambda: f64) -> Result<DerivativeReport> {
    let prob_i = |c: f64| -> Result<CriterionValue> {
        let sym = eval.scenario(c)?;
        let cfg = QmcConfig {
            seed: derive_seed(eval.config.seed, &[0, TAG_INACTIVE_EVENT]),
            ..eval.config
        };
        let p = sym.prob_i(0, lambda, eval.method, &cfg)?;
        Ok(CriterionValue {
            value: p.value,
            std_error: p.std_error,
            ..CriterionValue::zero()
        })
    };
    let (d_prob_i, _) = central(prob_i)?;
    let (d_psi, _) = central(|c| eval.psi(c, lambda))?;
    let (d_psi_pm, d2_psi_pm) = central(|c| eval.psi_pm(c, lambda))?;
    Ok(DerivativeReport {
        lambda,
        d_prob_i,
        d_psi,
        d_psi_pm,
        d2_psi_pm,
        lemma3_holds: lemma3_condition(eval.n, eval.beta, lambda).holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContourCell {
    pub c: f64,
    pub log_lambda: f64,
    pub value: f64,
}

/// Criterion values on a `c × log λ` grid, `c` varying slowest.
pub fn contour_grid(
    eval: &SymEvaluator,
    signs: SymSigns,
    c_range: (f64, f64),
    log_lambda_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Vec<ContourCell>> {
    let (nc, nl) = resolution;
    if nc == 0 || nl == 0 {
        return Err(Error::InvalidConfig("resolution must be positive".into()));
    }
    let at = |(lo, hi): (f64, f64), count: usize, i: usize| {
        if count == 1 { lo } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 }
    };
    map_indexed(nc * nl, |cell| {
        let c = at(c_range, nc, cell / nl);
        let w = at(log_lambda_range, nl, cell % nl);
        eval.criterion(signs, c, libm::exp(w)).map(|v| ContourCell {
            c,
            log_lambda: w,
            value: v.value,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_definition() {
        let s = SymScenario::new(10, 4, 6, 2.0, 0.3).unwrap();
        assert!((s.gamma - 0.3 / 1.9).abs() < 1e-12);
        assert!(SymScenario::new(10, 4, 6, 2.0, -0.2).is_err());
        assert!(SymScenario::new(10, 4, 6, 2.0, 1.0).is_err());
    }

    #[test]
    fn class_weights_sum_to_one() {
        for k in 1..9 {
            let w: f64 = sign_classes(k).iter().map(|c| c.1).sum();
            assert!((w - 1.0).abs() < 1e-14);
        }
        assert_eq!(sign_classes(1), vec![(0, 1.0)]);
    }

    #[test]
    fn closed_forms_at_zero() {
        let s = SymScenario::new(10, 4, 6, 2.0, 0.0).unwrap();
        let cfg = QmcConfig::default();
        let ps = s.prob_s(0, 1.0, SymMethod::Auto, &cfg).unwrap();
        assert!((ps.value - 0.99687).abs() < 1e-5);
        let pi = s.prob_i(0, 1.0, SymMethod::Auto, &cfg).unwrap();
        assert!((pi.value - 0.99064).abs() < 1e-5);
    }

    #[test]
    fn quadrature_agrees_with_engine() {
        let cfg = QmcConfig::default();
        for c in [-0.08, 0.15, 0.6] {
            let s = SymScenario::new(10, 4, 6, 2.0, c).unwrap();
            for minus in 0..=2 {
                for lambda in [0.3, 1.0, 2.2] {
                    for (a, b) in [
                        (s.prob_s(minus, lambda, SymMethod::Auto, &cfg), s.prob_s(minus, lambda, SymMethod::Engine, &cfg)),
                        (s.prob_i(minus, lambda, SymMethod::Auto, &cfg), s.prob_i(minus, lambda, SymMethod::Engine, &cfg)),
                    ] {
                        let (a, b) = (a.unwrap(), b.unwrap());
                        let se = libm::sqrt(a.std_error.powi(2) + b.std_error.powi(2));
                        assert!((a.value - b.value).abs() <= 4.0 * se + 1e-9, "c {c} m {minus} l {lambda}: {a:?} {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn lemma3_threshold_value() {
        let t = lemma3_threshold(10, 2.0).unwrap();
        assert!((t + 22.763).abs() < 0.05, "{t}");
        let at_beta = lemma3_condition(10, 2.0, 2.0);
        assert!((at_beta.rhs - 2.0 * pdf(0.0)).abs() < 1e-12);
    }

    #[test]
    fn theorem3_region() {
        let r = theorem3_regions(10, 4, 6, 2.0, -5.0, 3.0, 0.01).unwrap();
        assert_eq!(r.len(), 1, "{r:?}");
        assert!((r[0].0 + 0.988).abs() < 0.01 && (r[0].1 - 0.640).abs() < 0.01, "{r:?}");
        assert!(matches!(theorem3_condition(10, 1, 6, 2.0, 1.0), Err(Error::DegenerateK)));
    }
}
