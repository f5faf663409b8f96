//! Exact-design sign-recovery probabilities.
//!
//! For a support `A`, sign vector `z` and penalty `λ` the lasso recovers `z`
//! exactly when two independent events hold:
//!
//! * `S`: `u ≤ √n Z V_A^{1/2} β_A` with `u ~ N(λ√n Z C_A⁻¹ z, Z C_A⁻¹ Z)`;
//! * `I`: `|v| ≤ λ√n` with `v ~ N(λ√n C_IA C_A⁻¹ z, C_I − C_IA C_A⁻¹ C_AI)`.
//!
//! Fixed-λ criteria multiply the two box probabilities. Support and sign
//! averages, and the λ summaries (maximum and integral over `log λ`), are built
//! on top. Every (support, sign) pair draws its lattice shifts from a seed that
//! depends only on the pair's indices, so curves over λ use common random
//! numbers and are smooth in λ.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::design::StandardizedDesign;
use crate::error::{Error, Result};
use crate::mvn::normal::{cdf, interval};
use crate::mvn::{box_probability, GaussianRegion, ProbabilityEstimate, QmcConfig};
use crate::optimize::brent_max;
use crate::par::map_indexed;
use crate::rng::{derive_seed, TAG_INACTIVE_EVENT, TAG_SIGN_EVENT};

/// Event probabilities whose marginal upper bound is below this are reported
/// as exactly zero instead of integrated.
const NEGLIGIBLE: f64 = 1e-15;

/// Largest support size whose `2^k` sign vectors are enumerated.
pub const MAX_ENUMERATED_K: usize = 12;

/// The model hypothesis a criterion conditions on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub support: Vec<usize>,
    /// `|β_A|`, on the original (unscaled) design scale.
    pub magnitudes: Vec<f64>,
    pub signs: Vec<i8>,
    pub lambda: f64,
}

impl Scenario {
    pub fn new(support: Vec<usize>, magnitudes: Vec<f64>, signs: Vec<i8>, lambda: f64) -> Result<Self> {
        let s = Self {
            support,
            magnitudes,
            signs,
            lambda,
        };
        s.validate()?;
        Ok(s)
    }

    /// Equal magnitudes `beta` and all-positive signs.
    pub fn uniform(support: Vec<usize>, beta: f64, lambda: f64) -> Result<Self> {
        let k = support.len();
        Self::new(support, vec![beta; k], vec![1; k], lambda)
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.support.len();
        if k == 0 {
            return Err(Error::InvalidConfig("support must be nonempty".into()));
        }
        for found in [self.magnitudes.len(), self.signs.len()] {
            if found != k {
                return Err(Error::DimensionMismatch { expected: k, found });
            }
        }
        if self.magnitudes.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidConfig("magnitudes must be positive and finite".into()));
        }
        if self.signs.iter().any(|&z| z != 1 && z != -1) {
            return Err(Error::InvalidConfig("signs must be +1 or -1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be positive and finite".into()));
        }
        Ok(())
    }

    /// `β_A = z_A ∘ |β_A|`.
    pub fn signed_beta(&self) -> Vec<f64> {
        signed(&self.magnitudes, &self.signs)
    }
}

fn signed(magnitudes: &[f64], signs: &[i8]) -> Vec<f64> {
    magnitudes.iter().zip(signs).map(|(&b, &z)| b * z as f64).collect()
}

/// Which sign vectors a criterion averages over.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SignVectorSet {
    /// The single vector `z_A = 1`.
    #[default]
    Known,
    /// One representative (first entry `+1`) of each of the `2^{k-1}`
    /// reflection classes.
    AllHalf,
    Custom(Vec<Vec<i8>>),
}

impl SignVectorSet {
    pub fn vectors(&self, k: usize) -> Result<Vec<Vec<i8>>> {
        match self {
            Self::Known => Ok(vec![vec![1; k]]),
            Self::AllHalf => reflection_representatives(k),
            Self::Custom(list) => {
                if list.is_empty() {
                    return Err(Error::EmptySignSet);
                }
                for (i, z) in list.iter().enumerate() {
                    if z.len() != k {
                        return Err(Error::DimensionMismatch {
                            expected: k,
                            found: z.len(),
                        });
                    }
                    if z.iter().any(|&s| s != 1 && s != -1) {
                        return Err(Error::InvalidConfig("signs must be +1 or -1".into()));
                    }
                    let neg: Vec<i8> = z.iter().map(|s| -s).collect();
                    if list[..i].iter().any(|w| *w == neg || w == z) {
                        return Err(Error::InvalidConfig(
                            "custom sign list repeats a vector or its reflection".into(),
                        ));
                    }
                }
                Ok(list.clone())
            }
        }
    }
}

/// Sign vectors with a leading `+1`, one per reflection pair `{z, −z}`.
pub fn reflection_representatives(k: usize) -> Result<Vec<Vec<i8>>> {
    if k == 0 {
        return Err(Error::EmptySignSet);
    }
    if k > 20 {
        return Err(Error::TooManySigns { k });
    }
    Ok((0..1usize << (k - 1))
        .map(|bits| {
            (0..k)
                .map(|i| if i > 0 && bits >> (i - 1) & 1 == 1 { -1 } else { 1 })
                .collect()
        })
        .collect())
}

/// Supports of a fixed size `k` over which Φ criteria average.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupportSet {
    pub k: usize,
    pub supports: Vec<Vec<usize>>,
}

impl SupportSet {
    /// All `binom(p, k)` supports in lexicographic order.
    pub fn exhaustive(p: usize, k: usize) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::EmptySupportSet);
        }
        let mut supports = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            supports.push(idx.clone());
            let mut i = k;
            while i > 0 && idx[i - 1] == p - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        Ok(Self { k, supports })
    }

    /// Validates an explicit list; each support is sorted.
    pub fn explicit(p: usize, k: usize, list: Vec<Vec<usize>>) -> Result<Self> {
        if list.is_empty() {
            return Err(Error::EmptySupportSet);
        }
        let mut supports: Vec<Vec<usize>> = Vec::with_capacity(list.len());
        for mut s in list {
            s.sort_unstable();
            if s.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: s.len(),
                });
            }
            if s.windows(2).any(|w| w[0] == w[1]) || s.last().is_some_and(|&j| j >= p) {
                return Err(Error::InvalidConfig("support indices must be distinct and < p".into()));
            }
            if supports.contains(&s) {
                return Err(Error::InvalidConfig("duplicate support".into()));
            }
            supports.push(s);
        }
        Ok(Self { k, supports })
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }
}

/// A criterion value with its component event probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriterionValue {
    pub value: f64,
    /// `P(S)`; for averages, the mean over the averaged terms.
    pub p_s: Option<f64>,
    pub p_i: Option<f64>,
    pub std_error: f64,
    pub lambda_at: Option<f64>,
    /// Supports scored 0 because `C_A` is singular or touches a constant column.
    pub singular_supports: usize,
}

impl CriterionValue {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            p_s: Some(0.0),
            p_i: Some(0.0),
            std_error: 0.0,
            lambda_at: None,
            singular_supports: 0,
        }
    }

    fn product(s: ProbabilityEstimate, i: ProbabilityEstimate, lambda: f64) -> Self {
        let se = libm::sqrt((i.value * s.std_error).powi(2) + (s.value * i.std_error).powi(2));
        Self {
            value: s.value * i.value,
            p_s: Some(s.value),
            p_i: Some(i.value),
            std_error: se,
            lambda_at: Some(lambda),
            singular_supports: 0,
        }
    }

    /// Mean of independent terms.
    fn mean(terms: &[CriterionValue], lambda: Option<f64>) -> Self {
        let m = terms.len().max(1) as f64;
        let avg = |f: &dyn Fn(&CriterionValue) -> f64| terms.iter().map(f).sum::<f64>() / m;
        let components = terms.iter().all(|t| t.p_s.is_some() && t.p_i.is_some());
        Self {
            value: avg(&|t| t.value),
            p_s: components.then(|| avg(&|t| t.p_s.unwrap_or(0.0))),
            p_i: components.then(|| avg(&|t| t.p_i.unwrap_or(0.0))),
            std_error: libm::sqrt(terms.iter().map(|t| t.std_error * t.std_error).sum::<f64>()) / m,
            lambda_at: lambda,
            singular_supports: terms.iter().map(|t| t.singular_supports).sum(),
        }
    }
}

/// Per-support quantities shared by every sign vector and λ.
#[derive(Debug, Clone)]
pub struct SupportModel {
    sqrt_n: f64,
    c_a_inv: DMatrix<f64>,
    v_sqrt: Vec<f64>,
    /// `C_IA C_A⁻¹` restricted to non-constant inactive columns.
    h: DMatrix<f64>,
    i_cov: DMatrix<f64>,
}

impl SupportModel {
    pub fn new(std: &StandardizedDesign, support: &[usize]) -> Result<Self> {
        let views = std.submatrix_views(support)?;
        let live: Vec<usize> = (0..views.inactive.len())
            .filter(|&i| !std.is_degenerate(views.inactive[i]))
            .collect();
        let k = support.len();
        let c_ia = DMatrix::from_fn(live.len(), k, |i, a| views.c_ia[(live[i], a)]);
        let c_i = DMatrix::from_fn(live.len(), live.len(), |i, j| views.c_i[(live[i], live[j])]);
        let h = &c_ia * &views.c_a_inv;
        let i_cov = c_i - &h * c_ia.transpose();
        let i_cov = (&i_cov + i_cov.transpose()) * 0.5;
        Ok(Self {
            sqrt_n: libm::sqrt(std.n as f64),
            c_a_inv: views.c_a_inv,
            v_sqrt: views.v_a.iter().map(|&v| libm::sqrt(v)).collect(),
            h,
            i_cov,
        })
    }

    pub fn k(&self) -> usize {
        self.v_sqrt.len()
    }

    /// Number of non-constant inactive columns.
    pub fn q(&self) -> usize {
        self.h.nrows()
    }

    /// Region of the `S` event when the estimate is checked against signs `z`
    /// and the true effects are `beta` (signed, original scale).
    pub fn sign_region(&self, beta: &[f64], z: &[i8], lambda: f64) -> Result<GaussianRegion> {
        let k = self.k();
        if beta.len() != k || z.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: if beta.len() != k { beta.len() } else { z.len() },
            });
        }
        let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
        let cz = &self.c_a_inv * nalgebra::DVector::from_column_slice(&zf);
        let scale = lambda * self.sqrt_n;
        let mean = (0..k).map(|i| scale * zf[i] * cz[i]).collect();
        let cov = DMatrix::from_fn(k, k, |i, j| zf[i] * zf[j] * self.c_a_inv[(i, j)]);
        let upper = (0..k).map(|i| self.sqrt_n * self.v_sqrt[i] * zf[i] * beta[i]).collect();
        GaussianRegion::new(mean, cov, vec![f64::NEG_INFINITY; k], upper)
    }

    /// Region of the `I` event for signs `z`; `None` when no inactive column varies.
    pub fn inactive_region(&self, z: &[i8], lambda: f64) -> Result<Option<GaussianRegion>> {
        let q = self.q();
        if q == 0 {
            return Ok(None);
        }
        let zf: Vec<f64> = z.iter().map(|&s| s as f64).collect();
        let scale = lambda * self.sqrt_n;
        let mean = (&self.h * nalgebra::DVector::from_column_slice(&zf)) * scale;
        GaussianRegion::new(
            mean.iter().copied().collect(),
            self.i_cov.clone(),
            vec![-scale; q],
            vec![scale; q],
        )
        .map(Some)
    }

    pub fn prob_s(&self, beta: &[f64], z: &[i8], lambda: f64, config: &QmcConfig) -> Result<ProbabilityEstimate> {
        let region = self.sign_region(beta, z, lambda)?;
        estimate_or_skip(&region, config)
    }

    pub fn prob_i(&self, z: &[i8], lambda: f64, config: &QmcConfig) -> Result<ProbabilityEstimate> {
        match self.inactive_region(z, lambda)? {
            None => Ok(ProbabilityEstimate::exact(1.0, 0)),
            Some(region) => estimate_or_skip(&region, config),
        }
    }

    /// `P(S) · P(I)`, each event on its own derived stream of `config.seed`.
    pub fn phi(&self, beta: &[f64], z: &[i8], lambda: f64, config: &QmcConfig) -> Result<CriterionValue> {
        let s = self.prob_s(beta, z, lambda, &event_config(config, TAG_SIGN_EVENT))?;
        let i = self.prob_i(z, lambda, &event_config(config, TAG_INACTIVE_EVENT))?;
        Ok(CriterionValue::product(s, i, lambda))
    }
}

fn event_config(config: &QmcConfig, tag: u64) -> QmcConfig {
    QmcConfig {
        seed: derive_seed(config.seed, &[tag]),
        ..*config
    }
}

/// The smallest marginal probability bounds the joint one.
fn marginal_bound(region: &GaussianRegion) -> f64 {
    (0..region.dim())
        .map(|i| {
            let sd = libm::sqrt(region.covariance[(i, i)].max(0.0));
            let (l, u) = (region.lower[i] - region.mean[i], region.upper[i] - region.mean[i]);
            if sd == 0.0 {
                if l <= 0.0 && 0.0 <= u { 1.0 } else { 0.0 }
            } else if l == f64::NEG_INFINITY {
                cdf(u / sd)
            } else {
                interval(l / sd, u / sd)
            }
        })
        .fold(1.0, f64::min)
}

fn estimate_or_skip(region: &GaussianRegion, config: &QmcConfig) -> Result<ProbabilityEstimate> {
    if marginal_bound(region) <= NEGLIGIBLE {
        config.validate()?;
        return Ok(ProbabilityEstimate::exact(0.0, 0));
    }
    box_probability(region, config)
}

/// `P(S_λ)` for the scenario's support, signs and magnitudes.
pub fn prob_s(std: &StandardizedDesign, scenario: &Scenario, config: &QmcConfig) -> Result<ProbabilityEstimate> {
    scenario.validate()?;
    SupportModel::new(std, &scenario.support)?.prob_s(&scenario.signed_beta(), &scenario.signs, scenario.lambda, config)
}

/// `P(I_λ)`; depends on the effects only through their signs.
pub fn prob_i(
    std: &StandardizedDesign,
    support: &[usize],
    signs: &[i8],
    lambda: f64,
    config: &QmcConfig,
) -> Result<ProbabilityEstimate> {
    SupportModel::new(std, support)?.prob_i(signs, lambda, config)
}

/// `φ_λ = P(S_λ) · P(I_λ)`.
pub fn phi_lambda(std: &StandardizedDesign, scenario: &Scenario, config: &QmcConfig) -> Result<CriterionValue> {
    scenario.validate()?;
    SupportModel::new(std, &scenario.support)?.phi(&scenario.signed_beta(), &scenario.signs, scenario.lambda, config)
}

/// `φ_λ^±`: the mean of `φ_λ` over sign vectors of one support.
pub fn phi_lambda_pm(
    std: &StandardizedDesign,
    support: &[usize],
    magnitudes: &[f64],
    lambda: f64,
    signs: &SignVectorSet,
    config: &QmcConfig,
) -> Result<CriterionValue> {
    let model = SupportModel::new(std, support)?;
    let vectors = signs.vectors(support.len())?;
    let terms = map_indexed(vectors.len(), |zi| {
        let cfg = QmcConfig {
            seed: derive_seed(config.seed, &[0, zi as u64]),
            ..*config
        };
        model.phi(&signed(magnitudes, &vectors[zi]), &vectors[zi], lambda, &cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CriterionValue::mean(&terms, Some(lambda)))
}

/// Probability that the lasso selects exactly the true support, with any signs.
pub fn support_recovery_prob(
    std: &StandardizedDesign,
    scenario: &Scenario,
    config: &QmcConfig,
) -> Result<CriterionValue> {
    scenario.validate()?;
    let k = scenario.k();
    if k > MAX_ENUMERATED_K {
        return Err(Error::TooManySigns { k });
    }
    let model = SupportModel::new(std, &scenario.support)?;
    let beta = scenario.signed_beta();
    let terms = map_indexed(1usize << k, |bits| {
        let z: Vec<i8> = (0..k).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect();
        let cfg = QmcConfig {
            seed: derive_seed(config.seed, &[bits as u64]),
            ..*config
        };
        model.phi(&beta, &z, scenario.lambda, &cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let se = libm::sqrt(terms.iter().map(|t| t.std_error * t.std_error).sum::<f64>());
    Ok(CriterionValue {
        value: terms.iter().map(|t| t.value).sum::<f64>().min(1.0),
        p_s: None,
        p_i: None,
        std_error: se,
        lambda_at: Some(scenario.lambda),
        singular_supports: 0,
    })
}

/// `Φ_λ` (known sign) or `Φ_λ^±`: `φ` averaged over supports and sign vectors.
///
/// Per-support blocks are factored once, so evaluating many λ is cheap
/// relative to rebuilding.
#[derive(Debug, Clone)]
pub struct PhiCriterion {
    models: Vec<Option<SupportModel>>,
    signs: Vec<Vec<i8>>,
    beta: f64,
    config: QmcConfig,
    singular: usize,
}

impl PhiCriterion {
    pub fn new(
        std: &StandardizedDesign,
        supports: &SupportSet,
        signs: &SignVectorSet,
        beta: f64,
        config: QmcConfig,
    ) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::EmptySupportSet);
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be positive and finite".into()));
        }
        config.validate()?;
        let models = map_indexed(supports.len(), |i| match SupportModel::new(std, &supports.supports[i]) {
            Ok(m) => Ok(Some(m)),
            Err(Error::SingularCA { .. } | Error::DegenerateSupport { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let singular = models.iter().filter(|m| m.is_none()).count();
        Ok(Self {
            models,
            signs: signs.vectors(supports.k)?,
            beta,
            config,
            singular,
        })
    }

    pub fn singular_supports(&self) -> usize {
        self.singular
    }

    pub fn evaluations_per_lambda(&self) -> usize {
        self.models.len() * self.signs.len()
    }

    pub fn at(&self, lambda: f64) -> Result<CriterionValue> {
        let ns = self.signs.len();
        let terms = map_indexed(self.models.len() * ns, |t| {
            let (si, zi) = (t / ns, t % ns);
            match &self.models[si] {
                None => Ok(CriterionValue {
                    singular_supports: usize::from(zi == 0),
                    ..CriterionValue::zero()
                }),
                Some(model) => {
                    let z = &self.signs[zi];
                    let beta: Vec<f64> = z.iter().map(|&s| self.beta * s as f64).collect();
                    let cfg = QmcConfig {
                        seed: derive_seed(self.config.seed, &[si as u64, zi as u64]),
                        ..self.config
                    };
                    model.phi(&beta, z, lambda, &cfg)
                }
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(CriterionValue::mean(&terms, Some(lambda)))
    }
}

/// Convenience wrapper: `Φ_λ` / `Φ_λ^±` at one λ.
pub fn phi_support_average(
    std: &StandardizedDesign,
    beta: f64,
    lambda: f64,
    supports: &SupportSet,
    signs: &SignVectorSet,
    config: &QmcConfig,
) -> Result<CriterionValue> {
    PhiCriterion::new(std, supports, signs, beta, *config)?.at(lambda)
}

/// One evaluated point of a criterion curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub log_lambda: f64,
    pub value: CriterionValue,
}

/// A λ summary with every criterion evaluation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSummary {
    pub result: CriterionValue,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaxConfig {
    pub log_lambda_lower: f64,
    pub log_lambda_upper: f64,
    pub grid_points: usize,
    /// Absolute tolerance in `log λ` for the local refinement.
    pub tolerance: f64,
}

impl Default for MaxConfig {
    fn default() -> Self {
        Self {
            log_lambda_lower: -5.0,
            log_lambda_upper: 2.0,
            grid_points: 36,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegralConfig {
    pub log_lambda_lower: f64,
    pub step: f64,
    pub epsilon: f64,
    /// The sum never extends past this `log λ`.
    pub log_lambda_cap: f64,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        Self {
            log_lambda_lower: -5.0,
            step: 0.02,
            epsilon: 1e-6,
            log_lambda_cap: 5.0,
        }
    }
}

/// How a fixed-λ criterion is reduced to a single number.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Summary {
    Fixed { lambda: f64 },
    Max(MaxConfig),
    Integral(IntegralConfig),
}

impl Summary {
    pub fn apply<F>(&self, mut criterion: F) -> Result<LambdaSummary>
    where
        F: FnMut(f64) -> Result<CriterionValue>,
    {
        match self {
            Summary::Fixed { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::InvalidConfig("lambda must be positive".into()));
                }
                let value = criterion(*lambda)?;
                Ok(LambdaSummary {
                    result: value,
                    curve: vec![CurvePoint {
                        log_lambda: libm::log(*lambda),
                        value,
                    }],
                })
            }
            Summary::Max(cfg) => phi_max(criterion, cfg),
            Summary::Integral(cfg) => phi_integral(criterion, cfg),
        }
    }
}

/// Maximum of a fixed-λ criterion over `log λ`: grid warm start, then Brent.
pub fn phi_max<F>(mut criterion: F, config: &MaxConfig) -> Result<LambdaSummary>
where
    F: FnMut(f64) -> Result<CriterionValue>,
{
    let (lo, hi) = (config.log_lambda_lower, config.log_lambda_upper);
    if !(lo < hi) || config.grid_points < 8 {
        return Err(Error::InvalidConfig("need lower < upper and grid_points >= 8".into()));
    }
    let h = (hi - lo) / (config.grid_points - 1) as f64;
    let mut curve = Vec::with_capacity(config.grid_points + 32);
    for i in 0..config.grid_points {
        let w = lo + h * i as f64;
        curve.push(CurvePoint {
            log_lambda: w,
            value: criterion(libm::exp(w))?,
        });
    }
    let best = (0..curve.len())
        .fold(0, |b, i| if curve[i].value.value > curve[b].value.value { i } else { b });
    if curve[best].value.value > 0.0 {
        let a = lo + h * best.saturating_sub(1) as f64;
        let b = (lo + h * (best + 1) as f64).min(hi);
        let start = curve[best].log_lambda;
        let mut failure = None;
        brent_max(
            |w| match criterion(libm::exp(w)) {
                Ok(v) => {
                    curve.push(CurvePoint { log_lambda: w, value: v });
                    v.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            a,
            b,
            start,
            config.tolerance,
        );
        if let Some(e) = failure {
            return Err(e);
        }
    }
    let top = curve
        .iter()
        .fold(&curve[best], |b, p| if p.value.value > b.value.value { p } else { b });
    let result = CriterionValue {
        lambda_at: Some(libm::exp(top.log_lambda)),
        ..top.value
    };
    curve.sort_by(|a, b| a.log_lambda.total_cmp(&b.log_lambda));
    Ok(LambdaSummary { result, curve })
}

/// Left Riemann sum of a criterion over `log λ`, stopping at the first value
/// below `epsilon` once at least one value has been accepted.
pub fn phi_integral<F>(mut criterion: F, config: &IntegralConfig) -> Result<LambdaSummary>
where
    F: FnMut(f64) -> Result<CriterionValue>,
{
    if !(config.step > 0.0) {
        return Err(Error::NonPositiveStep);
    }
    if !(config.epsilon >= 0.0) {
        return Err(Error::InvalidConfig("epsilon must be nonnegative".into()));
    }
    let mut curve = Vec::new();
    let (mut sum, mut se_sum) = (0.0, 0.0);
    let mut accepted = false;
    let mut singular = 0;
    let mut i = 0usize;
    loop {
        let w = config.log_lambda_lower + config.step * i as f64;
        if w > config.log_lambda_cap + 1e-12 {
            break;
        }
        let v = criterion(libm::exp(w))?;
        singular = singular.max(v.singular_supports);
        curve.push(CurvePoint { log_lambda: w, value: v });
        if v.value >= config.epsilon {
            accepted = true;
            sum += v.value;
            // common random numbers across λ: errors add, not in quadrature
            se_sum += v.std_error;
        } else if accepted {
            break;
        }
        i += 1;
    }
    Ok(LambdaSummary {
        result: CriterionValue {
            value: sum * config.step,
            p_s: None,
            p_i: None,
            std_error: se_sum * config.step,
            lambda_at: None,
            singular_supports: singular,
        },
        curve,
    })
}

/// Both λ summaries from a single pass: the [`phi_integral`] curve, and its
/// best point refined by Brent's method on the two neighbouring steps.
pub fn phi_max_and_integral<F>(
    mut criterion: F,
    config: &IntegralConfig,
    tolerance: f64,
) -> Result<(LambdaSummary, CriterionValue)>
where
    F: FnMut(f64) -> Result<CriterionValue>,
{
    let integral = phi_integral(&mut criterion, config)?;
    let top = integral
        .curve
        .iter()
        .fold(&integral.curve[0], |b, p| if p.value.value > b.value.value { p } else { b });
    let mut best = CriterionValue {
        lambda_at: Some(libm::exp(top.log_lambda)),
        ..top.value
    };
    if best.value > 0.0 {
        let w = top.log_lambda;
        let mut failure = None;
        brent_max(
            |x| match criterion(libm::exp(x)) {
                Ok(v) => {
                    if v.value > best.value {
                        best = CriterionValue {
                            lambda_at: Some(libm::exp(x)),
                            ..v
                        };
                    }
                    v.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            w - config.step,
            w + config.step,
            w,
            tolerance,
        );
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok((integral, best))
}
