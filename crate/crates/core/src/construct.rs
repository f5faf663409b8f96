//! Design construction: coordinate exchange for UE(s²) and Var(s+), the
//! two-block active-column construction, constant-column padding, nearly
//! balanced support subsampling, and the heuristic-initiated sieve that
//! re-ranks heuristic-optimal pools by a sign-recovery criterion.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;

use crate::design::{Design, HeuristicSummary, RawSums, StandardizedDesign};
use crate::error::{Error, Result};
use crate::mvn::QmcConfig;
use crate::par::map_indexed;
use crate::recovery::{phi_max_and_integral, CriterionValue, IntegralConfig, PhiCriterion, SignVectorSet, Summary, SupportSet};
use crate::rng::{derive_seed, rng_from_seed};

const TAG_UE2: u64 = 0x11;
const TAG_VARS: u64 = 0x12;
const TAG_FLOORS: u64 = 0x13;
const TAG_NBIBD: u64 = 0x14;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExchangeConfig {
    pub starts: usize,
    pub max_passes: usize,
    pub seed: u64,
    pub ue2_efficiency_floor: Option<f64>,
    pub ue_s_floor: Option<f64>,
    pub ue2_reference: Option<f64>,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            starts: 50,
            max_passes: 100,
            seed: 0,
            ue2_efficiency_floor: None,
            ue_s_floor: None,
            ue2_reference: None,
        }
    }
}

impl ExchangeConfig {
    fn validate(&self, n: usize, p: usize) -> Result<()> {
        if n < 2 || p < 1 {
            return Err(Error::InvalidConfig("need n >= 2 and p >= 1".into()));
        }
        if self.starts == 0 || self.max_passes == 0 {
            return Err(Error::InvalidConfig("starts and max_passes must be positive".into()));
        }
        if let Some(f) = self.ue2_efficiency_floor {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig("efficiency floor must lie in (0, 1]".into()));
            }
        }
        if let Some(r) = self.ue2_reference {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidConfig("ue2 reference must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One exchange start: the final design and the objective after every
/// accepted flip (the first entry is the starting value of the descent).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExchangeRun {
    pub start: usize,
    pub design: Design,
    pub heuristics: HeuristicSummary,
    pub trace: Vec<f64>,
}

/// `S = LᵀL` for `L = [1 | X]`, with running sums over the off-diagonal
/// pairs, updated in `O(p)` per flip.
struct Tracker {
    design: Design,
    s: Vec<i64>,
    sum: i64,
    sum_sq: i64,
}

impl Tracker {
    fn new(design: Design) -> Self {
        let p = design.p();
        let (xtx, sums) = design.inner_products();
        let w = p + 1;
        let mut s = vec![0i64; w * w];
        for j in 0..p {
            s[j + 1] = sums[j];
            s[(j + 1) * w] = sums[j];
            for m in 0..p {
                s[(j + 1) * w + m + 1] = xtx[j * p + m];
            }
        }
        let raw = RawSums::from_products(p, &xtx, &sums);
        Self {
            design,
            s,
            sum: raw.sum,
            sum_sq: raw.sum_sq,
        }
    }

    fn pairs(&self) -> i64 {
        let p = self.design.p() as i64;
        p * (p + 1) / 2
    }

    fn row_entry(&self, r: usize, m: usize) -> i64 {
        if m == 0 { 1 } else { self.design.get(r, m - 1) as i64 }
    }

    /// `(sum, sum_sq)` after flipping cell `(r, j)`.
    fn after_flip(&self, r: usize, j: usize) -> (i64, i64) {
        let w = self.design.p() + 1;
        let col = j + 1;
        let x = self.design.get(r, j) as i64;
        let (mut sum, mut sum_sq) = (self.sum, self.sum_sq);
        for m in 0..w {
            if m == col {
                continue;
            }
            let d = -2 * x * self.row_entry(r, m);
            let old = self.s[col * w + m];
            sum += d;
            sum_sq += 2 * old * d + d * d;
        }
        (sum, sum_sq)
    }

    fn flip(&mut self, r: usize, j: usize) {
        let w = self.design.p() + 1;
        let col = j + 1;
        let x = self.design.get(r, j) as i64;
        for m in 0..w {
            if m == col {
                continue;
            }
            let d = -2 * x * self.row_entry(r, m);
            let old = self.s[col * w + m];
            self.sum += d;
            self.sum_sq += 2 * old * d + d * d;
            self.s[col * w + m] = old + d;
            self.s[m * w + col] = old + d;
        }
        self.design.flip(r, j);
    }

    fn heuristics(&self) -> HeuristicSummary {
        self.design.heuristics()
    }

    /// First-improvement sweeps in row-major cell order. A flip is taken when
    /// it strictly lowers `key` and keeps `admissible`; stops after a pass
    /// without a flip or `max_passes`.
    fn descend<K, A>(&mut self, max_passes: usize, key: K, admissible: A, trace: &mut Vec<f64>, scale: f64)
    where
        K: Fn(i64, i64) -> i64,
        A: Fn(i64, i64) -> bool,
    {
        let (n, p) = (self.design.n(), self.design.p());
        let mut current = key(self.sum, self.sum_sq);
        trace.push(current as f64 * scale);
        for _ in 0..max_passes {
            let mut improved = false;
            for r in 0..n {
                for j in 0..p {
                    let (s, q) = self.after_flip(r, j);
                    let k = key(s, q);
                    if k < current && admissible(s, q) {
                        self.flip(r, j);
                        current = k;
                        trace.push(current as f64 * scale);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
}

fn random_design(n: usize, p: usize, seed: u64) -> Design {
    let mut rng = rng_from_seed(seed);
    let x = (0..n * p).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    Design::new(n, p, x).expect("entries are +-1")
}

fn ue2_run(n: usize, p: usize, start: usize, seed: u64, max_passes: usize) -> ExchangeRun {
    let mut t = Tracker::new(random_design(n, p, derive_seed(seed, &[TAG_UE2, start as u64])));
    let mut trace = Vec::new();
    let scale = 1.0 / t.pairs() as f64;
    t.descend(max_passes, |_, q| q, |_, _| true, &mut trace, scale);
    ExchangeRun {
        start,
        heuristics: t.heuristics(),
        design: t.design,
        trace,
    }
}

/// Every start of the UE(s²) coordinate exchange, in start order.
pub fn exchange_ue2_runs(n: usize, p: usize, config: &ExchangeConfig) -> Result<Vec<ExchangeRun>> {
    config.validate(n, p)?;
    Ok(map_indexed(config.starts, |i| ue2_run(n, p, i, config.seed, config.max_passes)))
}

/// The best UE(s²) design over `config.starts` random starts.
pub fn exchange_ue2(n: usize, p: usize, config: &ExchangeConfig) -> Result<ExchangeRun> {
    let runs = exchange_ue2_runs(n, p, config)?;
    Ok(best_by(runs, |r| r.heuristics.ue_s2))
}

fn best_by<F: Fn(&ExchangeRun) -> f64>(runs: Vec<ExchangeRun>, key: F) -> ExchangeRun {
    let mut best = 0;
    for i in 1..runs.len() {
        if key(&runs[i]) < key(&runs[best]) {
            best = i;
        }
    }
    runs.into_iter().nth(best).expect("at least one run")
}

/// Var(s+) side constraints as integer thresholds on the pair sums.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Floors {
    max_sum_sq: Option<i64>,
    min_sum: Option<i64>,
}

impl Floors {
    fn new(pairs: i64, reference: Option<f64>, efficiency: Option<f64>, ue_s: Option<f64>) -> Self {
        let pf = pairs as f64;
        let max_sum_sq = efficiency.map(|f| {
            let r = reference.expect("reference resolved before floors");
            let ok = |m: i64| m <= 0 || r / (m as f64 / pf) >= f;
            let mut m = libm::floor(r * pf / f) as i64;
            while !ok(m) {
                m -= 1;
            }
            while ok(m + 1) {
                m += 1;
            }
            m
        });
        let min_sum = ue_s.map(|f| {
            let ok = |s: i64| s as f64 / pf > f;
            let mut s = libm::floor(f * pf) as i64 + 1;
            while ok(s - 1) {
                s -= 1;
            }
            while !ok(s) {
                s += 1;
            }
            s
        });
        Self { max_sum_sq, min_sum }
    }

    fn violation(&self, sum: i64, sum_sq: i64) -> i64 {
        self.max_sum_sq.map_or(0, |m| (sum_sq - m).max(0)) + self.min_sum.map_or(0, |m| (m - sum).max(0))
    }
}

/// `P·Σs² − (Σs)²`, which orders designs exactly as Var(s) does.
fn var_key(pairs: i64) -> impl Fn(i64, i64) -> i64 {
    move |s, q| pairs * q - s * s
}

#[allow(clippy::too_many_arguments)]
fn vars_plus_run(
    n: usize,
    p: usize,
    start: usize,
    seed: u64,
    max_passes: usize,
    reference: Option<f64>,
    efficiency: Option<f64>,
    ue_s: Option<f64>,
) -> Option<ExchangeRun> {
    let mut t = Tracker::new(random_design(n, p, derive_seed(seed, &[TAG_VARS, start as u64])));
    let pairs = t.pairs();
    let floors = Floors::new(pairs, reference, efficiency, ue_s);
    let mut repair = Vec::new();
    if floors.violation(t.sum, t.sum_sq) > 0 {
        t.descend(max_passes, |s, q| floors.violation(s, q), |_, _| true, &mut repair, 1.0);
        if floors.violation(t.sum, t.sum_sq) > 0 {
            return None;
        }
    }
    let mut trace = Vec::new();
    let scale = 1.0 / (pairs * pairs) as f64;
    t.descend(max_passes, var_key(pairs), |s, q| floors.violation(s, q) == 0, &mut trace, scale);
    let mut heuristics = t.heuristics();
    if let Some(r) = reference {
        heuristics = heuristics.with_efficiency(r);
    }
    Some(ExchangeRun {
        start,
        heuristics,
        design: t.design,
        trace,
    })
}

/// Resolves the UE(s²) reference: the supplied value, or the best value from
/// a UE(s²) exchange with the same starts and seed.
pub fn resolve_ue2_reference(n: usize, p: usize, config: &ExchangeConfig) -> Result<f64> {
    match config.ue2_reference {
        Some(r) => Ok(r),
        None => {
            let best = exchange_ue2(n, p, config)?.heuristics.ue_s2;
            if best > 0.0 {
                Ok(best)
            } else {
                Err(Error::ZeroUe2)
            }
        }
    }
}

/// Coordinate exchange on Var(s) under the efficiency and UE(s) floors.
/// Starts violating a floor are first repaired by descending the total
/// violation; starts that stay infeasible are dropped.
pub fn exchange_vars_plus(n: usize, p: usize, config: &ExchangeConfig) -> Result<ExchangeRun> {
    config.validate(n, p)?;
    let reference = match config.ue2_efficiency_floor {
        Some(_) => Some(resolve_ue2_reference(n, p, config)?),
        None => config.ue2_reference,
    };
    let runs: Vec<ExchangeRun> = map_indexed(config.starts, |i| {
        vars_plus_run(
            n,
            p,
            i,
            config.seed,
            config.max_passes,
            reference,
            config.ue2_efficiency_floor,
            config.ue_s_floor,
        )
    })
    .into_iter()
    .flatten()
    .collect();
    if runs.is_empty() {
        return Err(Error::InfeasibleConstraints);
    }
    Ok(best_by(runs, |r| r.heuristics.var_s))
}

/// Active columns from the two-block matrix `[[2I − J, −J], [J, J − 2I]]`
/// (blocks of size `n/2`): the first `k1` columns of the left block column
/// and the first `k − k1` of the right.
pub fn block_construction(n: usize, k: usize, k1: usize) -> Result<Design> {
    if n % 2 == 1 {
        return Err(Error::OddN { n });
    }
    if n < 6 {
        return Err(Error::InvalidConfig("block construction needs n >= 6".into()));
    }
    let h = n / 2;
    if k == 0 || k > n - 1 || k1 > k || k1 > h || k - k1 > h {
        return Err(Error::ColumnBudget(alloc::format!(
            "k = {k}, k1 = {k1} with n = {n}: need 1 <= k <= n - 1 and k1, k - k1 <= n/2"
        )));
    }
    let columns: Vec<Vec<i8>> = (0..k)
        .map(|c| {
            (0..n)
                .map(|r| {
                    if c < k1 {
                        if r >= h || r == c { 1 } else { -1 }
                    } else {
                        let j = c - k1;
                        if r < h || r == h + j { -1 } else { 1 }
                    }
                })
                .collect()
        })
        .collect();
    Design::from_columns(&columns)
}

/// `(ξ₁, ξ₂)` with `C_A⁻¹ 1` equal to `ξ₁` on the first `k1` block columns and
/// `ξ₂` on the rest:
/// `ξ₁ = k̃₂(n² − 4) / ((n − 2)²(k₁k̃₂ + k̃₁k₂) + 4k̃₁k̃₂)`, `k̃ᵢ = n − 2kᵢ`.
pub fn xi_values(n: usize, k1: usize, k2: usize) -> Result<(f64, f64)> {
    if n % 2 == 1 {
        return Err(Error::OddN { n });
    }
    if k1 == 0 || k2 == 0 || k1 > n / 2 || k2 > n / 2 || k1 + k2 > n - 1 {
        return Err(Error::ColumnBudget(alloc::format!("need 1 <= k1, k2 <= n/2, got {k1}, {k2}")));
    }
    let nf = n as f64;
    let (a1, a2) = (k1 as f64, k2 as f64);
    let (t1, t2) = (nf - 2.0 * a1, nf - 2.0 * a2);
    let denom = (nf - 2.0).powi(2) * (a1 * t2 + t1 * a2) + 4.0 * t1 * t2;
    let num = nf * nf - 4.0;
    Ok((t2 * num / denom, t1 * num / denom))
}

/// `C_A⁻¹ 1` for the columns of `active`, by a direct linear solve.
pub fn xi_direct(active: &Design) -> Result<Vec<f64>> {
    let std = StandardizedDesign::new(active);
    let k = active.p();
    let lu = std.c.clone().lu();
    let xi = lu
        .solve(&DVector::from_element(k, 1.0))
        .ok_or(Error::SingularCA { condition: f64::INFINITY })?;
    Ok(xi.iter().copied().collect())
}

/// Elementwise constants `(1 − ξ_j) / (1 − v_j)` where `v_j` is the centered
/// column variance; the sign event's mean bound then reads `β_A / λ ≤ constant`.
pub fn bound_constants(active: &Design, xi: &[f64]) -> Result<Vec<f64>> {
    let std = StandardizedDesign::new(active);
    if xi.len() != active.p() {
        return Err(Error::DimensionMismatch {
            expected: active.p(),
            found: xi.len(),
        });
    }
    xi.iter()
        .enumerate()
        .map(|(j, x)| {
            let v = std.v[j];
            if v >= 1.0 {
                Err(Error::InvalidDesign("balanced column gives no bound".into()))
            } else {
                Ok((1.0 - x) / (1.0 - v))
            }
        })
        .collect()
}

/// `active` followed by `p − k` constant `+1` columns.
pub fn proposition1_pad(active: &Design, p: usize) -> Result<Design> {
    let (n, k) = (active.n(), active.p());
    if p < k {
        return Err(Error::ColumnBudget(alloc::format!("p = {p} is smaller than k = {k}")));
    }
    let mut x = Vec::with_capacity(n * p);
    for row in active.rows() {
        x.extend_from_slice(row);
        x.extend(core::iter::repeat_n(1i8, p - k));
    }
    Design::new(n, p, x)
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

struct Incidence {
    p: usize,
    factor: Vec<i64>,
    pair: Vec<i64>,
}

impl Incidence {
    fn new(p: usize) -> Self {
        Self {
            p,
            factor: vec![0; p],
            pair: vec![0; p * p],
        }
    }

    fn add(&mut self, block: &[usize], d: i64) {
        for (i, &a) in block.iter().enumerate() {
            self.factor[a] += d;
            for &b in &block[i + 1..] {
                self.pair[a * self.p + b] += d;
                self.pair[b * self.p + a] += d;
            }
        }
    }

    fn pair_counts(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.p).flat_map(move |a| ((a + 1)..self.p).map(move |b| self.pair[a * self.p + b]))
    }
}

fn spread(values: impl Iterator<Item = i64>) -> i64 {
    let (lo, hi) = values.fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi { 0 } else { hi - lo }
}

/// Balance diagnostics of a support list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Balance {
    pub factor_spread: i64,
    pub pair_spread: i64,
}

pub fn support_balance(p: usize, supports: &SupportSet) -> Balance {
    let mut inc = Incidence::new(p);
    for s in &supports.supports {
        inc.add(s, 1);
    }
    Balance {
        factor_spread: spread(inc.factor.iter().copied()),
        pair_spread: spread(inc.pair_counts()),
    }
}

/// A nearly balanced subset of `blocks` supports of size `k`.
///
/// Blocks are built greedily, each slot taking the least-used factor and,
/// among those, the one with the fewest co-occurrences with the slots already
/// filled; remaining ties are broken by seeded randomness. Factor counts then
/// differ by at most one. A repair phase then moves factors between blocks
/// while that lowers the sum of fourth powers of the pair counts, alternating
/// with seeded annealing rounds until the pair spread is at most one or the
/// rounds run out; the best list seen is returned.
pub fn nbibd_supports(p: usize, k: usize, blocks: usize, seed: u64) -> Result<SupportSet> {
    if k == 0 || k >= p {
        return Err(Error::InvalidConfig("need 1 <= k < p".into()));
    }
    if blocks == 0 {
        return Err(Error::EmptySupportSet);
    }
    let total = binomial_u128(p, k);
    if blocks as u128 > total {
        return Err(Error::TooManyBlocks {
            blocks,
            max: total.min(usize::MAX as u128) as usize,
        });
    }
    if blocks as u128 == total {
        return SupportSet::exhaustive(p, k);
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[TAG_NBIBD, p as u64, k as u64]));
    let mut inc = Incidence::new(p);
    let mut list: Vec<Vec<usize>> = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let mut block: Vec<usize> = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<((i64, i64, u64), usize)> = None;
            for f in (0..p).filter(|f| !block.contains(f)) {
                let co: i64 = block.iter().map(|&g| inc.pair[f * p + g]).sum();
                let key = (inc.factor[f], co, rng.random::<u64>());
                if best.is_none_or(|(b, _)| key < b) {
                    best = Some((key, f));
                }
            }
            block.push(best.expect("k < p leaves a free factor").1);
        }
        block.sort_unstable();
        inc.add(&block, 1);
        list.push(block);
    }
    repair_blocks(&mut list, &mut inc);
    let mut best = (spread(inc.pair_counts()), list.clone());
    for round in 0..ANNEAL_ROUNDS {
        if best.0 <= 1 {
            break;
        }
        anneal(&mut list, &mut inc, &mut rng, round);
        repair_blocks(&mut list, &mut inc);
        let s = spread(inc.pair_counts());
        if s < best.0 && duplicates(&list) == 0 {
            best = (s, list.clone());
        }
    }
    let list = best.1;
    SupportSet::explicit(p, k, list)
}

fn duplicates(list: &[Vec<usize>]) -> usize {
    let mut sorted: Vec<&Vec<usize>> = list.iter().collect();
    sorted.sort();
    sorted.windows(2).filter(|w| w[0] == w[1]).count()
}

fn pair_cells(block: &[usize], p: usize, d: i64, out: &mut Vec<(usize, i64)>) {
    for (i, &a) in block.iter().enumerate() {
        for &b in &block[i + 1..] {
            out.push((a.min(b) * p + a.max(b), d));
        }
    }
}

fn quartic(c: i64) -> i64 {
    c * c * c * c
}

/// Change in `Σ c⁴` over pair counts when `old` blocks become `new` ones.
fn swap_delta(inc: &Incidence, old: &[&[usize]], new: &[&[usize]], cells: &mut Vec<(usize, i64)>) -> i64 {
    cells.clear();
    for b in old {
        pair_cells(b, inc.p, -1, cells);
    }
    for b in new {
        pair_cells(b, inc.p, 1, cells);
    }
    cells.sort_unstable();
    let mut delta = 0;
    let mut i = 0;
    while i < cells.len() {
        let cell = cells[i].0;
        let mut d = 0;
        while i < cells.len() && cells[i].0 == cell {
            d += cells[i].1;
            i += 1;
        }
        if d != 0 {
            let c = inc.pair[cell];
            delta += quartic(c + d) - quartic(c);
        }
    }
    delta
}

const ANNEAL_ROUNDS: usize = 12;
const ANNEAL_STEPS: usize = 40_000;

/// Random factor exchanges between two blocks under a Metropolis rule on
/// `Σ c⁴`, cooling geometrically; used to leave local minima of the descent.
fn anneal<R: Rng>(list: &mut [Vec<usize>], inc: &mut Incidence, rng: &mut R, round: usize) {
    let mut cells = Vec::new();
    let hot = 400.0 / (1 + round) as f64;
    let cool = libm::pow(1.0 / hot, 1.0 / ANNEAL_STEPS as f64);
    let mut temp = hot;
    let m = list.len();
    for _ in 0..ANNEAL_STEPS {
        temp *= cool;
        let b1 = rng.random_range(0..m);
        let b2 = rng.random_range(0..m);
        if b1 == b2 {
            continue;
        }
        let a = list[b1][rng.random_range(0..list[b1].len())];
        let b = list[b2][rng.random_range(0..list[b2].len())];
        if list[b2].contains(&a) || list[b1].contains(&b) {
            continue;
        }
        let new1 = replaced(&list[b1], a, b);
        let new2 = replaced(&list[b2], b, a);
        if list.iter().any(|blk| *blk == new1 || *blk == new2) {
            continue;
        }
        let d = swap_delta(inc, &[&list[b1], &list[b2]], &[&new1, &new2], &mut cells);
        if d <= 0 || rng.random::<f64>() < libm::exp(-(d as f64) / temp) {
            inc.add(&list[b1], -1);
            inc.add(&list[b2], -1);
            inc.add(&new1, 1);
            inc.add(&new2, 1);
            list[b1] = new1;
            list[b2] = new2;
        }
    }
}

fn replaced(block: &[usize], out: usize, inn: usize) -> Vec<usize> {
    let mut v: Vec<usize> = block.iter().map(|&f| if f == out { inn } else { f }).collect();
    v.sort_unstable();
    v
}

/// Local search on `Σ c⁴` over pair counts `c`, which penalizes the extremes
/// that set the pair spread. Moves exchange a factor between two blocks
/// (factor counts unchanged) or replace a factor of one block by a
/// less-used one (factor spread never grows past one). Moves creating a
/// duplicate block are rejected.
fn repair_blocks(list: &mut [Vec<usize>], inc: &mut Incidence) {
    let p = inc.p;
    let mut cells = Vec::new();
    let mut dup = duplicates(list);
    for _ in 0..200 {
        let mut improved = false;
        for b1 in 0..list.len() {
            for a in list[b1].clone() {
                if !list[b1].contains(&a) {
                    continue;
                }
                let free: Vec<usize> = (0..p).filter(|f| !list[b1].contains(f)).collect();
                for b in free {
                    if inc.factor[b] >= inc.factor[a] {
                        continue;
                    }
                    let new1 = replaced(&list[b1], a, b);
                    let d = swap_delta(inc, &[&list[b1]], &[&new1], &mut cells);
                    if d >= 0 && dup == 0 {
                        continue;
                    }
                    let old = core::mem::replace(&mut list[b1], new1);
                    let nd = duplicates(list);
                    if nd < dup || (nd == dup && d < 0) {
                        inc.add(&old, -1);
                        inc.add(&list[b1], 1);
                        dup = nd;
                        improved = true;
                        break;
                    }
                    list[b1] = old;
                }
            }
            for b2 in (b1 + 1)..list.len() {
                let only1: Vec<usize> = list[b1].iter().copied().filter(|f| !list[b2].contains(f)).collect();
                let only2: Vec<usize> = list[b2].iter().copied().filter(|f| !list[b1].contains(f)).collect();
                'pair: for &a in &only1 {
                    for &b in &only2 {
                        let new1 = replaced(&list[b1], a, b);
                        let new2 = replaced(&list[b2], b, a);
                        let d = swap_delta(inc, &[&list[b1], &list[b2]], &[&new1, &new2], &mut cells);
                        if d >= 0 && dup == 0 {
                            continue;
                        }
                        let old = (core::mem::replace(&mut list[b1], new1), core::mem::replace(&mut list[b2], new2));
                        let nd = duplicates(list);
                        if nd < dup || (nd == dup && d < 0) {
                            inc.add(&old.0, -1);
                            inc.add(&old.1, -1);
                            inc.add(&list[b1], 1);
                            inc.add(&list[b2], 1);
                            dup = nd;
                            improved = true;
                            break 'pair;
                        }
                        list[b1] = old.0;
                        list[b2] = old.1;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Values of one design under a sign-recovery criterion. For `max` and
/// `integral` rankings both summaries are computed from the same curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignScore {
    pub value: CriterionValue,
    pub max: Option<CriterionValue>,
    pub integral: Option<CriterionValue>,
}

/// Scores `design` under the support/sign average and λ summary. For
/// [`Summary::Max`] the curve comes from `curve`; for [`Summary::Integral`]
/// its own configuration is used.
pub fn score_design(
    design: &Design,
    supports: &SupportSet,
    signs: &SignVectorSet,
    beta: f64,
    qmc: QmcConfig,
    summary: &Summary,
    curve: &IntegralConfig,
) -> Result<DesignScore> {
    let crit = PhiCriterion::new(&design.standardize(), supports, signs, beta, qmc)?;
    match summary {
        Summary::Fixed { .. } => {
            let value = summary.apply(|l| crit.at(l))?.result;
            Ok(DesignScore {
                value,
                max: None,
                integral: None,
            })
        }
        Summary::Max(m) => {
            let (integral, max) = phi_max_and_integral(|l| crit.at(l), curve, m.tolerance)?;
            Ok(DesignScore {
                value: max,
                max: Some(max),
                integral: Some(integral.result),
            })
        }
        Summary::Integral(cfg) => {
            let (integral, max) = phi_max_and_integral(|l| crit.at(l), cfg, 1e-3)?;
            Ok(DesignScore {
                value: integral.result,
                max: Some(max),
                integral: Some(integral.result),
            })
        }
    }
}

/// How the supports of a criterion are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SupportSpec {
    Exhaustive,
    Nbibd { blocks: usize },
    Explicit(Vec<Vec<usize>>),
}

impl SupportSpec {
    pub fn resolve(&self, p: usize, k: usize, seed: u64) -> Result<SupportSet> {
        match self {
            Self::Exhaustive => SupportSet::exhaustive(p, k),
            Self::Nbibd { blocks } => nbibd_supports(p, k, *blocks, seed),
            Self::Explicit(list) => SupportSet::explicit(p, k, list.clone()),
        }
    }
}

/// How each heuristic pool is cut down to its retained designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Retention {
    /// Var(s) for the Var(s+) pool, UE(s²) for the UE(s²) pool.
    #[default]
    Heuristic,
    /// Score every generated design and keep the best by the criterion.
    Criterion,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HilsConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub beta: f64,
    pub summary: Summary,
    /// Log-λ grid used for both summaries when ranking by the maximum.
    pub curve: IntegralConfig,
    pub signs: SignVectorSet,
    pub supports: SupportSpec,
    pub m_v: usize,
    pub m_u: usize,
    pub m_v_star: usize,
    pub m_u_star: usize,
    /// UE(s²)-efficiency floors; each Var(s+) start draws one uniformly.
    pub efficiency_floors: Vec<f64>,
    /// UE(s) floors; each Var(s+) start draws one uniformly.
    pub ue_s_floors: Vec<f64>,
    pub ue2_reference: Option<f64>,
    pub max_passes: usize,
    pub retention: Retention,
    pub extra_designs: Vec<(String, Design)>,
    pub seed: u64,
    pub qmc: QmcConfig,
}

impl HilsConfig {
    pub fn new(n: usize, p: usize, k: usize, beta: f64) -> Self {
        Self {
            n,
            p,
            k,
            beta,
            summary: Summary::Max(Default::default()),
            curve: IntegralConfig::default(),
            signs: SignVectorSet::AllHalf,
            supports: SupportSpec::Exhaustive,
            m_v: 50,
            m_u: 50,
            m_v_star: 5,
            m_u_star: 5,
            efficiency_floors: vec![0.5, 0.6, 0.7],
            ue_s_floors: vec![0.0],
            ue2_reference: None,
            max_passes: 100,
            retention: Retention::Heuristic,
            extra_designs: Vec::new(),
            seed: 0,
            qmc: QmcConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_v_star > self.m_v || self.m_u_star > self.m_u {
            return Err(Error::InvalidConfig("retained counts cannot exceed generated counts".into()));
        }
        if self.k == 0 || self.k > self.p || self.n < 2 {
            return Err(Error::InvalidConfig("need 1 <= k <= p and n >= 2".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig("beta must be positive and finite".into()));
        }
        if self.m_v > 0 && (self.efficiency_floors.is_empty() || self.ue_s_floors.is_empty()) {
            return Err(Error::InvalidConfig("floor lists must be nonempty".into()));
        }
        for d in &self.extra_designs {
            if d.1.n() != self.n || d.1.p() != self.p {
                return Err(Error::DimensionMismatch {
                    expected: self.n * self.p,
                    found: d.1.n() * d.1.p(),
                });
            }
        }
        self.qmc.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pool {
    VarsPlus,
    Ue2,
    Extra,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub label: String,
    pub pool: Pool,
    /// Exchange start index; `None` for extra designs.
    pub start: Option<usize>,
    pub efficiency_floor: Option<f64>,
    pub ue_s_floor: Option<f64>,
    /// Labels of later candidates identical to this one up to row order.
    pub duplicates: Vec<String>,
    pub heuristics: HeuristicSummary,
    pub score: DesignScore,
    pub design: Design,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HilsReport {
    pub winner: Design,
    pub winner_label: String,
    pub winner_value: CriterionValue,
    pub candidates: Vec<Candidate>,
    pub ue2_reference: f64,
    pub infeasible_starts: usize,
    pub supports: SupportSet,
}

fn row_canonical(d: &Design) -> Vec<Vec<i8>> {
    let mut rows: Vec<Vec<i8>> = d.rows().map(|r| r.to_vec()).collect();
    rows.sort();
    rows
}

struct Pending {
    label: String,
    pool: Pool,
    start: Option<usize>,
    efficiency_floor: Option<f64>,
    ue_s_floor: Option<f64>,
    heuristics: HeuristicSummary,
    design: Design,
}

/// Generates the Var(s+) and UE(s²) pools, keeps the best of each, adds the
/// extra designs, and returns the pooled design with the best criterion value.
pub fn hils(config: &HilsConfig) -> Result<HilsReport> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let supports = config.supports.resolve(p, config.k, config.seed)?;
    let score = |d: &Design| {
        score_design(d, &supports, &config.signs, config.beta, config.qmc, &config.summary, &config.curve)
    };
    let exchange = ExchangeConfig {
        starts: config.m_u.max(1),
        max_passes: config.max_passes,
        seed: config.seed,
        ue2_efficiency_floor: None,
        ue_s_floor: None,
        ue2_reference: config.ue2_reference,
    };
    let ue2_runs = if config.m_u > 0 { exchange_ue2_runs(n, p, &exchange)? } else { Vec::new() };
    let reference = match config.ue2_reference {
        Some(r) => r,
        None if !ue2_runs.is_empty() => ue2_runs.iter().map(|r| r.heuristics.ue_s2).fold(f64::INFINITY, f64::min),
        None => resolve_ue2_reference(n, p, &ExchangeConfig { starts: 50, ..exchange })?,
    };

    let floors: Vec<(f64, f64)> = (0..config.m_v)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(config.seed, &[TAG_FLOORS, i as u64]));
            let e = config.efficiency_floors[rng.random_range(0..config.efficiency_floors.len())];
            let u = config.ue_s_floors[rng.random_range(0..config.ue_s_floors.len())];
            (e, u)
        })
        .collect();
    let vars_runs = map_indexed(config.m_v, |i| {
        vars_plus_run(n, p, i, config.seed, config.max_passes, Some(reference), Some(floors[i].0), Some(floors[i].1))
    });
    let infeasible_starts = vars_runs.iter().filter(|r| r.is_none()).count();

    let mut vars_pool: Vec<Pending> = vars_runs
        .into_iter()
        .flatten()
        .map(|r| Pending {
            label: alloc::format!("vars_plus#{}", r.start),
            pool: Pool::VarsPlus,
            start: Some(r.start),
            efficiency_floor: Some(floors[r.start].0),
            ue_s_floor: Some(floors[r.start].1),
            heuristics: r.heuristics.with_efficiency(reference),
            design: r.design,
        })
        .collect();
    let mut ue2_pool: Vec<Pending> = ue2_runs
        .into_iter()
        .map(|r| Pending {
            label: alloc::format!("ue2#{}", r.start),
            pool: Pool::Ue2,
            start: Some(r.start),
            efficiency_floor: None,
            ue_s_floor: None,
            heuristics: r.heuristics.with_efficiency(reference),
            design: r.design,
        })
        .collect();

    let mut scored: Vec<(Pending, DesignScore)> = Vec::new();
    match config.retention {
        Retention::Heuristic => {
            vars_pool.sort_by(|a, b| a.heuristics.var_s.total_cmp(&b.heuristics.var_s));
            ue2_pool.sort_by(|a, b| a.heuristics.ue_s2.total_cmp(&b.heuristics.ue_s2));
            vars_pool.truncate(config.m_v_star);
            ue2_pool.truncate(config.m_u_star);
        }
        Retention::Criterion => {
            for (pool, keep) in [(&mut vars_pool, config.m_v_star), (&mut ue2_pool, config.m_u_star)] {
                let mut with: Vec<(Pending, DesignScore)> = Vec::new();
                for c in pool.drain(..) {
                    let s = score(&c.design)?;
                    with.push((c, s));
                }
                with.sort_by(|a, b| b.1.value.value.total_cmp(&a.1.value.value));
                with.truncate(keep);
                scored.extend(with);
            }
        }
    }
    let extras = config.extra_designs.iter().map(|(label, d)| Pending {
        label: label.clone(),
        pool: Pool::Extra,
        start: None,
        efficiency_floor: None,
        ue_s_floor: None,
        heuristics: d.heuristics().with_efficiency(reference),
        design: d.clone(),
    });
    let mut pending: Vec<Pending> = vars_pool.into_iter().chain(ue2_pool).collect();
    pending.extend(extras);

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut keys: Vec<Vec<Vec<i8>>> = Vec::new();
    let mut push = |c: Pending, s: Option<DesignScore>| -> Result<()> {
        let key = row_canonical(&c.design);
        if let Some(i) = keys.iter().position(|k| *k == key) {
            candidates[i].duplicates.push(c.label);
            return Ok(());
        }
        let score = match s {
            Some(s) => s,
            None => score(&c.design)?,
        };
        keys.push(key);
        candidates.push(Candidate {
            label: c.label,
            pool: c.pool,
            start: c.start,
            efficiency_floor: c.efficiency_floor,
            ue_s_floor: c.ue_s_floor,
            duplicates: Vec::new(),
            heuristics: c.heuristics,
            score,
            design: c.design,
        });
        Ok(())
    };
    for (c, s) in scored {
        push(c, Some(s))?;
    }
    for c in pending {
        push(c, None)?;
    }
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut best = 0;
    for i in 1..candidates.len() {
        if candidates[i].score.value.value > candidates[best].score.value.value {
            best = i;
        }
    }
    Ok(HilsReport {
        winner: candidates[best].design.clone(),
        winner_label: candidates[best].label.clone(),
        winner_value: candidates[best].score.value,
        candidates,
        ue2_reference: reference,
        infeasible_starts,
        supports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_matches_recomputation() {
        let mut t = Tracker::new(random_design(7, 9, 3));
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let (r, j) = (rng.random_range(0..7), rng.random_range(0..9));
            let predicted = t.after_flip(r, j);
            t.flip(r, j);
            assert_eq!((t.sum, t.sum_sq), predicted);
            let fresh = Tracker::new(t.design.clone());
            assert_eq!(fresh.s, t.s);
        }
    }

    #[test]
    fn floors_are_exact_thresholds() {
        let f = Floors::new(55, Some(2.0), Some(0.7), Some(0.1));
        let m = f.max_sum_sq.unwrap();
        assert!(2.0 / (m as f64 / 55.0) >= 0.7 && 2.0 / ((m + 1) as f64 / 55.0) < 0.7);
        let s = f.min_sum.unwrap();
        assert!(s as f64 / 55.0 > 0.1 && (s - 1) as f64 / 55.0 <= 0.1);
        assert_eq!(Floors::new(55, None, None, Some(0.0)).min_sum, Some(1));
    }

    #[test]
    fn block_columns_have_reported_variance() {
        let d = block_construction(16, 8, 4).unwrap();
        let std = StandardizedDesign::new(&d);
        for v in std.v.iter() {
            assert!((v - (1.0 - 4.0 / 256.0)).abs() < 1e-12);
        }
        assert!(matches!(block_construction(15, 4, 2), Err(Error::OddN { .. })));
        assert!(matches!(block_construction(16, 16, 8), Err(Error::ColumnBudget(_))));
    }
}
