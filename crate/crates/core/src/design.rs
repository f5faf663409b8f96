//! Two-level designs, their centered and scaled model matrix, and the
//! heuristic criteria built on the inner-product matrix `S = LᵀL`, `L = (1 | X)`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `n × p` matrix of ±1 run settings, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawDesign"))]
pub struct Design {
    n: usize,
    p: usize,
    x: Vec<i8>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawDesign {
    n: usize,
    p: usize,
    x: Vec<i8>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawDesign> for Design {
    type Error = Error;

    fn try_from(raw: RawDesign) -> Result<Self> {
        Design::new(raw.n, raw.p, raw.x)
    }
}

impl fmt::Debug for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Design {}x{}", self.n, self.p)?;
        for r in 0..self.n {
            for j in 0..self.p {
                f.write_str(if self.get(r, j) > 0 { " +" } else { " -" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Design {
    pub fn new(n: usize, p: usize, x: Vec<i8>) -> Result<Self> {
        if n < 2 || p < 1 {
            return Err(Error::InvalidDesign("need n >= 2 and p >= 1".to_string()));
        }
        if x.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: x.len(),
            });
        }
        if x.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::InvalidDesign("entries must be +1 or -1".to_string()));
        }
        Ok(Self { n, p, x })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(n, p, rows.concat())
    }

    /// Builds a design from column vectors.
    pub fn from_columns(columns: &[Vec<i8>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut x = vec![0; n * p];
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            for (r, &v) in col.iter().enumerate() {
                x[r * p + j] = v;
            }
        }
        Self::new(n, p, x)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, run: usize, factor: usize) -> i8 {
        self.x[run * self.p + factor]
    }

    #[inline]
    pub(crate) fn flip(&mut self, run: usize, factor: usize) {
        let v = &mut self.x[run * self.p + factor];
        *v = -*v;
    }

    pub fn entries(&self) -> &[i8] {
        &self.x
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.x.chunks(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<i8> {
        (0..self.n).map(|r| self.get(r, j)).collect()
    }

    /// Multiplies column `j` by `signs[j]`.
    pub fn with_column_signs(&self, signs: &[i8]) -> Result<Self> {
        if signs.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: signs.len(),
            });
        }
        let mut out = self.clone();
        for r in 0..self.n {
            for j in 0..self.p {
                out.x[r * self.p + j] *= signs[j];
            }
        }
        Ok(out)
    }

    /// Column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.p];
        if perm.len() != self.p || perm.iter().any(|&j| j >= self.p || core::mem::replace(&mut seen[j], true)) {
            return Err(Error::InvalidDesign("not a column permutation".to_string()));
        }
        let mut out = self.clone();
        for r in 0..self.n {
            for (j, &src) in perm.iter().enumerate() {
                out.x[r * self.p + j] = self.get(r, src);
            }
        }
        Ok(out)
    }

    /// The `p × p` inner products `XᵀX` together with the column sums `Xᵀ1`.
    pub fn inner_products(&self) -> (Vec<i64>, Vec<i64>) {
        let p = self.p;
        let mut xtx = vec![0i64; p * p];
        let mut sums = vec![0i64; p];
        for row in self.rows() {
            for i in 0..p {
                let xi = row[i] as i64;
                sums[i] += xi;
                for j in i..p {
                    xtx[i * p + j] += xi * row[j] as i64;
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                xtx[i * p + j] = xtx[j * p + i];
            }
        }
        (xtx, sums)
    }

    pub fn standardize(&self) -> StandardizedDesign {
        StandardizedDesign::new(self)
    }

    pub fn heuristics(&self) -> HeuristicSummary {
        let (xtx, sums) = self.inner_products();
        HeuristicSummary::from_raw(&RawSums::from_products(self.p, &xtx, &sums), self.p, &sums)
    }
}

/// Centered and scaled model matrix `F = (I − P₁) X V^{-1/2}` and `C = FᵀF / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDesign {
    pub n: usize,
    pub p: usize,
    pub f: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Centered column variances (divisor `n`), each in `[0, 1]`.
    pub v: Vec<f64>,
    pub degenerate_columns: Vec<usize>,
}

impl StandardizedDesign {
    pub fn new(design: &Design) -> Self {
        let (n, p) = (design.n, design.p);
        let nf = n as f64;
        let (xtx, sums) = design.inner_products();
        let mut f = DMatrix::zeros(n, p);
        let mut v = vec![0.0; p];
        let mut degenerate_columns = Vec::new();
        for j in 0..p {
            // exact integer test: constant column iff |sum| = n
            if sums[j].unsigned_abs() as usize == n {
                degenerate_columns.push(j);
                continue;
            }
            let mean = sums[j] as f64 / nf;
            v[j] = 1.0 - mean * mean;
            let scale = 1.0 / libm::sqrt(v[j]);
            for r in 0..n {
                f[(r, j)] = (design.get(r, j) as f64 - mean) * scale;
            }
        }
        // C from integer inner products avoids accumulating rounding
        let mut c = DMatrix::zeros(p, p);
        for i in 0..p {
            if v[i] == 0.0 {
                continue;
            }
            for j in 0..p {
                if v[j] == 0.0 {
                    continue;
                }
                let cov = xtx[i * p + j] as f64 / nf - (sums[i] as f64 / nf) * (sums[j] as f64 / nf);
                c[(i, j)] = cov / libm::sqrt(v[i] * v[j]);
            }
            c[(i, i)] = 1.0;
        }
        Self {
            n,
            p,
            f,
            c,
            v,
            degenerate_columns,
        }
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.v[j] == 0.0
    }

    /// Blocks of `C`, `V` and `F` for the support `A` and its complement.
    pub fn submatrix_views(&self, support: &[usize]) -> Result<SupportViews> {
        let mut in_support = vec![false; self.p];
        for &j in support {
            if j >= self.p || in_support[j] {
                return Err(Error::InvalidConfig("support indices must be distinct and < p".into()));
            }
            in_support[j] = true;
            if self.is_degenerate(j) {
                return Err(Error::DegenerateSupport { column: j });
            }
        }
        let inactive: Vec<usize> = (0..self.p).filter(|&j| !in_support[j]).collect();
        let k = support.len();
        let c_a = DMatrix::from_fn(k, k, |a, b| self.c[(support[a], support[b])]);
        let c_ia = DMatrix::from_fn(inactive.len(), k, |i, b| self.c[(inactive[i], support[b])]);
        let c_i = DMatrix::from_fn(inactive.len(), inactive.len(), |i, j| {
            self.c[(inactive[i], inactive[j])]
        });
        let eig = c_a.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) || max / min > 1e12 {
            let condition = if min > 0.0 { max / min } else { f64::INFINITY };
            return Err(Error::SingularCA { condition });
        }
        let c_a_inv = eig.eigenvectors.clone()
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e))
            * eig.eigenvectors.transpose();
        let c_a_inv = (&c_a_inv + c_a_inv.transpose()) * 0.5;
        let v_a = support.iter().map(|&j| self.v[j]).collect();
        let f_a = DMatrix::from_fn(self.n, k, |r, b| self.f[(r, support[b])]);
        Ok(SupportViews {
            support: support.to_vec(),
            inactive,
            c_a,
            c_a_inv,
            c_ia,
            c_i,
            v_a,
            f_a,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportViews {
    pub support: Vec<usize>,
    pub inactive: Vec<usize>,
    pub c_a: DMatrix<f64>,
    pub c_a_inv: DMatrix<f64>,
    pub c_ia: DMatrix<f64>,
    pub c_i: DMatrix<f64>,
    pub v_a: Vec<f64>,
    pub f_a: DMatrix<f64>,
}

/// Raw sums over the off-diagonal pairs `0 <= i < j <= p` of `S`, and over
/// `1 <= i < j <= p` for `E(s²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawSums {
    pub sum: i64,
    pub sum_sq: i64,
    pub factor_sum_sq: i64,
}

impl RawSums {
    pub fn from_products(p: usize, xtx: &[i64], sums: &[i64]) -> Self {
        let mut out = Self::default();
        for &s in sums {
            out.sum += s;
            out.sum_sq += s * s;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let s = xtx[i * p + j];
                out.sum += s;
                out.sum_sq += s * s;
                out.factor_sum_sq += s * s;
            }
        }
        out
    }
}

/// Heuristic criteria, reported as means over the `binom(p + 1, 2)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeuristicSummary {
    pub ue_s2: f64,
    pub ue_s: f64,
    pub var_s: f64,
    /// Present only when every column is balanced.
    pub e_s2: Option<f64>,
    pub ue2_efficiency: Option<f64>,
}

impl HeuristicSummary {
    pub fn from_raw(raw: &RawSums, p: usize, column_sums: &[i64]) -> Self {
        let pairs = ((p + 1) * p / 2) as f64;
        let ue_s2 = raw.sum_sq as f64 / pairs;
        let ue_s = raw.sum as f64 / pairs;
        let balanced = column_sums.iter().all(|&s| s == 0);
        let factor_pairs = (p * (p - 1) / 2).max(1) as f64;
        let e_s2 = balanced.then(|| raw.factor_sum_sq as f64 / factor_pairs);
        Self {
            ue_s2,
            ue_s,
            var_s: ue_s2 - ue_s * ue_s,
            e_s2,
            ue2_efficiency: None,
        }
    }

    pub fn with_efficiency(mut self, reference: f64) -> Self {
        self.ue2_efficiency = efficiency(reference, self.ue_s2).ok();
        self
    }
}

/// `reference / ue_s2`, the UE(s²)-efficiency against a reference optimum.
pub fn ue2_efficiency(design: &Design, reference: f64) -> Result<f64> {
    efficiency(reference, design.heuristics().ue_s2)
}

fn efficiency(reference: f64, ue_s2: f64) -> Result<f64> {
    if ue_s2 == 0.0 {
        return if reference == 0.0 { Ok(1.0) } else { Err(Error::ZeroUe2) };
    }
    Ok(reference / ue_s2)
}
