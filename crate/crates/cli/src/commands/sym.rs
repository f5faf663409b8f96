//! `sym`: criteria under a completely symmetric correlation matrix.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use signsieve::symmetric::{
    c_bounds, contour_grid, derivative_check, lemma3_threshold, optimize_c, theorem3_regions, ContourCell,
    DerivativeReport, OptimizeReport,
};
use signsieve::{SymEvaluator, SymMethod, SymSigns};

use super::{parse_list, parse_pair, qmc, RunOutput, Shared, SummaryKind, SummarySettings, DEFAULT_BUDGET};
use crate::config;
use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, records_csv};
use crate::manifest::InputDigest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymConfig {
    pub n: usize,
    pub k: usize,
    /// Inactive factors; `p = k + q`.
    pub q: usize,
    pub beta: f64,
    pub signs: SymSigns,
    pub method: SymMethod,
    #[serde(flatten)]
    pub summary: SummarySettings,
    /// Search for the optimal `c`.
    pub optimize: bool,
    pub tolerance: f64,
    pub c_range: (f64, f64),
    pub log_lambda_range: (f64, f64),
    /// Contour grid points per axis; 0 skips the contour.
    pub resolution: usize,
    /// Log-λ step of the condition-region scan.
    pub condition_step: f64,
    /// Log-λ values at which to run the derivative checks.
    pub derivatives: Vec<f64>,
    pub seed: u64,
    pub budget: usize,
}

impl Default for SymConfig {
    fn default() -> Self {
        Self {
            n: 0,
            k: 0,
            q: 0,
            beta: 0.0,
            signs: SymSigns::Known,
            method: SymMethod::Auto,
            summary: SummarySettings::default(),
            optimize: true,
            tolerance: 1e-3,
            c_range: (-0.1, 0.5),
            log_lambda_range: (-3.0, 1.0),
            resolution: 0,
            condition_step: 1e-3,
            derivatives: Vec::new(),
            seed: 0,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SignArg {
    Known,
    All,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SymArgs {
    /// JSON config; flags given here override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Total factors; sets `q = p − k`.
    #[arg(long, conflicts_with = "q")]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub signs: Option<SignArg>,
    /// Force the lattice engine everywhere.
    #[arg(long)]
    pub engine: bool,
    #[arg(long, value_enum)]
    pub summary: Option<SummaryKind>,
    /// λ for the fixed summary.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub no_optimize: bool,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// `lo,hi` of the contour's c axis.
    #[arg(long, allow_hyphen_values = true)]
    pub c_range: Option<String>,
    /// `lo,hi` of the contour's log λ axis and the condition scan.
    #[arg(long, allow_hyphen_values = true)]
    pub log_lambda_range: Option<String>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Comma-separated log λ values for derivative checks.
    #[arg(long, allow_hyphen_values = true)]
    pub derivatives: Option<String>,
}

pub fn resolve(args: SymArgs, shared: &Shared) -> CliResult<(SymConfig, Vec<InputDigest>)> {
    let (mut c, inputs) = config::load(SymConfig::default(), args.config.as_deref())?;
    if let Some(v) = args.n {
        c.n = v;
    }
    if let Some(v) = args.k {
        c.k = v;
    }
    if let Some(v) = args.q {
        c.q = v;
    }
    if let Some(p) = args.p {
        c.q = p
            .checked_sub(c.k)
            .ok_or_else(|| CliError::Input(format!("p = {p} is smaller than k = {}", c.k)))?;
    }
    if let Some(v) = args.beta {
        c.beta = v;
    }
    if let Some(v) = args.signs {
        c.signs = match v {
            SignArg::Known => SymSigns::Known,
            SignArg::All => SymSigns::All,
        };
    }
    if args.engine {
        c.method = SymMethod::Engine;
    }
    if let Some(v) = args.summary {
        c.summary.summary = Some(v);
    }
    if let Some(v) = args.lambda {
        c.summary.lambda = vec![v];
    }
    if let Some(v) = args.step {
        c.summary.integral.step = v;
    }
    if args.no_optimize {
        c.optimize = false;
    }
    if let Some(v) = args.tolerance {
        c.tolerance = v;
    }
    if let Some(v) = args.c_range {
        c.c_range = parse_pair(&v, "c-range")?;
    }
    if let Some(v) = args.log_lambda_range {
        c.log_lambda_range = parse_pair(&v, "log-lambda-range")?;
    }
    if let Some(v) = args.resolution {
        c.resolution = v;
    }
    if let Some(v) = args.derivatives {
        c.derivatives = parse_list(&v, "derivatives")?;
    }
    if let Some(v) = shared.seed {
        c.seed = v;
    }
    if let Some(v) = shared.budget {
        c.budget = v;
    }
    c.summary.resolve_kind();
    Ok((c, inputs))
}

/// The written `sym.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymResult {
    pub c_star: Option<f64>,
    pub value: Option<f64>,
    /// Log-λ intervals where the curvature condition holds.
    pub condition_regions: Vec<(f64, f64)>,
    /// Smallest log λ at which the sign-event condition holds.
    pub sign_condition_threshold: Option<f64>,
    pub c_bounds: (f64, f64),
    pub optimize: Option<OptimizeReport>,
    pub derivatives: Vec<DerivativeReport>,
}

pub fn run(c: &SymConfig) -> CliResult<RunOutput> {
    if c.n < 2 || c.k == 0 || !(c.beta > 0.0 && c.beta.is_finite()) {
        return Err(CliError::Input("need n >= 2, k >= 1 and beta > 0".into()));
    }
    let eval = SymEvaluator {
        method: c.method,
        config: qmc(c.seed, c.budget)?,
        ..SymEvaluator::new(c.n, c.k, c.q, c.beta)
    };
    let mut out = RunOutput::default();
    let summary = c.summary.single()?;
    let optimize = if c.optimize { Some(optimize_c(&eval, c.signs, &summary, c.tolerance)?) } else { None };
    let (lo, hi) = c.log_lambda_range;
    let condition_regions = if c.k >= 2 {
        theorem3_regions(c.n, c.k, c.q, c.beta, lo, hi, c.condition_step)?
    } else {
        Vec::new()
    };
    let derivatives = c
        .derivatives
        .iter()
        .map(|&w| derivative_check(&eval, w.exp()))
        .collect::<signsieve::Result<Vec<_>>>()?;
    let result = SymResult {
        c_star: optimize.as_ref().map(|o| o.c_star),
        value: optimize.as_ref().map(|o| o.value),
        condition_regions,
        sign_condition_threshold: lemma3_threshold(c.n, c.beta),
        c_bounds: c_bounds(c.k, c.q),
        optimize,
        derivatives,
    };
    out.file("sym.json", json_bytes(&result)?);
    if c.resolution > 0 {
        let cells: Vec<ContourCell> =
            contour_grid(&eval, c.signs, c.c_range, c.log_lambda_range, (c.resolution, c.resolution))?;
        out.file("contour.csv", records_csv(&cells)?);
    }
    Ok(out)
}
