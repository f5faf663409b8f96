//! `eval`: a Φ criterion of one design file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use signsieve::construct::SupportSpec;
use signsieve::recovery::{phi_integral, phi_max, CurvePoint, LambdaSummary};
use signsieve::{CriterionValue, PhiCriterion, SignVectorSet};

use super::{parse_list, parse_nested, parse_pair, parse_signs, qmc, RunOutput, Shared, SummaryKind, SummarySettings, DEFAULT_BUDGET};
use crate::config;
use crate::error::{CliError, CliResult};
use crate::io::{curve_csv, json_bytes, read_design};
use crate::manifest::InputDigest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// `z_A = 1`.
    #[default]
    Known,
    /// Every reflection class.
    All,
    /// The vectors in `signs`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub design_path: PathBuf,
    pub k: usize,
    pub beta: f64,
    pub sign_mode: SignMode,
    pub signs: Option<Vec<Vec<i8>>>,
    /// Per-factor prior signs applied to the design columns first.
    pub prior_signs: Option<Vec<i8>>,
    pub supports: SupportSpec,
    #[serde(flatten)]
    pub summary: SummarySettings,
    /// Also write `curve.csv`.
    pub curve: bool,
    pub seed: u64,
    pub budget: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            design_path: PathBuf::new(),
            k: 0,
            beta: 0.0,
            sign_mode: SignMode::Known,
            signs: None,
            prior_signs: None,
            supports: SupportSpec::Exhaustive,
            summary: SummarySettings::default(),
            curve: false,
            seed: 0,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct EvalArgs {
    /// JSON config; flags given here override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Design CSV of 1/-1 entries, one row per run.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub sign_mode: Option<SignMode>,
    /// Custom sign vectors, e.g. `1,-1,1;1,1,-1`.
    #[arg(long, allow_hyphen_values = true)]
    pub signs: Option<String>,
    /// One sign per factor, applied to the design columns.
    #[arg(long, allow_hyphen_values = true)]
    pub prior_signs: Option<String>,
    /// `exhaustive`, `nbibd:<blocks>`, or explicit supports `0,1,2;3,4,5`.
    #[arg(long)]
    pub supports: Option<String>,
    /// One or more λ values for the fixed summary.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, value_enum)]
    pub summary: Option<SummaryKind>,
    /// `lo,hi` bounds of log λ for the max and integral summaries.
    #[arg(long, allow_hyphen_values = true)]
    pub log_lambda_range: Option<String>,
    /// Riemann step in log λ for the integral summary.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub curve: bool,
}

pub fn parse_supports(text: &str) -> CliResult<SupportSpec> {
    let text = text.trim();
    if text == "exhaustive" {
        return Ok(SupportSpec::Exhaustive);
    }
    if let Some(blocks) = text.strip_prefix("nbibd:") {
        let blocks = blocks
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("supports: bad block count {blocks:?}")))?;
        return Ok(SupportSpec::Nbibd { blocks });
    }
    Ok(SupportSpec::Explicit(parse_nested(text, "supports")?))
}

pub fn resolve(args: EvalArgs, shared: &Shared) -> CliResult<(EvalConfig, Vec<InputDigest>)> {
    let (mut c, inputs) = config::load(EvalConfig::default(), args.config.as_deref())?;
    if let Some(v) = args.design {
        c.design_path = v;
    }
    if let Some(v) = args.k {
        c.k = v;
    }
    if let Some(v) = args.beta {
        c.beta = v;
    }
    if let Some(v) = args.sign_mode {
        c.sign_mode = v;
    }
    if let Some(v) = args.signs {
        let nested: Vec<Vec<i64>> = parse_nested(&v, "signs")?;
        c.signs = Some(nested.iter().map(|z| parse_signs(z, "signs")).collect::<CliResult<_>>()?);
        if args.sign_mode.is_none() {
            c.sign_mode = SignMode::Custom;
        }
    }
    if let Some(v) = args.prior_signs {
        c.prior_signs = Some(parse_signs(&parse_list::<i64>(&v, "prior-signs")?, "prior-signs")?);
    }
    if let Some(v) = args.supports {
        c.supports = parse_supports(&v)?;
    }
    if let Some(v) = args.lambda {
        c.summary.lambda = parse_list(&v, "lambda")?;
    }
    if let Some(v) = args.summary {
        c.summary.summary = Some(v);
    }
    if let Some(v) = args.log_lambda_range {
        let (lo, hi) = parse_pair(&v, "log-lambda-range")?;
        c.summary.set_log_lambda_range(lo, hi);
    }
    if let Some(v) = args.step {
        c.summary.integral.step = v;
    }
    if let Some(v) = args.grid_points {
        c.summary.max.grid_points = v;
    }
    c.curve |= args.curve;
    if let Some(v) = shared.seed {
        c.seed = v;
    }
    if let Some(v) = shared.budget {
        c.budget = v;
    }
    c.summary.resolve_kind();
    Ok((c, inputs))
}

/// The written `criterion.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub summary: SummaryKind,
    pub value: f64,
    pub p_s: Option<f64>,
    pub p_i: Option<f64>,
    pub std_error: f64,
    pub lambda_at: Option<f64>,
    pub diagnostics: Diagnostics,
    /// Every λ of a fixed-summary run.
    pub points: Option<Vec<CurvePoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub singular_supports: usize,
    pub supports: usize,
    pub sign_vectors: usize,
    pub n: usize,
    pub p: usize,
}

fn validate(c: &EvalConfig) -> CliResult<()> {
    if c.design_path.as_os_str().is_empty() {
        return Err(CliError::Input("a design file is required (--design)".into()));
    }
    if c.k == 0 {
        return Err(CliError::Input("k must be positive (--k)".into()));
    }
    if !(c.beta > 0.0 && c.beta.is_finite()) {
        return Err(CliError::Input("beta must be positive (--beta)".into()));
    }
    if c.summary.kind() == SummaryKind::Fixed && c.summary.lambda.is_empty() {
        return Err(CliError::Input("the fixed summary needs at least one lambda".into()));
    }
    if c.summary.lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(CliError::Input("lambda values must be positive".into()));
    }
    Ok(())
}

pub fn run(c: &EvalConfig) -> CliResult<RunOutput> {
    validate(c)?;
    let mut out = RunOutput::default();
    let (mut design, digest) = read_design(&c.design_path)?;
    out.inputs.push(InputDigest::new("design", &c.design_path, &digest));
    if let Some(z) = &c.prior_signs {
        design = design.with_column_signs(z)?;
    }
    if c.k > design.p() {
        return Err(CliError::Input(format!("k = {} exceeds the design's {} factors", c.k, design.p())));
    }
    let signs = match c.sign_mode {
        SignMode::Known => SignVectorSet::Known,
        SignMode::All => SignVectorSet::AllHalf,
        SignMode::Custom => SignVectorSet::Custom(
            c.signs
                .clone()
                .ok_or_else(|| CliError::Input("custom sign mode needs signs".into()))?,
        ),
    };
    let supports = c.supports.resolve(design.p(), c.k, c.seed)?;
    let crit = PhiCriterion::new(&design.standardize(), &supports, &signs, c.beta, qmc(c.seed, c.budget)?)?;
    if crit.singular_supports() == supports.len() {
        return Err(CliError::Infeasible(format!(
            "every one of the {} supports has a singular active block (k = {}, n = {})",
            supports.len(),
            c.k,
            design.n()
        )));
    }
    let kind = c.summary.kind();
    let (summary, points) = match kind {
        SummaryKind::Fixed => {
            let curve = c
                .summary
                .lambda
                .iter()
                .map(|&l| crit.at(l).map(|value| CurvePoint { log_lambda: l.ln(), value }))
                .collect::<signsieve::Result<Vec<_>>>()?;
            let best = curve
                .iter()
                .fold(curve[0], |b, p| if p.value.value > b.value.value { *p } else { b });
            (
                LambdaSummary {
                    result: best.value,
                    curve: curve.clone(),
                },
                Some(curve),
            )
        }
        SummaryKind::Max => (phi_max(|l| crit.at(l), &c.summary.max)?, None),
        SummaryKind::Integral => (phi_integral(|l| crit.at(l), &c.summary.integral)?, None),
    };
    let r: CriterionValue = summary.result;
    let result = EvalResult {
        summary: kind,
        value: r.value,
        p_s: r.p_s,
        p_i: r.p_i,
        std_error: r.std_error,
        lambda_at: r.lambda_at,
        diagnostics: Diagnostics {
            singular_supports: crit.singular_supports(),
            supports: supports.len(),
            sign_vectors: signs.vectors(c.k)?.len(),
            n: design.n(),
            p: design.p(),
        },
        points,
    };
    out.file("criterion.json", json_bytes(&result)?);
    if c.curve {
        out.file("curve.csv", curve_csv(&summary.curve)?);
    }
    Ok(out)
}
