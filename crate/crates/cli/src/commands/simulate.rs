//! `simulate`: lasso sign recovery by simulation, next to the analytic value.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use signsieve::lasso::{simulate_sign_recovery, SimConfig};
use signsieve::recovery::phi_lambda;
use signsieve::{Error as CoreError, Scenario};

use super::{parse_list, parse_signs, qmc, RunOutput, Shared, DEFAULT_BUDGET};
use crate::config;
use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, read_design};
use crate::manifest::InputDigest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub design_path: PathBuf,
    pub support: Vec<usize>,
    /// Signs on `support`; empty means all `+1`.
    pub signs: Vec<i8>,
    /// Magnitudes on `support`; a single value applies to every factor.
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub reps: usize,
    pub seed: u64,
    /// Lattice budget of the analytic value.
    pub budget: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            design_path: PathBuf::new(),
            support: Vec::new(),
            signs: Vec::new(),
            beta: vec![1.0],
            lambda: 0.0,
            reps: SimConfig::default().replications,
            seed: 0,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SimulateArgs {
    /// JSON config; flags given here override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Comma-separated active factor indices (0-based).
    #[arg(long)]
    pub support: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub signs: Option<String>,
    /// One magnitude, or one per active factor.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
}

pub fn resolve(args: SimulateArgs, shared: &Shared) -> CliResult<(SimulateConfig, Vec<InputDigest>)> {
    let (mut c, inputs) = config::load(SimulateConfig::default(), args.config.as_deref())?;
    if let Some(v) = args.design {
        c.design_path = v;
    }
    if let Some(v) = args.support {
        c.support = parse_list(&v, "support")?;
    }
    if let Some(v) = args.signs {
        c.signs = parse_signs(&parse_list::<i64>(&v, "signs")?, "signs")?;
    }
    if let Some(v) = args.beta {
        c.beta = parse_list(&v, "beta")?;
    }
    if let Some(v) = args.lambda {
        c.lambda = v;
    }
    if let Some(v) = args.reps {
        c.reps = v;
    }
    if let Some(v) = shared.seed {
        c.seed = v;
    }
    if let Some(v) = shared.budget {
        c.budget = v;
    }
    if c.signs.is_empty() {
        c.signs = vec![1; c.support.len()];
    }
    if c.beta.len() == 1 && c.support.len() > 1 {
        c.beta = vec![c.beta[0]; c.support.len()];
    }
    Ok((c, inputs))
}

/// The written `simulate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResult {
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
    pub hits: usize,
    pub replications: usize,
    /// `None` when the active block is singular.
    pub analytic: Option<f64>,
    pub analytic_std_error: Option<f64>,
    /// Within three combined standard errors, or the analytic value inside
    /// the Wilson interval.
    pub agree: Option<bool>,
}

pub fn run(c: &SimulateConfig) -> CliResult<RunOutput> {
    if c.design_path.as_os_str().is_empty() {
        return Err(CliError::Input("a design file is required (--design)".into()));
    }
    if !(c.lambda > 0.0 && c.lambda.is_finite()) {
        return Err(CliError::Input("lambda must be positive (--lambda)".into()));
    }
    if c.signs.len() != c.support.len() || c.beta.len() != c.support.len() {
        return Err(CliError::Input("support, signs and beta must have equal lengths".into()));
    }
    if c.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(CliError::Input("beta magnitudes must be positive".into()));
    }
    let mut out = RunOutput::default();
    let (design, digest) = read_design(&c.design_path)?;
    out.inputs.push(InputDigest::new("design", &c.design_path, &digest));
    let signed: Vec<f64> = c.beta.iter().zip(&c.signs).map(|(b, &z)| b * z as f64).collect();
    let sim = simulate_sign_recovery(
        &design,
        &c.support,
        &signed,
        c.lambda,
        &SimConfig {
            replications: c.reps,
            seed: c.seed,
        },
    )?;
    let analytic = if c.support.is_empty() {
        None
    } else {
        let scenario = Scenario::new(c.support.clone(), c.beta.clone(), c.signs.clone(), c.lambda)?;
        match phi_lambda(&design.standardize(), &scenario, &qmc(c.seed, c.budget)?) {
            Ok(v) => Some(v),
            Err(CoreError::SingularCA { .. } | CoreError::DegenerateSupport { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    };
    let agree = analytic.map(|a| {
        let se = (sim.std_error.powi(2) + a.std_error.powi(2)).sqrt();
        (sim.empirical - a.value).abs() <= 3.0 * se || (sim.ci_low..=sim.ci_high).contains(&a.value)
    });
    let result = SimulateResult {
        empirical: sim.empirical,
        ci_low: sim.ci_low,
        ci_high: sim.ci_high,
        std_error: sim.std_error,
        hits: sim.hits,
        replications: sim.replications,
        analytic: analytic.map(|a| a.value),
        analytic_std_error: analytic.map(|a| a.std_error),
        agree,
    };
    out.file("simulate.json", json_bytes(&result)?);
    Ok(out)
}
