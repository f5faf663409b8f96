//! `construct`: a single design from an exchange search or the block construction.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use signsieve::construct::{
    block_construction, bound_constants, exchange_ue2, exchange_vars_plus, proposition1_pad, xi_direct, ExchangeConfig,
};
use signsieve::{Design, HeuristicSummary};

use super::{RunOutput, Shared};
use crate::config;
use crate::error::{CliError, CliResult};
use crate::io::{design_csv, json_bytes};
use crate::manifest::InputDigest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Minimize UE(s²).
    #[default]
    Ue2,
    /// Minimize Var(s) under the UE(s²)-efficiency and UE(s) floors.
    Varsplus,
    /// Two-block active columns, optionally padded with constant columns.
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructConfig {
    pub objective: Objective,
    pub n: usize,
    /// Factors; for `block`, columns beyond `k` are constant padding.
    pub p: Option<usize>,
    /// Active columns of the block construction.
    pub k: Option<usize>,
    /// Columns taken from the first block.
    pub k1: Option<usize>,
    pub starts: usize,
    pub max_passes: usize,
    pub seed: u64,
    pub eff_floor: Option<f64>,
    pub ues_floor: Option<f64>,
    pub ue2_reference: Option<f64>,
    /// Design file name inside the output directory.
    pub out: String,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        let exchange = ExchangeConfig::default();
        Self {
            objective: Objective::Ue2,
            n: 0,
            p: None,
            k: None,
            k1: None,
            starts: exchange.starts,
            max_passes: exchange.max_passes,
            seed: 0,
            eff_floor: None,
            ues_floor: None,
            ue2_reference: None,
            out: "design.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConstructArgs {
    /// JSON config; flags given here override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub max_passes: Option<usize>,
    /// UE(s²)-efficiency floor for `varsplus`.
    #[arg(long)]
    pub eff_floor: Option<f64>,
    /// UE(s) floor for `varsplus` (strict).
    #[arg(long, allow_hyphen_values = true)]
    pub ues_floor: Option<f64>,
    /// UE(s²) value the efficiency is measured against; searched for if unset.
    #[arg(long)]
    pub ue2_reference: Option<f64>,
    /// Design file name inside the output directory.
    #[arg(long)]
    pub out: Option<String>,
}

pub fn resolve(args: ConstructArgs, shared: &Shared) -> CliResult<(ConstructConfig, Vec<InputDigest>)> {
    let (mut c, inputs) = config::load(ConstructConfig::default(), args.config.as_deref())?;
    if let Some(v) = args.objective {
        c.objective = v;
    }
    if let Some(v) = args.n {
        c.n = v;
    }
    if args.p.is_some() {
        c.p = args.p;
    }
    if args.k.is_some() {
        c.k = args.k;
    }
    if args.k1.is_some() {
        c.k1 = args.k1;
    }
    if let Some(v) = args.starts {
        c.starts = v;
    }
    if let Some(v) = args.max_passes {
        c.max_passes = v;
    }
    if args.eff_floor.is_some() {
        c.eff_floor = args.eff_floor;
    }
    if args.ues_floor.is_some() {
        c.ues_floor = args.ues_floor;
    }
    if args.ue2_reference.is_some() {
        c.ue2_reference = args.ue2_reference;
    }
    if let Some(v) = args.out {
        c.out = v;
    }
    if let Some(v) = shared.seed {
        c.seed = v;
    }
    Ok((c, inputs))
}

/// The written `construct.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructResult {
    pub objective: Objective,
    pub n: usize,
    pub p: usize,
    pub heuristics: HeuristicSummary,
    /// Exchange start that produced the design.
    pub start: Option<usize>,
    /// Accepted improving flips of that start.
    pub flips: Option<usize>,
    /// `C_A⁻¹ 1` of the active block columns.
    pub xi: Option<Vec<f64>>,
    pub bound_constants: Option<Vec<f64>>,
}

fn check_out_name(name: &str) -> CliResult<()> {
    let path = Path::new(name);
    if name.is_empty() || path.components().count() != 1 || path.file_name().is_none() {
        return Err(CliError::Input(format!("--out must be a plain file name, got {name:?}")));
    }
    Ok(())
}

pub fn run(c: &ConstructConfig) -> CliResult<RunOutput> {
    check_out_name(&c.out)?;
    if c.out == "construct.json" {
        return Err(CliError::Input("--out cannot be construct.json".into()));
    }
    let exchange = ExchangeConfig {
        starts: c.starts,
        max_passes: c.max_passes,
        seed: c.seed,
        ue2_efficiency_floor: c.eff_floor,
        ue_s_floor: c.ues_floor,
        ue2_reference: c.ue2_reference,
    };
    let need_p = || c.p.ok_or_else(|| CliError::Input("--p is required for exchange objectives".into()));
    let (design, start, flips, xi, constants): (Design, _, _, _, _) = match c.objective {
        Objective::Ue2 => {
            let r = exchange_ue2(c.n, need_p()?, &exchange)?;
            (r.design, Some(r.start), Some(r.trace.len().saturating_sub(1)), None, None)
        }
        Objective::Varsplus => {
            let r = exchange_vars_plus(c.n, need_p()?, &exchange)?;
            (r.design, Some(r.start), Some(r.trace.len().saturating_sub(1)), None, None)
        }
        Objective::Block => {
            let k = c
                .k
                .or(c.p)
                .ok_or_else(|| CliError::Input("--k is required for the block construction".into()))?;
            let k1 = c.k1.ok_or_else(|| CliError::Input("--k1 is required for the block construction".into()))?;
            let active = block_construction(c.n, k, k1)?;
            let xi = xi_direct(&active).ok();
            let constants = xi.as_ref().and_then(|x| bound_constants(&active, x).ok());
            let design = match c.p {
                Some(p) if p > k => proposition1_pad(&active, p)?,
                _ => active,
            };
            (design, None, None, xi, constants)
        }
    };
    let result = ConstructResult {
        objective: c.objective,
        n: design.n(),
        p: design.p(),
        heuristics: design.heuristics(),
        start,
        flips,
        xi,
        bound_constants: constants,
    };
    let mut out = RunOutput::default();
    out.file(c.out.clone(), design_csv(&design));
    out.file("construct.json", json_bytes(&result)?);
    Ok(out)
}
