//! Subcommand configurations, their execution, and manifest replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use signsieve::recovery::{IntegralConfig, MaxConfig, Summary};
use signsieve::QmcConfig;

use crate::error::{CliError, CliResult};
use crate::manifest::{InputDigest, RunManifest};

pub mod construct;
pub mod eval;
pub mod hils;
pub mod simulate;
pub mod sym;

/// Result files of a run, in write order, plus the inputs it read.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub inputs: Vec<InputDigest>,
}

impl RunOutput {
    pub fn file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }
}

/// A fully resolved run of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Eval(eval::EvalConfig),
    Sym(sym::SymConfig),
    Construct(construct::ConstructConfig),
    Hils(hils::HilsRun),
    Simulate(simulate::SimulateConfig),
}

impl Resolved {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eval(_) => "eval",
            Self::Sym(_) => "sym",
            Self::Construct(_) => "construct",
            Self::Hils(_) => "hils",
            Self::Simulate(_) => "simulate",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Eval(c) => c.seed,
            Self::Sym(c) => c.seed,
            Self::Construct(c) => c.seed,
            Self::Hils(c) => c.config.seed,
            Self::Simulate(c) => c.seed,
        }
    }

    pub fn to_value(&self) -> CliResult<Value> {
        let v = match self {
            Self::Eval(c) => serde_json::to_value(c),
            Self::Sym(c) => serde_json::to_value(c),
            Self::Construct(c) => serde_json::to_value(c),
            Self::Hils(c) => serde_json::to_value(c),
            Self::Simulate(c) => serde_json::to_value(c),
        };
        v.map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn from_value(command: &str, config: Value) -> CliResult<Self> {
        fn parse<T: serde::de::DeserializeOwned>(v: Value) -> CliResult<T> {
            serde_json::from_value(v).map_err(|e| CliError::Input(format!("manifest config: {e}")))
        }
        Ok(match command {
            "eval" => Self::Eval(parse(config)?),
            "sym" => Self::Sym(parse(config)?),
            "construct" => Self::Construct(parse(config)?),
            "hils" => Self::Hils(parse(config)?),
            "simulate" => Self::Simulate(parse(config)?),
            other => return Err(CliError::Input(format!("unknown command {other:?} in manifest"))),
        })
    }

    pub fn run(&self) -> CliResult<RunOutput> {
        match self {
            Self::Eval(c) => eval::run(c),
            Self::Sym(c) => sym::run(c),
            Self::Construct(c) => construct::run(c),
            Self::Hils(c) => hils::run(c),
            Self::Simulate(c) => simulate::run(c),
        }
    }
}

/// Runs `resolved`, writes its result files and manifest into `out_dir`.
pub fn execute(resolved: &Resolved, mut inputs: Vec<InputDigest>, out_dir: &Path, threads: Option<usize>) -> CliResult<RunManifest> {
    let started = Instant::now();
    let output = resolved.run()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut outputs = Vec::with_capacity(output.files.len());
    for (name, bytes) in &output.files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        outputs.push(name.clone());
    }
    inputs.extend(output.inputs);
    let manifest = RunManifest {
        command: resolved.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: resolved.seed(),
        threads,
        config: resolved.to_value()?,
        inputs,
        outputs,
        duration_secs: started.elapsed().as_secs_f64(),
    };
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Re-runs a manifest after checking that its design inputs are unchanged.
pub fn replay(manifest_path: &Path, out_dir: &Path, threads: Option<usize>) -> CliResult<RunManifest> {
    let manifest = RunManifest::read(manifest_path)?;
    for input in manifest.inputs.iter().filter(|i| i.role == "design") {
        input.verify()?;
    }
    let resolved = Resolved::from_value(&manifest.command, manifest.config.clone())?;
    let carried = manifest.inputs.into_iter().filter(|i| i.role != "design").collect();
    execute(&resolved, carried, out_dir, threads)
}

/// Flags shared by every subcommand; set values override config files.
#[derive(Debug, Clone, Default)]
pub struct Shared {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
}

/// Which λ summary a criterion is reduced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    Fixed,
    Max,
    Integral,
}

/// λ-summary settings shared by `eval` and `sym`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummarySettings {
    pub summary: Option<SummaryKind>,
    /// λ values for the `fixed` summary.
    pub lambda: Vec<f64>,
    pub max: MaxConfig,
    pub integral: IntegralConfig,
}


impl SummarySettings {
    /// `fixed` when λ values were given, `max` otherwise.
    pub fn resolve_kind(&mut self) {
        if self.summary.is_none() {
            self.summary = Some(if self.lambda.is_empty() { SummaryKind::Max } else { SummaryKind::Fixed });
        }
    }

    /// Restricts both the maximum search and the integral to `[lo, hi]` in log λ.
    pub fn set_log_lambda_range(&mut self, lo: f64, hi: f64) {
        self.max.log_lambda_lower = lo;
        self.max.log_lambda_upper = hi;
        self.integral.log_lambda_lower = lo;
        self.integral.log_lambda_cap = hi;
    }

    pub fn kind(&self) -> SummaryKind {
        self.summary.unwrap_or(SummaryKind::Max)
    }

    /// The summary for a single λ (`fixed`) or a λ search.
    pub fn single(&self) -> CliResult<Summary> {
        Ok(match self.kind() {
            SummaryKind::Fixed => match self.lambda.as_slice() {
                [l] => Summary::Fixed { lambda: *l },
                _ => return Err(CliError::Input("the fixed summary here needs exactly one lambda".into())),
            },
            SummaryKind::Max => Summary::Max(self.max),
            SummaryKind::Integral => Summary::Integral(self.integral),
        })
    }
}

pub fn qmc(seed: u64, budget: usize) -> CliResult<QmcConfig> {
    let q = QmcConfig::default().with_seed(seed).with_budget(budget);
    q.validate()?;
    Ok(q)
}

pub const DEFAULT_BUDGET: usize = 4096;

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| CliError::Input(format!("{what}: cannot parse {t:?}"))))
        .collect()
}

/// `a,b;c,d` into `[[a, b], [c, d]]`.
pub fn parse_nested<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<Vec<T>>> {
    text.split(';').filter(|g| !g.trim().is_empty()).map(|g| parse_list(g, what)).collect()
}

pub fn parse_pair(text: &str, what: &str) -> CliResult<(f64, f64)> {
    match parse_list::<f64>(text, what)?.as_slice() {
        [a, b] if a <= b => Ok((*a, *b)),
        _ => Err(CliError::Input(format!("{what}: expected lo,hi with lo <= hi"))),
    }
}

pub fn parse_signs(values: &[i64], what: &str) -> CliResult<Vec<i8>> {
    values
        .iter()
        .map(|&v| match v {
            1 => Ok(1),
            -1 => Ok(-1),
            _ => Err(CliError::Input(format!("{what}: signs must be 1 or -1"))),
        })
        .collect()
}
