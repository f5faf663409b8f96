//! `hils`: heuristic pools re-ranked by a sign-recovery criterion.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use signsieve::construct::{hils, HilsConfig, Pool};

use super::{RunOutput, Shared};
use crate::config::{overlay_value, read_json};
use crate::error::{CliError, CliResult};
use crate::io::{design_csv, json_bytes, read_design, records_csv};
use crate::manifest::InputDigest;

/// A resolved HILS run; extra designs are stored inline so a replay needs no
/// other files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HilsRun {
    pub config: HilsConfig,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct HilsArgs {
    /// JSON config with at least `n`, `p`, `k` and `beta`; other keys
    /// override the defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// Extra candidate design as `label=path.csv`; repeatable.
    #[arg(long = "extra")]
    pub extra: Vec<String>,
}

fn required(obj: &serde_json::Map<String, Value>, key: &str) -> CliResult<Value> {
    obj.get(key)
        .cloned()
        .ok_or_else(|| CliError::Input(format!("hils config needs {key:?}")))
}

pub fn resolve(args: HilsArgs, shared: &Shared) -> CliResult<(HilsRun, Vec<InputDigest>)> {
    let (value, digest) = read_json(&args.config)?;
    let Value::Object(obj) = &value else {
        return Err(CliError::Input("hils config must be a JSON object".into()));
    };
    let dims: (usize, usize, usize, f64) = serde_json::from_value(Value::Array(vec![
        required(obj, "n")?,
        required(obj, "p")?,
        required(obj, "k")?,
        required(obj, "beta")?,
    ]))
    .map_err(|e| CliError::Input(format!("hils config: {e}")))?;
    let mut config = overlay_value(&HilsConfig::new(dims.0, dims.1, dims.2, dims.3), value)?;
    let mut inputs = vec![digest];
    for spec in &args.extra {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--extra expects label=path, got {spec:?}")))?;
        let path = PathBuf::from(path);
        let (design, sha) = read_design(&path)?;
        inputs.push(InputDigest::new("extra", &path, &sha));
        config.extra_designs.push((label.to_string(), design));
    }
    if let Some(v) = shared.seed {
        config.seed = v;
    }
    if let Some(v) = shared.budget {
        config.qmc.sample_budget = v;
    }
    Ok((HilsRun { config }, inputs))
}

/// One row of `candidates.csv`.
#[derive(Serialize)]
struct CandidateRow<'a> {
    label: &'a str,
    pool: Pool,
    start: Option<usize>,
    efficiency_floor: Option<f64>,
    ue_s_floor: Option<f64>,
    ue_s2: f64,
    ue_s: f64,
    var_s: f64,
    ue2_efficiency: Option<f64>,
    value: f64,
    std_error: f64,
    max: Option<f64>,
    integral: Option<f64>,
    duplicates: usize,
}

pub fn run(run: &HilsRun) -> CliResult<RunOutput> {
    let report = hils(&run.config)?;
    let rows: Vec<CandidateRow> = report
        .candidates
        .iter()
        .map(|c| CandidateRow {
            label: &c.label,
            pool: c.pool,
            start: c.start,
            efficiency_floor: c.efficiency_floor,
            ue_s_floor: c.ue_s_floor,
            ue_s2: c.heuristics.ue_s2,
            ue_s: c.heuristics.ue_s,
            var_s: c.heuristics.var_s,
            ue2_efficiency: c.heuristics.ue2_efficiency,
            value: c.score.value.value,
            std_error: c.score.value.std_error,
            max: c.score.max.map(|v| v.value),
            integral: c.score.integral.map(|v| v.value),
            duplicates: c.duplicates.len(),
        })
        .collect();
    let mut out = RunOutput::default();
    out.file("winner.csv", design_csv(&report.winner));
    out.file("candidates.csv", records_csv(&rows)?);
    out.file("hils.json", json_bytes(&report)?);
    Ok(out)
}
