//! Command-line runs over the `signsieve` library: design evaluation,
//! symmetric-correlation exploration, construction, HILS and simulation.
//! Every run writes its result files and a `manifest.json` that replays it.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use commands::construct::ConstructArgs;
use commands::eval::EvalArgs;
use commands::hils::HilsArgs;
use commands::simulate::SimulateArgs;
use commands::sym::SymArgs;
use commands::{execute, replay, Resolved, Shared};
use error::{CliError, CliResult};
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "signsieve", version, about = "Rank screening designs by lasso sign-recovery probability")]
pub struct Cli {
    /// Base seed; overrides any config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Lattice points per randomization; overrides any config file.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Φ criterion of a design file.
    Eval(EvalArgs),
    /// ψ criteria under a completely symmetric correlation matrix.
    Sym(SymArgs),
    /// Build one design by exchange or block construction.
    Construct(ConstructArgs),
    /// Heuristic pools re-ranked by a criterion.
    Hils(HilsArgs),
    /// Lasso simulation against the analytic probability.
    Simulate(SimulateArgs),
    /// Re-run a manifest.
    Replay {
        manifest: PathBuf,
    },
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

/// Resolves and executes one invocation.
pub fn dispatch(cli: Cli) -> CliResult<RunManifest> {
    init_threads(cli.threads)?;
    let shared = Shared {
        seed: cli.seed,
        budget: cli.budget,
        threads: cli.threads,
        out_dir: cli.out_dir,
    };
    let (resolved, inputs) = match cli.command {
        Command::Eval(a) => commands::eval::resolve(a, &shared).map(|(c, i)| (Resolved::Eval(c), i))?,
        Command::Sym(a) => commands::sym::resolve(a, &shared).map(|(c, i)| (Resolved::Sym(c), i))?,
        Command::Construct(a) => commands::construct::resolve(a, &shared).map(|(c, i)| (Resolved::Construct(c), i))?,
        Command::Hils(a) => commands::hils::resolve(a, &shared).map(|(c, i)| (Resolved::Hils(c), i))?,
        Command::Simulate(a) => commands::simulate::resolve(a, &shared).map(|(c, i)| (Resolved::Simulate(c), i))?,
        Command::Replay { manifest } => return replay(&manifest, &shared.out_dir, shared.threads),
    };
    execute(&resolved, inputs, &shared.out_dir, shared.threads)
}

/// Parses `args` (program name first) and runs them; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(m) => {
            for name in &m.outputs {
                println!("{name}");
            }
            0
        }
        Err(e) => {
            eprintln!("signsieve: {e}");
            e.exit_code()
        }
    }
}
