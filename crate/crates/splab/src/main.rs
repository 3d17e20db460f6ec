//! `splab`: run one experiment per invocation, or compare a finished run
//! against golden files.
//!
//! Exit codes: 0 success, 2 violated invariant or golden mismatch, 3 bad
//! usage or config, 4 resource limits, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use splab::config::{parse_config, ExperimentKind};
use splab::error::{Error, Result};
use splab::experiment::{compare_golden, run_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "splab", version, about = "Sequence-prediction laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config document with a section for this experiment.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for Monte-Carlo paths (ignored by exact runs).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact rational arithmetic (the default).
    #[arg(long, action = ArgAction::SetTrue, conflicts_with = "float")]
    exact: bool,
    /// Floating-point arithmetic with Monte-Carlo estimates where needed.
    #[arg(long, action = ArgAction::SetTrue)]
    float: bool,
    /// Cache directory for enumeration tables; defaults to $SPLAB_CACHE.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Override the enumeration program-length budget (opcodes).
    #[arg(long)]
    lmax: Option<u32>,
    /// Override the enumeration step budget.
    #[arg(long)]
    tmax: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior confirmation table after observing all-ones sequences.
    Confirm(RunArgs),
    /// Entropy-bounded divergence of a finite mixture versus a component.
    Bounds(RunArgs),
    /// Divergence versus the continuous-parameter mixture and its bound.
    Continuous(RunArgs),
    /// Program enumeration census, invariants, and complexity trends.
    Universal(RunArgs),
    /// Grid-prior behavior under reparameterization.
    Invariance(RunArgs),
    /// Step-by-step enumeration-mixture predictions along a bit string.
    Predict(RunArgs),
    /// Compare a run's artifacts against a golden directory.
    Compare {
        /// manifest.json of the produced run.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding the golden artifacts.
        #[arg(long)]
        golden: PathBuf,
        /// Relative tolerance for numeric cells; default: bytes for exact
        /// runs, 1e-9 for float runs.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn run(args: &RunArgs, kind: ExperimentKind) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::parse(format!("cannot read config {}: {e}", args.config.display())))?;
    let cfg = parse_config(&text, kind)?;
    let opts = RunOptions {
        out_dir: args.out.clone(),
        seed: args.seed,
        exact: !args.float,
        cache_dir: args
            .cache_dir
            .clone()
            .or_else(|| std::env::var_os("SPLAB_CACHE").map(PathBuf::from)),
        l_max_override: args.lmax,
        t_max_override: args.tmax,
    };
    let manifest = run_experiment(&cfg, &text, &opts)?;
    println!(
        "{}: wrote {} file(s) to {} in {} ms ({} arithmetic)",
        manifest.experiment,
        manifest.outputs.len() + 1,
        args.out.display(),
        manifest.elapsed_ms,
        manifest.arithmetic,
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Confirm(a) => run(a, ExperimentKind::Confirm),
        Command::Bounds(a) => run(a, ExperimentKind::Bounds),
        Command::Continuous(a) => run(a, ExperimentKind::Continuous),
        Command::Universal(a) => run(a, ExperimentKind::Universal),
        Command::Invariance(a) => run(a, ExperimentKind::Invariance),
        Command::Predict(a) => run(a, ExperimentKind::Predict),
        Command::Compare {
            manifest,
            golden,
            tol,
        } => {
            let report = compare_golden(manifest, golden, *tol)?;
            println!(
                "compare: {} file(s), {} cell(s) match",
                report.files, report.cells
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; everything else is bad usage.
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
