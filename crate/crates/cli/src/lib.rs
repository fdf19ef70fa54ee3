//! Command-line front end: every subcommand reads one TOML configuration,
//! writes CSV reports and a `run_manifest.json` into the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::time::Instant;

use crate::config::load;
use crate::error::CliError;
use crate::report::{Csv, Manifest};

#[derive(Debug, Parser)]
#[command(name = "fk-eit", version, about = "Monte Carlo forward solver for conductivity problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[command(rename_all = "kebab-case")]
pub enum Command {
    /// Dirichlet problem at the probe points.
    SolveDirichlet(RunArgs),
    /// Neumann problem with zero-mean normalization at the probe points.
    SolveContinuum(RunArgs),
    /// Electrode model at the probe points.
    SolveCem(RunArgs),
    /// Dirichlet-to-Neumann map from the boundary trace process.
    EstimateDtn(RunArgs),
    /// Boundary trace samples indexed by local time.
    BoundaryTrace(RunArgs),
    /// Binned jump kernel of the boundary trace.
    JumpKernel(RunArgs),
    /// Fits the local-time constant against the stationary occupation rate.
    Calibrate(RunArgs),
    /// Runs the acceptance suite.
    Validate(RunArgs),
    /// Deterministic grid solve.
    Oracle(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveDirichlet(_) => "solve-dirichlet",
            Command::SolveContinuum(_) => "solve-continuum",
            Command::SolveCem(_) => "solve-cem",
            Command::EstimateDtn(_) => "estimate-dtn",
            Command::BoundaryTrace(_) => "boundary-trace",
            Command::JumpKernel(_) => "jump-kernel",
            Command::Calibrate(_) => "calibrate",
            Command::Validate(_) => "validate",
            Command::Oracle(_) => "oracle",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::SolveDirichlet(a)
            | Command::SolveContinuum(a)
            | Command::SolveCem(a)
            | Command::EstimateDtn(a)
            | Command::BoundaryTrace(a)
            | Command::JumpKernel(a)
            | Command::Calibrate(a)
            | Command::Validate(a)
            | Command::Oracle(a) => a,
        }
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let started = Instant::now();
    let args = command.args();
    let setup = load(&args.config, args.seed, args.workers)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|source| CliError::Io { path: args.out.display().to_string(), source })?;

    let (tables, outcome): (Vec<Csv>, Result<(), CliError>) = match command {
        Command::Validate(_) => {
            let (tables, failed) = commands::validate_cmd(&setup);
            (tables, if failed == 0 { Ok(()) } else { Err(CliError::AcceptanceFailed { failed }) })
        }
        _ => {
            let tables = match command {
                Command::SolveDirichlet(_) => commands::solve_dirichlet_cmd(&setup),
                Command::SolveContinuum(_) => commands::solve_continuum_cmd(&setup),
                Command::SolveCem(_) => commands::solve_cem_cmd(&setup),
                Command::EstimateDtn(_) => commands::estimate_dtn_cmd(&setup),
                Command::BoundaryTrace(_) => commands::boundary_trace_cmd(&setup),
                Command::JumpKernel(_) => commands::jump_kernel_cmd(&setup),
                Command::Calibrate(_) => commands::calibrate_cmd(&setup),
                Command::Oracle(_) => commands::oracle_cmd(&setup),
                Command::Validate(_) => unreachable!(),
            }?;
            (tables, Ok(()))
        }
    };
    for t in &tables {
        t.write(&args.out)?;
    }
    let manifest = Manifest {
        subcommand: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: setup.config.seed,
        workers: setup.config.workers,
        config: setup.config.clone(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs: tables.iter().map(|t| t.name.clone()).collect(),
        exit_code: outcome.as_ref().err().map_or(0, CliError::exit_code),
    };
    manifest.write(&args.out)?;
    outcome
}
