//! Command-line front end: config loading, flag overrides and the exit-code map.
//!
//! Exit codes: 0 success, 1 configuration or I/O, 2 Maxwellian solver,
//! 3 integrator, 4 acceptance check.

pub mod audit;
pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

use clap::{Args, Parser, Subcommand};
use commands::CliError;
use config::{ConfigError, RunConfig};
use presets::InitialData;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "qdd", version, about = "Discrete non-local quantum drift diffusion")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// `key = value` file applied before the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_cells: Option<usize>,
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[arg(long, global = true)]
    pub t_final: Option<f64>,
    /// Repeat for a sweep; replaces the configured list.
    #[arg(long, global = true)]
    pub epsilon: Vec<f64>,
    /// Preset name or `@FILE`.
    #[arg(long, global = true)]
    pub initial: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve for the quantum Maxwellian of the initial density.
    MaxwellianSolve,
    /// Integrate the discrete nlQDD flow.
    NlqddRun,
    /// Integrate the rescaled Liouville–BGK equation with the first epsilon.
    LiouvilleRun,
    /// Sweep epsilon and compare diagonals with nlQDD.
    DiffusiveLimit,
    /// Refine the mesh and report Cauchy differences and ledgers.
    ConvergenceStudy,
    /// Compare discrete and continuum heat kernels.
    KernelCheck,
    /// Randomized structural checks.
    PropertyAudit,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.n_cells {
            cfg.n_cells = v;
        }
        if let Some(v) = self.hbar {
            cfg.hbar = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if !self.epsilon.is_empty() {
            cfg.epsilon = self.epsilon.clone();
        }
        if let Some(v) = &self.initial {
            cfg.initial = InitialData::parse(v)?;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::MaxwellianSolve => commands::maxwellian_solve(cfg),
        Command::NlqddRun => commands::nlqdd_run(cfg),
        Command::LiouvilleRun => commands::liouville_run(cfg),
        Command::DiffusiveLimit => commands::diffusive_limit(cfg),
        Command::ConvergenceStudy => commands::convergence_study(cfg),
        Command::KernelCheck => commands::kernel_check(cfg),
        Command::PropertyAudit => commands::property_audit(cfg),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = cli
        .overrides
        .resolve()
        .map_err(CliError::from)
        .and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
