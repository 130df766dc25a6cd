//! Batch front-end: configuration, experiment orchestration and the
//! `0 / 1 / 2` exit-code contract.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use commands::{Command, Failure};
use config::RunConfig;
use hoslab_core::Exec;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "hoslab", version, about = "Numerical checks for fourth-order Schrodinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output_dir).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Sub {
    /// Growth certificate and mollifier consistency.
    CheckPotential,
    /// Sector scan and spectral angle of A.
    ScanSector,
    /// Imaginary powers of A and B.
    Bip,
    /// Commutator identity and decay sweep.
    Commutator,
    /// Evolution, splitting order and analyticity.
    Evolve,
    /// Growth, sectoriality, imaginary powers and commutator checks.
    Full,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::CheckPotential => Command::CheckPotential,
            Sub::ScanSector => Command::ScanSector,
            Sub::Bip => Command::Bip,
            Sub::Commutator => Command::Commutator,
            Sub::Evolve => Command::Evolve,
            Sub::Full => Command::Full,
        }
    }
}

fn configure(cli: &Cli, vars: impl IntoIterator<Item = (String, String)>) -> Result<RunConfig, config::ConfigError> {
    let mut map = config::load(cli.config.as_deref(), vars)?;
    if let Some(o) = &cli.output {
        config::set(&mut map, "output_dir", &o.to_string_lossy())?;
    }
    if let Some(s) = cli.seed {
        config::set(&mut map, "seed", &s.to_string())?;
    }
    RunConfig::from_map(map)
}

fn exec_for(jobs: Option<usize>) -> Exec {
    match jobs {
        None => Exec::Parallel,
        Some(j) => {
            #[cfg(feature = "parallel")]
            if j > 1 {
                // The global pool can only be built once per process.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
            }
            Exec::from_jobs(j)
        }
    }
}

/// Run a parsed command line with the given environment; returns the exit code.
pub fn run(cli: &Cli, vars: impl IntoIterator<Item = (String, String)>) -> i32 {
    let cfg = match configure(cli, vars) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("hoslab: invalid configuration: {e}");
            return EXIT_USAGE;
        }
    };
    let cmd = Command::from(cli.command);
    match commands::run(cmd, &cfg, exec_for(cli.jobs)) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("hoslab {}: check failed, see {}", cmd.name(), cfg.output_dir.join(output::MANIFEST).display());
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("hoslab {}: {e}", cmd.name());
            match e {
                Failure::Usage(_) => EXIT_USAGE,
                Failure::Numerical(_) => EXIT_FAIL,
            }
        }
    }
}

/// Parse `args` and run; clap usage errors map to exit code 2.
pub fn run_args<I, T>(args: I, vars: impl IntoIterator<Item = (String, String)>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, vars),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}
