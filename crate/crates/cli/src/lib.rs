//! Library side of the `cure` command-line tool.

use std::fmt;

pub mod commands;
pub mod config;
pub mod methods;

use config::{Cli, Command};

/// Failure of a command. Usage errors exit with status 2, the rest with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(cure::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Usage(_) => None,
            CliError::Run(e) => Some(e),
        }
    }
}

impl From<cure::Error> for CliError {
    fn from(e: cure::Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // fails only if a pool already exists, e.g. a second call in-process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("rayon pool already initialized");
        }
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Paths(a) => commands::paths(a),
        Command::Eval(a) => commands::eval(a),
        Command::Benchmark(a) => commands::benchmark(a),
    }
}
