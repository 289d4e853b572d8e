//! The `markovcat` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 resource cap
//! exceeded, 4 a verification suite failed.

pub mod commands;
pub mod json;
pub mod schema;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_SUITE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "markovcat",
    version,
    about = "Filtering, smoothing and law checks for Markov models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON report to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override comparison tolerances.
    #[arg(long, global = true, env = "MARKOVCAT_TOLERANCE")]
    pub tolerance: Option<f64>,
    /// Add wall-clock time to the report (makes output nondeterministic).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Bayes filter on an observation sequence.
    Filter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        observations: PathBuf,
    },
    /// Smooth a full observation sequence.
    Smooth {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long, value_enum, default_value = "fixed-interval")]
        method: Method,
    },
    /// Sample a state and observation trajectory.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of time points (default: the whole horizon).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Model or joint fixture; optional for the law suite.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Observations for the Gauss oracles (sampled from the model if absent).
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Category for the law suite when no model is given.
        #[arg(long)]
        category: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random cases for the law suite.
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    ForwardBackward,
    FixedInterval,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ForwardBackward => "forward-backward",
            Method::FixedInterval => "fixed-interval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Laws,
    Markov,
    FilterOracle,
    SmootherOracle,
    FilterChain,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Laws => "laws",
            Suite::Markov => "markov",
            Suite::FilterOracle => "filter-oracle",
            Suite::SmootherOracle => "smoother-oracle",
            Suite::FilterChain => "filter-chain",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Io { path: PathBuf, source: io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => e.fmt(f),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(Error::Resource { .. }) => EXIT_CAP,
            _ => EXIT_INPUT,
        }
    }
}

/// A finished command: the report and whether a suite passed.
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut outcome = commands::dispatch(cli)?;
    if cli.timing {
        if let Value::Object(map) = &mut outcome.report {
            map.insert(
                "timing_ms".into(),
                Value::from(start.elapsed().as_secs_f64() * 1e3),
            );
        }
    }
    let text = json::to_string(&outcome.report);
    match &cli.out {
        Some(path) => write_atomic(path, &text)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(outcome)
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(o) if o.passed => EXIT_OK,
        Ok(_) => {
            eprintln!("markovcat: verification failed");
            EXIT_SUITE
        }
        Err(e) => {
            eprintln!("markovcat: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with(std::env::args_os())
}
