//! `mixreg`: runs the verification pipelines from a config and writes
//! manifest.json plus CSV/JSON artifacts.
//!
//! Exit codes: 0 every check passed, 1 some check failed, 2 usage or config error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod manifest;
pub mod registry;

use config::ExperimentConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "mixreg", version, about = "Verification pipelines for mixed local-nonlocal Dirichlet problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Config file (.toml or .json) or the name of a bundled config.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "mixreg-out")]
    pub out: PathBuf,
    /// Seed for randomized checks; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the manifest (or defaults) as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// List what the command would check, then exit.
    #[arg(long, global = true)]
    pub list: bool,
    /// Print the default config, then exit.
    #[arg(long, global = true)]
    pub print_defaults: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Expansion of (-Δ)^s on power-log atoms against the quadrature oracle.
    #[command(name = "verify-lemma61")]
    VerifyLemma61,
    /// Build the sharp counterexample and check residual, exponent and leading term.
    Counterexample,
    /// Solve the Dirichlet problem and run the solution checks.
    Solve,
    /// Exponential, distance and Poisson barrier certificates.
    Barriers,
    /// Weighted Poisson solve and its norm ratios.
    Norms,
    /// Every command above, each in its own subdirectory.
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyLemma61 => "verify-lemma61",
            Command::Counterexample => "counterexample",
            Command::Solve => "solve",
            Command::Barriers => "barriers",
            Command::Norms => "norms",
            Command::All => "all",
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    match run_cli(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            EXIT_USAGE
        }
    }
}

fn run_cli(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    if cli.print_defaults {
        let d = ExperimentConfig::default();
        writeln!(out, "{}", if cli.json { d.to_json() } else { d.to_toml() }).map_err(io)?;
        return Ok(EXIT_PASS);
    }
    let mut config = match &cli.config {
        Some(source) => ExperimentConfig::load(source)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Usage("a command is required (see --help)".into()))?;
    let plan = commands::prepare(command, &config)?;
    if cli.list {
        for line in plan.list() {
            writeln!(out, "{line}").map_err(io)?;
        }
        return Ok(EXIT_PASS);
    }
    let manifest = plan.execute(&config, &cli.out)?;
    if cli.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io)?;
    } else {
        for c in &manifest.checks {
            let value = c.value.map(|v| format!(" value={v:.6e}")).unwrap_or_default();
            let tol = c.tolerance.map(|v| format!(" tol={v:.1e}")).unwrap_or_default();
            writeln!(out, "{} {}{value}{tol} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(io)?;
        }
        writeln!(
            out,
            "{}: {} of {} checks passed; manifest at {}",
            manifest.command,
            manifest.checks.iter().filter(|c| c.passed).count(),
            manifest.checks.len(),
            cli.out.join("manifest.json").display()
        )
        .map_err(io)?;
    }
    Ok(if manifest.passed { EXIT_PASS } else { EXIT_FAIL })
}
