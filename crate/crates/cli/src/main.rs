use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "qgraph", version, about = "Vertex couplings on star graphs and their δ-chain approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check rank and self-adjointness of a coupling
    Validate,
    /// Emit U, A and B for a coupling, plus equivalent parametrizations
    Convert,
    /// Tabulate a resolvent kernel on a grid
    KernelDump,
    /// Distance of a schedule's induced condition to its target, over d
    BcSweep,
    /// Hilbert–Schmidt distance of the two-δ resolvent to its limit, over d
    HsSweep,
    /// Distance of the connector construction to Ψ'(0) = (D + S)Ψ(0), over d
    AugmentedSweep,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// JSON input: coupling descriptor, chain, schedule or augmented target
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output file (CSV for sweeps and dumps, JSON otherwise); stdout if absent
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// JSON summary of a sweep; defaults to stdout when --output is a file
    #[arg(long, global = true)]
    summary: Option<PathBuf>,

    /// Spectral parameter κ as `re` or `re,im`
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..=2, allow_hyphen_values = true)]
    kappa: Option<Vec<f64>>,

    #[arg(long, global = true)]
    d_min: Option<f64>,

    #[arg(long, global = true)]
    d_max: Option<f64>,

    /// Number of geometric sweep points, endpoints included
    #[arg(long, global = true)]
    count: Option<usize>,

    /// Gauss–Legendre nodes per panel axis
    #[arg(long, global = true, default_value_t = 128)]
    nodes: usize,

    /// Truncation radius in units of 1/Re κ
    #[arg(long, global = true, default_value_t = 20.0)]
    trunc_factor: f64,

    /// Coupling family, used instead of --input
    #[arg(long, global = true)]
    family: Option<String>,

    /// Family parameter `key=value`, value in JSON (e.g. `n=3`, `alpha=[1,1]`)
    #[arg(long = "param", global = true)]
    params: Vec<String>,

    /// Scale of the approximating chain for kernel-dump
    #[arg(long, global = true)]
    d: Option<f64>,

    /// Grid end for kernel-dump
    #[arg(long, global = true, default_value_t = 5.0)]
    x_max: f64,

    /// Grid points per axis for kernel-dump
    #[arg(long, global = true, default_value_t = 21)]
    points: usize,
}

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Core(qgraph_core::Error),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Core(e) => match e.kind() {
                qgraph_core::error::ErrorKind::Numeric => 3,
                qgraph_core::error::ErrorKind::Invariant => 4,
            },
            CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Core(e) => match e.kind() {
                qgraph_core::error::ErrorKind::Numeric => "numeric",
                qgraph_core::error::ErrorKind::Invariant => "invariant",
            },
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Parse(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
            CliError::Io(e) => e.to_string(),
        }
    }
}

impl From<qgraph_core::Error> for CliError {
    fn from(e: qgraph_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

fn fail(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let body = serde_json::json!({
        "error": err.kind(),
        "message": err.message(),
        "exit_code": code,
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Parse(e.to_string().trim().to_string())),
    };
    match commands::run(cli.command, &cli.opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
