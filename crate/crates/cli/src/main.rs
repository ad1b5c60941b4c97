//! `spencerctl`: checks on almost-complex and hypercomplex structures
//! described by JSON scene files.
//!
//! Exit codes: 0 when every requested tolerance is met, 1 when a check fails
//! or cannot be completed, 2 for usage and scene errors.

mod commands;
mod scene;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use spencer_core::DiffMode;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or references to missing names (exit 2).
    Usage(String),
    /// Unreadable or invalid scene (exit 2).
    Scene(String),
    /// A computation failed (exit 1).
    Compute(spencer_core::Error),
    Io(std::io::Error),
}

impl From<spencer_core::Error> for CliError {
    fn from(e: spencer_core::Error) -> CliError {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Scene(m) => write!(f, "scene error: {m}"),
            CliError::Compute(e) => write!(f, "check failed: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spencerctl", version, about = "Residual checks for almost-complex and hypercomplex structures")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Points per axis, overriding the scene resolution.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Tolerance for pass/fail; defaults to the scene value, else 1e-10 in
    /// exact mode and 1e-4 in fd mode.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Differentiation mode: exact or fd.
    #[arg(long, global = true)]
    pub mode: Option<DiffMode>,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the report (for `acs from-pq`: the converted scene) to a file.
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit the `meta` block, making reports byte-identical across runs.
    #[arg(long, global = true)]
    pub no_meta: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure validation and the (P, Q) parametrization.
    #[command(subcommand)]
    Acs(AcsCmd),
    /// Cauchy-Riemann residuals.
    #[command(subcommand)]
    Holo(HoloCmd),
    /// Almost pluriharmonic functions.
    #[command(subcommand)]
    Pluri(PluriCmd),
    /// Dirichlet problems for the operator of the structure.
    #[command(subcommand)]
    Elliptic(EllipticCmd),
    /// Twisted bracket laws.
    #[command(subcommand)]
    Bracket(BracketCmd),
    /// Hyperholomorphic residuals.
    #[command(subcommand)]
    Hyper(HyperCmd),
    /// Chart block patterns.
    #[command(subcommand)]
    Spencer(SpencerCmd),
    /// Reruns a check in fd mode at h, h/2, h/4 and reports observed orders.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Subcommand)]
pub enum AcsCmd {
    /// J^2 = -E, ellipticity certificate and optionally the Nijenhuis residual.
    Check {
        scene: PathBuf,
        #[arg(long)]
        nijenhuis: bool,
        /// Random (node, direction) samples for the ellipticity certificate.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Converts a `pq` scene into a `matrix` scene.
    FromPq { scene: PathBuf },
    /// Normalizes at the base point, extracts (P, Q) and rebuilds the structure.
    ExtractPq { scene: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum HoloCmd {
    Residual {
        scene: PathBuf,
        #[arg(long)]
        field: String,
        /// Check almost antiholomorphy instead.
        #[arg(long)]
        anti: bool,
    },
    /// Full versus reduced system in the normalized frame.
    Reduced {
        scene: PathBuf,
        #[arg(long)]
        field: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum PluriCmd {
    /// Closedness of J*du and the operator bound.
    Check {
        scene: PathBuf,
        #[arg(long)]
        field: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum EllipticCmd {
    /// Solves Delta_J u = source with Dirichlet data; the CSV solution goes to
    /// `--csv`, or to stdout with the report on stderr.
    Solve {
        scene: PathBuf,
        /// Boundary data: a scene field name or an expression.
        #[arg(long)]
        bc: String,
        /// Exact solution to measure the error against.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BracketCmd {
    Check {
        scene: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Test function.
        #[arg(long)]
        u: String,
        /// holomorphic, antiholomorphic, mixed or mixed_reversed.
        #[arg(long)]
        case: spencer_core::brackets::BracketCase,
    },
}

#[derive(Debug, Subcommand)]
pub enum HyperCmd {
    Check {
        scene: PathBuf,
        /// Quaternion function to test for J- and K-hyperholomorphy.
        #[arg(long)]
        function: Option<String>,
        /// Fields `u zeta` for the coupled potential equation.
        #[arg(long, num_args = 2, value_names = ["U", "ZETA"])]
        potential: Option<Vec<String>>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SpencerCmd {
    Verify {
        scene: PathBuf,
        #[arg(long)]
        chart: String,
        /// Expect -iE in the leading block (antiholomorphic coordinates).
        #[arg(long)]
        anti: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CheckKind {
    Holo,
    Pluri,
    Nijenhuis,
    Spencer,
    Hyper,
    Elliptic,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    pub scene: PathBuf,
    #[arg(long, value_enum)]
    pub check: CheckKind,
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub chart: Option<String>,
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub bc: Option<String>,
    #[arg(long)]
    pub oracle: Option<String>,
    /// Smallest acceptable observed order.
    #[arg(long, default_value_t = 1.5)]
    pub min_order: f64,
}

/// Result of one command.
pub struct Outcome {
    pub command: &'static str,
    pub anchor: String,
    pub passes: bool,
    pub tolerance: f64,
    pub mode: DiffMode,
    pub report: Value,
}

fn envelope(o: &Outcome, g: &Global) -> Value {
    let mut v = json!({
        "command": o.command,
        "anchor": o.anchor,
        "passes": o.passes,
        "tolerance": o.tolerance,
        "mode": o.mode,
        "seed": g.seed,
        "report": o.report,
    });
    if !g.no_meta {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        v["meta"] = json!({
            "tool": "spencerctl",
            "version": env!("CARGO_PKG_VERSION"),
            "generated_unix": now,
            "parallel": spencer_core::par::is_parallel(),
        });
    }
    v
}

fn emit(text: &str, out: Option<&PathBuf>, stderr: bool) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None if stderr => std::io::stderr().write_all(text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let run = commands::dispatch(cli)?;
    let mut text = serde_json::to_string_pretty(&envelope(&run.outcome, &cli.global)).expect("report serializes");
    text.push('\n');
    let report_out = if run.out_taken { None } else { cli.global.out.as_ref() };
    emit(&text, report_out, run.report_to_stderr && report_out.is_none())?;
    Ok(run.outcome.passes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("spencerctl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
