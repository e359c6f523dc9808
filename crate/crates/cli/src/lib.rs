//! Command-line front end for `quasilin`.
//!
//! [`run_with`] parses an argument vector, runs one subcommand and writes a
//! text report; `--json PATH` adds a machine-readable [`Report`].

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod plot;
mod report;
pub mod sysfile;

pub use report::Report;
pub use sysfile::SystemFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] quasilin::Error),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    /// Short error name printed ahead of the message.
    pub fn kind(&self) -> &'static str {
        use quasilin::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Parse(_) => "ParseError",
                E::Domain(_) => "DomainError",
                E::UnknownSymbol(_) => "UnknownSymbol",
                E::MissingSymbol(_) => "MissingSymbol",
                E::DimensionMismatch { .. } => "DimensionMismatch",
                E::NotControllable { .. } => "NotControllable",
                E::BoxExit { .. } => "BoxExit",
                E::DegenerateMap => "DegenerateMap",
                E::CannotAchieve(_) => "CannotAchieve",
                E::Numerical(_) => "NumericalError",
                E::Input(_) => "InputError",
            },
            CliError::Input(_) => "InputError",
            CliError::Io { .. } => "IoError",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "quasilin", version, about = "Feedback linearizability of control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Args)]
pub struct Common {
    /// Relative rank tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Integration step.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub dt: f64,
    /// Sample points per axis for neighborhood grids.
    #[arg(long, global = true, default_value_t = 5)]
    pub grid: usize,
    /// Neighborhood radius in box-normalized units.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub radius: f64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Involutivity residual tolerance.
    #[arg(long = "inv-tol", global = true, default_value_t = 1e-6)]
    pub inv_tol: f64,
    /// Principal-angle tolerance when comparing estimates of D.
    #[arg(long = "angle-tol", global = true, default_value_t = 1e-3)]
    pub angle_tol: f64,
    /// Secant agreement angle for limit directions.
    #[arg(long = "limit-angle-tol", global = true, default_value_t = 1e-3)]
    pub limit_angle_tol: f64,
    /// Rank tolerance for the span of limit directions.
    #[arg(long = "span-tol", global = true, default_value_t = 1e-6)]
    pub span_tol: f64,
    /// Write a JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

/// A linear pair given on the command line.
#[derive(Clone, Debug, Args)]
pub struct PairArgs {
    /// Row-major `A`, rows separated by `;`.
    #[arg(long = "A", allow_hyphen_values = true)]
    pub a: Option<String>,
    #[arg(long = "B", allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Use the file's `A`, `B` instead of its linearization.
    #[arg(long)]
    pub target: bool,
}

/// CSV and gnuplot output for trajectories.
#[derive(Clone, Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// gnuplot script plotting the CSV; needs `--csv`.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regular / weakly / strongly singular point.
    Classify { file: PathBuf },
    /// Kronecker data of a linear pair.
    Indices {
        file: Option<PathBuf>,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Feedback transformation to the canonical form.
    Brunovsky {
        file: Option<PathBuf>,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Whether two linear pairs are feedback equivalent.
    ConjugateLinear {
        file: Option<PathBuf>,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long = "A2", allow_hyphen_values = true)]
        a2: Option<String>,
        #[arg(long = "B2", allow_hyphen_values = true)]
        b2: Option<String>,
    },
    /// The flag of distributions at the base point, untagged.
    Flag { file: PathBuf },
    /// The flag plus the linearizability tag.
    Verdict { file: PathBuf },
    /// Infinitesimal conjugacy residual of the file's χ against (A, B).
    Residual {
        file: PathBuf,
        /// Grid nodes per axis over the domain box.
        #[arg(long, default_value_t = 101)]
        nodes: usize,
    },
    /// Integrates both systems under the file's test controls.
    Verify {
        file: PathBuf,
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        /// Constant added to every component of χ_II.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        perturb: f64,
    },
    /// Fast switching between the file's two controls.
    Chatter {
        file: PathBuf,
        #[arg(long = "l", default_value_t = 10)]
        l: usize,
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        #[command(flatten)]
        plot: PlotArgs,
    },
    /// Lower bound on the orbit dimension of a field family at x̄.
    OrbitDim {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Comma-separated probe times, used with both signs.
        #[arg(long, default_value = "0.05,0.1")]
        probe: String,
    },
    /// Integrates the system from x̄.
    Simulate {
        file: PathBuf,
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        #[command(flatten)]
        plot: PlotArgs,
    },
    /// Smooth approximation of the file's feedback.
    SmoothFeedback {
        file: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Grid nodes per state axis.
        #[arg(long, default_value_t = 201)]
        nodes: usize,
        /// Initial kernel width.
        #[arg(long)]
        width: Option<f64>,
    },
}

/// Runs one command; returns the process exit code.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run_cli(cli, &argv, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error ({}): {e}", e.kind());
            e.exit_code()
        }
    }
}

fn run_cli(cli: Cli, argv: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let start = std::time::Instant::now();
    let common = cli.common;
    let echo = report::echo(argv);
    let (input, outcome) = commands::dispatch(&cli.command, &common)?;
    out.write_all(outcome.text.as_bytes())
        .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?;
    if let Some(path) = &common.json {
        let r = Report::new(echo, &input, outcome.result, outcome.tolerances, start.elapsed());
        write_file(path, r.to_json() + "\n")?;
    }
    Ok(())
}

pub(crate) fn write_file(path: &std::path::Path, contents: String) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
