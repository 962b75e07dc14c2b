//! Command-line front end: argument parsing, configuration and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod reproduce;
pub mod table;

pub use config::{ConfigFile, Format, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// A numerical routine failed; exit code 1.
    Numerical(String),
    /// The run finished but a result is outside its tolerance; exit code 1.
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Tolerance(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) if m.starts_with("error:") => write!(f, "{m}"),
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Tolerance(m) => write!(f, "out of tolerance: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<compass_core::Error> for CliError {
    fn from(e: compass_core::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "compass",
    version,
    about = "Compass-state phase-space simulations"
)]
pub struct Cli {
    #[command(flatten)]
    pub opts: Opts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Photon additions.
    #[arg(long, global = true)]
    pub p: Option<usize>,
    /// Photon subtractions.
    #[arg(long, global = true)]
    pub q: Option<usize>,
    /// Mean thermal photon number of the bath.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nbar: Option<f64>,
    /// Time or comma-separated schedule.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau: Vec<f64>,
    /// Half-width of the square grid.
    #[arg(long = "grid-l", global = true, allow_hyphen_values = true)]
    pub grid_l: Option<f64>,
    /// Points per axis (odd).
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    /// Projection angle(s), comma-separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Number-basis dimension for oracle and overlap runs.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
}

impl Opts {
    fn as_config(&self) -> ConfigFile {
        let list = |v: &Vec<f64>| (!v.is_empty()).then(|| v.clone());
        ConfigFile {
            x0: self.x0,
            p: self.p,
            q: self.q,
            nbar: self.nbar,
            grid_l: self.grid_l,
            grid_n: self.grid_n,
            tau_schedule: list(&self.tau),
            theta: list(&self.theta),
            output_dir: self.out.clone(),
            format: self.format,
            threads: self.threads,
            cutoff: self.cutoff,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Wigner function on a grid, or at one point.
    Wigner {
        #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
    },
    /// One grid per time in the schedule.
    Evolve,
    /// Radon projections at the given angles.
    Tomogram,
    /// Negative volume over the schedule.
    Negativity,
    /// Linear entropy over the schedule.
    Entropy {
        /// Also report the initial entropy production rate.
        #[arg(long)]
        rate: bool,
    },
    /// Central-peak ratio d(τ) over the schedule.
    CentralPeak,
    /// Area, volume and their rates for the central patch.
    Patch,
    /// Overlap with the plain compass state over a range of X0.
    OverlapSweep {
        #[arg(long, default_value_t = 0.1)]
        x0_min: f64,
        #[arg(long, default_value_t = 6.0)]
        x0_max: f64,
        #[arg(long, default_value_t = 60)]
        steps: usize,
    },
    /// Analytic Wigner function against the density-matrix solver.
    OracleCompare,
    /// Published tables and figure data.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        /// Restrict a table to one row (1-based).
        #[arg(long)]
        row: Option<usize>,
        #[arg(long, hide = true)]
        entropy_prefactor: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Table1,
    Table2,
    Fig1d,
    Fig2,
    Fig5,
    Fig6,
}

/// A parsed command line with its configuration resolved.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: RunConfig,
}

pub enum Parsed {
    Run(Invocation),
    /// Help or version text, printed with exit code 0.
    Info(String),
}

/// Parses `argv` (program name first) and loads any config file.
pub fn parse<I, T>(argv: I) -> Result<Parsed, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Parsed::Info(e.to_string()))
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let file = match &cli.opts.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let config = RunConfig::resolve(file.overlay(cli.opts.as_config()))?;
    if let Command::OverlapSweep {
        x0_min,
        x0_max,
        steps,
    } = cli.command
    {
        if !(x0_min.is_finite() && x0_max.is_finite() && 0.0 <= x0_min && x0_min <= x0_max)
            || steps == 0
        {
            return Err(CliError::Usage(
                "overlap sweep needs 0 <= x0-min <= x0-max and steps >= 1".into(),
            ));
        }
    }
    Ok(Parsed::Run(Invocation {
        command: cli.command,
        config,
    }))
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("COMPASS_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

/// Runs a full command line and returns the process exit code. Results go
/// to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let outcome = parse(argv).and_then(|parsed| match parsed {
        Parsed::Info(text) => {
            let _ = write!(stdout, "{text}");
            Ok(())
        }
        Parsed::Run(inv) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(inv.config.threads.unwrap_or(0))
                .build()
                .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
            // Results are buffered so the pool never touches the caller's writer.
            let mut buffer = Vec::new();
            let result = pool.install(|| commands::dispatch(&inv, &mut buffer));
            stdout.write_all(&buffer)?;
            result
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}
