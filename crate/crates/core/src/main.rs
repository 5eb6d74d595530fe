use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use floquet::cli::{self, CliError, CommandOutput, SystemConfig};

/// Floquet analysis of periodic linear dynamic systems on periodic time scales.
///
/// Log verbosity is read from FLOQUET_LOG (error, warn, info, debug, trace).
/// Exit codes: 0 success, 2 configuration error, 3 numeric failure or a
/// violated invariant under `verify`.
#[derive(Debug, Parser)]
#[command(name = "floquet", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monodromy, multipliers, exponents, verdict and residuals as JSON.
    Analyze {
        config: PathBuf,
        /// Include wall-clock timing (makes the report non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Write L(t), e_R(t,t0) and Φ(t,t0) on a grid as CSV files.
    Decompose {
        config: PathBuf,
        /// Number of grid points.
        #[arg(long)]
        grid: Option<usize>,
        /// Number of periods the grid spans.
        #[arg(long, default_value_t = 1.0)]
        periods: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Integrate a trajectory and emit it as CSV.
    Simulate {
        config: PathBuf,
        /// Initial state, comma separated (constant expressions allowed).
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Final time (default t0 + period).
        #[arg(long)]
        t_end: Option<String>,
        /// Number of output samples.
        #[arg(long)]
        grid: Option<usize>,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Initial state of a periodic solution, or the reason there is none.
    Periodic { config: PathBuf },
    /// Transform the system through its Floquet factor L(t).
    Transform {
        config: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Check every invariant numerically; exit 3 if any fails.
    Verify {
        config: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn run(args: Args) -> Result<CommandOutput, CliError> {
    let load = |path: &PathBuf| SystemConfig::load(path)?.build();
    match args.command {
        Command::Analyze { config, timing } => cli::analyze(&load(&config)?, timing),
        Command::Decompose {
            config,
            grid,
            periods,
            out,
        } => cli::decompose(&load(&config)?, grid, periods, &out),
        Command::Simulate {
            config,
            x0,
            t_end,
            grid,
            out,
        } => cli::simulate(&load(&config)?, x0.as_deref(), t_end.as_deref(), grid, out.as_deref()),
        Command::Periodic { config } => cli::periodic(&load(&config)?),
        Command::Transform { config, grid } => cli::transform(&load(&config)?, grid),
        Command::Verify { config, grid } => cli::verify(&load(&config)?, grid),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLOQUET_LOG", "warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(args) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.stdout.as_bytes()).is_err() {
                return ExitCode::from(cli::EXIT_CONFIG as u8);
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("floquet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
