use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use annulus_cli::config::RunConfig;
use annulus_cli::run::{cmd_diagnose, cmd_solve, cmd_sweep};
use annulus_cli::verify::{run_verify, DEFAULT_N_R, DEFAULT_N_THETA};
use annulus_cli::{CliError, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY_FAILED};
use clap::{Parser, Subcommand};

/// Steady Navier–Stokes flow with prescribed flux in a circular annulus.
#[derive(Parser)]
#[command(name = "annulus-flux", version)]
struct Cli {
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem; writes report.json, fields.csv, meta.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continuation over the configured sweep; writes trace.csv, sweep.json, meta.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle and identity checks and print a table.
    Verify {
        #[arg(long, default_value_t = DEFAULT_N_R)]
        n_r: usize,
        #[arg(long, default_value_t = DEFAULT_N_THETA)]
        n_theta: usize,
    },
    /// Diagnostics of a stored fields.csv; writes diagnostics.json.
    Diagnose {
        #[arg(long)]
        fields: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        nu: f64,
        /// Flux of the carrier used as extension in the identities.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        flux: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ANNULUS_FLUX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("ANNULUS_FLUX_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_threads()?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Solve { config, out } => cmd_solve(&RunConfig::load(&config)?, out.as_deref(), quiet),
        Command::Sweep { config, out } => cmd_sweep(&RunConfig::load(&config)?, out.as_deref(), quiet),
        Command::Verify { n_r, n_theta } => {
            let clock = Instant::now();
            let report = run_verify(n_r, n_theta)?;
            print!("{}", report.table());
            if !quiet {
                eprintln!("verify took {:.2} s", clock.elapsed().as_secs_f64());
            }
            Ok(if report.all_pass() { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Diagnose {
            fields,
            lambda,
            nu,
            flux,
            out,
        } => cmd_diagnose(&fields, lambda, nu, flux, &out, quiet),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
