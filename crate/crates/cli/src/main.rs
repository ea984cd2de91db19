//! `fnls`: command-line driver for the ground-state solver.
//!
//! Exit codes: 0 on success, 1 on configuration or input errors, 2 when a
//! solver stops without meeting its tolerance.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fnls_core::io::{parse_config, run, verify, Command};
use fnls_core::FnlsError;
use log::error;

#[derive(Parser, Debug)]
#[command(name = "fnls", version, about = "Fermionic NLS ground states with Coulomb centers")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Run directory for every output file.
    #[arg(long, global = true, value_name = "DIR", default_value = "fnls-out")]
    out: PathBuf,

    /// Overrides the seed of the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads; falls back to FNLS_THREADS, then to the config.
    #[arg(long, global = true, value_name = "N", env = "FNLS_THREADS")]
    threads: Option<usize>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Ground state with the configured centers.
    Solve,
    /// Ground state of the problem without centers.
    SolveFree,
    /// Lowest eigenpairs of the mean-field operator.
    Spectrum,
    /// Blown-up solves along increasing coupling.
    SweepAlpha,
    /// Ground-state energy against particle number.
    Curve,
    /// Strict binding inequality.
    Binding,
    /// Functional inequalities on random states.
    Check,
    /// Recompute energies of a finished run from its dumps.
    Verify,
}

impl Sub {
    fn pipeline(self) -> Option<Command> {
        Some(match self {
            Sub::Solve => Command::Solve,
            Sub::SolveFree => Command::SolveFree,
            Sub::Spectrum => Command::Spectrum,
            Sub::SweepAlpha => Command::SweepAlpha,
            Sub::Curve => Command::Curve,
            Sub::Binding => Command::Binding,
            Sub::Check => Command::Check,
            Sub::Verify => return None,
        })
    }
}

const EXIT_INPUT: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;

fn exit_code(e: &FnlsError) -> u8 {
    match e {
        FnlsError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_INPUT,
    }
}

fn set_threads(n: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("thread pool already configured: {e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info })
        .parse_env("FNLS_LOG")
        .init();

    let Some(command) = cli.command.pipeline() else {
        return match verify(&cli.out) {
            Ok(report) if report.ok() => {
                if !cli.quiet {
                    println!(
                        "verified {} states, max relative deviation {:.3e}",
                        report.states_checked, report.max_deviation
                    );
                }
                ExitCode::SUCCESS
            }
            Ok(report) => {
                error!(
                    "verification failed: checksums {:?}, energy mismatches {}",
                    report.checksum_failures,
                    report.energy_mismatches.len()
                );
                ExitCode::from(EXIT_INPUT)
            }
            Err(e) => {
                error!("{e}");
                ExitCode::from(exit_code(&e))
            }
        };
    };

    let Some(path) = cli.config.as_ref() else {
        error!("{} needs --config", command.name());
        return ExitCode::from(EXIT_INPUT);
    };
    let mut resolved = match parse_config(path) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Some(seed) = cli.seed {
        resolved.config.seed = seed;
        resolved.options.seed = seed;
    }
    if let Some(n) = cli.threads.or(resolved.config.threads) {
        if n == 0 {
            error!("threads must be positive");
            return ExitCode::from(EXIT_INPUT);
        }
        resolved.config.threads = Some(n);
        set_threads(n);
    }

    match run(command, &resolved, &cli.out) {
        Ok(outcome) => {
            if !cli.quiet {
                for op in &outcome.manifest.operations {
                    let energy = op.energy.map(|e| format!(" E={:.12e}", e.total)).unwrap_or_default();
                    println!("{}: {} ({} iterations){energy}", op.name, op.status, op.iterations);
                }
            }
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NO_CONVERGENCE)
            }
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
