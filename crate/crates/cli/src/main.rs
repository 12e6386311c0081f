//! `iss`: simulate, certify, verify-iss and sweep from the command line.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CertifyArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(
    name = "iss",
    version,
    about = "Impulsive time-delay systems: simulation, dwell-time certificates, ISS checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configured run; writes the trajectory CSV and `<stem>_events.csv`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trajectory CSV path (overrides `output.trajectory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a dwell-time certificate; JSON report on stdout.
    Certify {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        theorem: u8,
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
        #[arg(long)]
        rho1: Option<f64>,
        #[arg(long)]
        rho2: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Fit and check an ISS envelope over a generated ensemble; JSON on stdout.
    VerifyIss {
        #[arg(long)]
        config: PathBuf,
        /// Number of random schedules.
        #[arg(long, default_value_t = 5)]
        ensemble: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certificate margin (and final norm for delta sweeps) over a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of delta, epsilon, kappa, rho1, rho2, mu.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate { config, out } => commands::cmd_simulate(&config, out),
        Command::Certify {
            theorem,
            mu,
            rho1,
            rho2,
            kappa,
            r,
            delta,
        } => commands::cmd_certify(&CertifyArgs {
            theorem,
            mu,
            rho1,
            rho2,
            kappa,
            r,
            delta,
        }),
        Command::VerifyIss {
            config,
            ensemble,
            seed,
        } => commands::cmd_verify_iss(&config, ensemble, seed),
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
            out,
        } => commands::cmd_sweep(
            &config,
            &SweepArgs {
                param,
                from,
                to,
                steps,
            },
            out,
        ),
    };
    ExitCode::from(code)
}
