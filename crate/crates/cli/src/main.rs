mod commands;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shg_core::Error;

/// Second-harmonic transmission eigenvalue numerics on (0,1).
#[derive(Debug, Parser)]
#[command(name = "shg", version)]
pub struct Cli {
    /// Profile config: a JSON file, or builtin:fig1|fig2a|fig2b|unit.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Grid nodes (odd, at least 201).
    #[arg(long, global = true, default_value_t = 2001)]
    pub n: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2a,
    Fig2b,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Free,
    Sphere,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scaled spectral curves fig1, fig2a, fig2b as CSV plus a gnuplot script.
    Figures {
        #[arg(long, value_enum, default_value = "all")]
        which: Figure,
        #[arg(long, default_value = "0,20")]
        window: String,
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        /// Replace the source by f = 0.
        #[arg(long)]
        f_zero: bool,
    },
    /// Zeros of a spectral function on a real window or in a complex disk.
    Scan {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "0.05,20")]
        window: String,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long)]
        complex_center: Option<String>,
        #[arg(long)]
        complex_radius: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
    },
    /// Zeta zeros in |w| <= rho + delta and admissibility of given frequencies.
    Lambda {
        #[arg(long, default_value_t = 3.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        /// Frequencies to test, separated by ';' (each re,im or a+bi).
        #[arg(long)]
        check: Option<String>,
    },
    /// Fixed-point solve of the forced problem at one frequency.
    SolveForced {
        #[arg(long)]
        omega: String,
        #[arg(long, default_value = "plus")]
        branch: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
    },
    /// Invariant checks; nonzero exit if any fails.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: Level,
    },
    /// Gauss-Newton search for small residuals of the nonlinear operator.
    ProbeBlowup {
        /// Decreasing positive frequencies, comma separated.
        #[arg(long, default_value = "0.4,0.2,0.1")]
        omegas: String,
        #[arg(long, value_enum, default_value = "sphere")]
        mode: Mode,
        /// Seed scale c (free: norm c/w^2) or sphere radius.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 8)]
        seeds: usize,
        #[arg(long, default_value_t = 24)]
        basis: usize,
    },
}

/// Exit codes shared with shell pipelines.
pub const EXIT_ON_LAMBDA: u8 = 2;
pub const EXIT_NO_CONTRACTION: u8 = 3;
pub const EXIT_CONFIG: u8 = 64;

/// Rejected configuration or flags.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::OnLambda { .. }) => EXIT_ON_LAMBDA,
        Some(Error::NoContraction { .. }) => EXIT_NO_CONTRACTION,
        Some(
            Error::Parse(_)
            | Error::Domain(_)
            | Error::InvalidProfile(_)
            | Error::Grid(_)
            | Error::Geometry { .. }
            | Error::ZeroSource
            | Error::OutsideOmegaQ { .. }
            | Error::DegenerateChi2(_),
        ) => EXIT_CONFIG,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
