//! Batch front end: configure runs, execute solve/verify pipelines, emit
//! reports and plot-ready data.
//!
//! Exit codes: 0 success, 2 defect threshold exceeded (or manifest
//! mismatch on re-check), 3 solver/quadrature non-convergence,
//! 4 validation or configuration failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stablepoh::Error;

mod commands;

#[derive(Parser)]
#[command(name = "stablepoh", version, about = "anisotropic stable-operator Dirichlet solver and identity verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the operator symbol, its square root and the half-order
    /// kernel density, with the inversion residual summary
    Symbol {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve the configured Dirichlet problem and dump the solution
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve across refinement levels and verify the configured identities
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// refinement levels (overrides the config)
        #[arg(long)]
        levels: Option<usize>,
        /// worst accepted relative defect (overrides the config)
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract the boundary trace u/d^s of the configured problem
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit the logarithmic boundary expansion of the half-order operator
    #[command(name = "fit-singularity")]
    FitSingularity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// boundary node indices to fit at (default: 0 and a quarter turn)
        #[arg(long, value_delimiter = ',')]
        indices: Vec<usize>,
        /// fit the discrete solution instead of the d^s profile
        #[arg(long)]
        solution: bool,
    },
    /// Scaling-derivative oracle for logarithmic profiles:
    /// −d/dλ|₁⁺ ∫ φ(λt) φ(t/λ) dt for φ = A log⁻|t−1| + B χ_[0,1]
    #[command(name = "oneD-lemma")]
    OneDLemma {
        #[arg(long, default_value_t = 1.0)]
        a_coef: f64,
        #[arg(long, default_value_t = 0.0)]
        b_coef: f64,
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        richardson: usize,
    },
    /// Render the report table from a run directory; `--check` re-hashes
    /// the manifest artifacts
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Symbol { config, out } => commands::cmd_symbol(&config, &out),
        Command::Solve { config, out, seed } => commands::cmd_solve(&config, &out, seed),
        Command::Verify { config, out, levels, threshold, seed } => {
            commands::cmd_verify(&config, &out, levels, threshold, seed)
        }
        Command::Trace { config, out } => commands::cmd_trace(&config, &out),
        Command::FitSingularity { config, out, indices, solution } => {
            commands::cmd_fit_singularity(&config, &out, &indices, solution)
        }
        Command::OneDLemma { a_coef, b_coef, delta, richardson } => {
            commands::cmd_oned_lemma(a_coef, b_coef, delta, richardson)
        }
        Command::Report { out, check } => commands::cmd_report(&out, check),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Convergence(_) | Error::Quadrature(_) | Error::IllConditioned { .. } => 3,
        Error::Domain(_)
        | Error::Validation(_)
        | Error::Argument(_)
        | Error::Resource(_)
        | Error::Io(_)
        | Error::Config(_) => 4,
    }
}
