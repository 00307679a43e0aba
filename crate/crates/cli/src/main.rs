//! `mixpred`: build model classes, construct mixture priors, evaluate and
//! verify their regret, and run the lower-bound witness search.
//!
//! Exit codes: 0 success, 1 verification rows failed, 2 input error,
//! 3 enumeration budget exceeded, 4 inconsistent artifacts.

mod commands;
mod experiment;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixpred_core::Error;

#[derive(Debug, Parser)]
#[command(name = "mixpred", version, about = "Discrete-prior mixture predictors with exact regret checks")]
struct Cli {
    /// Worker threads for enumeration (defaults to all cores).
    #[arg(long, global = true, env = "MIXPRED_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Settings shared by the commands that take an experiment spec.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment spec JSON; the flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Class file (as written by `build-class`) or class spec JSON.
    #[arg(long)]
    pub class: Option<PathBuf>,
    /// Reference predictor: inline JSON measure spec or a path to one.
    #[arg(long)]
    pub rho: Option<String>,
    /// Largest horizon N.
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Maximum number of strings enumerated per horizon.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expand a class spec into a canonical class file.
    BuildClass {
        /// Class spec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the mixture prior for a class and reference predictor.
    Construct {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Prior dump (JSON); a run manifest is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact (or sampled) losses of a prior and the reference on every member.
    Evaluate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Prior dump; built from the class when omitted.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Horizons to evaluate (default: 1..=N).
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Fall back to Monte Carlo past the enumeration budget.
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long)]
        samples: Option<usize>,
        /// CSV report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the regret bound for every member and 3 <= n <= N.
    Verify {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Prior dump; built from the class when omitted.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// CSV report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Witness regret curve of a prior over point masses on eventually-zero sequences.
    LowerBound {
        /// Prior dump over a dirac-upto-K class.
        #[arg(long, requires = "class", conflicts_with = "preset")]
        prior: Option<PathBuf>,
        /// Class file the prior dump refers to.
        #[arg(long)]
        class: Option<PathBuf>,
        /// Built-in prior over dirac-upto-K: uniform, geometric or single-delta.
        #[arg(long, requires = "k")]
        preset: Option<String>,
        /// K (defaults to the largest support length in the class).
        #[arg(long)]
        k: Option<usize>,
        /// Lower-bound spec JSON: {"preset": .., "k": ..} or {"prior": .., "class": .., "k": ..}.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// JSON curve.
        #[arg(long)]
        out: PathBuf,
        /// Two-column TSV (n, witness regret) for plotting.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::BudgetExceeded { .. } => 3,
                Error::Inconsistent(_) => 4,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::BuildClass { spec, out } => commands::build_class(&spec, out.as_deref()),
        Command::Construct { exp, out } => commands::construct(&exp, &out),
        Command::Evaluate { exp, prior, n, monte_carlo, samples, out } => {
            commands::evaluate(&exp, prior.as_deref(), &n, monte_carlo, samples, &out)
        }
        Command::Verify { exp, prior, out } => commands::verify(&exp, prior.as_deref(), &out),
        Command::LowerBound { prior, class, preset, k, spec, out, plot_data } => commands::lower_bound(
            commands::LowerBoundArgs { prior, class, preset, k, spec },
            &out,
            plot_data.as_deref(),
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
