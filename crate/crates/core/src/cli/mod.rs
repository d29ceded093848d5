//! Command-line driver.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 numerical failure.

pub mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "casbah", version, about = "Principal stratification with a shared-atoms probit stick-breaking mixture")]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its truth table.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        scenario: u8,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Gibbs sampler and write per-iteration draw files.
    Fit {
        /// CSV with columns t, p, y, covariates and optionally id.
        #[arg(long)]
        data: PathBuf,
        /// key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Centre and scale covariates before fitting.
        #[arg(long)]
        standardize: bool,
    },
    /// Summarise a draws directory into strata and effect tables.
    Summarize {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicate a scenario and tabulate bias, ARI and effects.
    Study {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        scenario: u8,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Master seed; defaults to the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Prior probability that both arms share a cluster.
    Priorprob {
        /// Mean of the stick predictor (unit variance).
        #[arg(long, allow_hyphen_values = true)]
        alpha_mean: Option<f64>,
        #[arg(long)]
        rho1: Option<f64>,
        #[arg(long)]
        rho2: Option<f64>,
        #[arg(long = "L", default_value_t = 20)]
        truncation: usize,
        /// `lo:hi:step` grid of predictor means; writes figure1.csv.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match cli.command {
        Command::Simulate { scenario, n, seed, out } => commands::simulate(scenario, n, seed, &out),
        Command::Fit { data, config, out, standardize } => commands::fit(&data, config.as_deref(), &out, standardize),
        Command::Summarize { draws, out } => commands::summarize(&draws, &out),
        Command::Study { scenario, replicates, n, config, out, jobs, seed } => commands::study(&commands::StudyArgs {
            scenario,
            replicates,
            n,
            config: config.as_deref(),
            out: &out,
            jobs,
            seed,
        }),
        Command::Priorprob { alpha_mean, rho1, rho2, truncation, grid, out } => {
            commands::priorprob(&commands::PriorArgs { alpha_mean, rho1, rho2, truncation, grid, out }).map(|lines| {
                for l in lines {
                    println!("{l}");
                }
            })
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("casbah: {e}");
            e.exit_code()
        }
    }
}
