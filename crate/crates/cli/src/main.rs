//! Command-line laboratory for beta-indexed recursive MA(1) estimation:
//! seeded simulation, online estimation, zero-set oracles, deterministic
//! mean-field iteration, and reproducible replication studies.

mod config;
mod diagnose;
mod error;
mod experiment;
mod output;
mod probes;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::Result;

#[derive(Parser)]
#[command(
    name = "ma1lab",
    version,
    about = "Recursive MA(1) estimation laboratory",
    long_about = "Fits a first-order moving-average coefficient online, whether or not \
the data actually came from an MA(1). One recursion family spans pseudolinear \
regression (beta = 0) and recursive maximum likelihood with filtered regressors \
(beta = 1); experiments compare where along that family the estimates settle, \
against zero sets of the population mean field computed independently."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one replication's data path (stdout CSV, or path_<rep>.csv).
    Simulate {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Replication index; picks the generator stream.
        #[arg(long, default_value_t = 0)]
        rep: usize,
        /// Replace the [innovation] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the estimator on one replication and print its summary.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Recursion member; must be one of the config's betas.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for traj_<beta>_<rep>.csv (optional).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the zero set of the mean field at one beta.
    Zeroset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Output directory for zeroset_<beta>.csv (optional).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterate the deterministic mean field from many starts and verify
    /// every limit lands on the zero set.
    RmCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Evenly spaced starting points in [-0.9, 0.9].
        #[arg(long, default_value_t = 20)]
        starts: usize,
        /// Iteration steps per start.
        #[arg(long, default_value_t = 20_000)]
        steps: u64,
        /// Distance tolerance to the zero set.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Exit 4 if any start misses the zero set.
        #[arg(long)]
        check: bool,
    },
    /// Full replication study: summary.csv, traj/zeroset CSVs, manifest.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; never affects emitted bytes.
        #[arg(long, default_value_t = 4)]
        threads: usize,
        /// Exit 4 unless each beta's mean distance to its zero set stays
        /// below the configured threshold.
        #[arg(long)]
        check: bool,
    },
    /// Recompute per-step diagnostics for a completed experiment and
    /// judge them against the convergence thresholds.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the experiment's manifest and artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one beta (default: all).
        #[arg(long)]
        beta: Option<f64>,
        /// Restrict to one replication (default: all).
        #[arg(long)]
        rep: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        threads: usize,
        /// Exit 4 if any selected replication misses a threshold.
        #[arg(long)]
        check: bool,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            rep,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config, seed)?;
            probes::simulate(&cfg, rep, out.as_deref())
        }
        Command::Estimate {
            config,
            beta,
            rep,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config, seed)?;
            probes::estimate(&cfg, beta, rep, out.as_deref())
        }
        Command::Zeroset { config, beta, out } => {
            let cfg = ExperimentConfig::load(&config, None)?;
            probes::zeroset(&cfg, beta, out.as_deref())
        }
        Command::RmCheck {
            config,
            beta,
            starts,
            steps,
            tol,
            check,
        } => {
            let cfg = ExperimentConfig::load(&config, None)?;
            probes::rm_check(&cfg, beta, starts, steps, tol, check)
        }
        Command::Experiment {
            config,
            seed,
            out,
            threads,
            check,
        } => {
            let cfg = ExperimentConfig::load(&config, seed)?;
            let result = experiment::run_experiment(&cfg, &out, threads)?;
            println!(
                "wrote {} summary rows to {}",
                result.rows.len(),
                out.join("summary.csv").display()
            );
            for a in &result.aggregates {
                println!(
                    "beta {}: mean_dist={:.6e} max_dist={:.6e} mean_loss={:.6e} \
                     mean_theta_final={:.6}",
                    a.beta, a.mean_dist, a.max_dist, a.mean_loss, a.mean_theta_final
                );
            }
            if let Some(best) = result
                .aggregates
                .iter()
                .min_by(|x, y| x.mean_loss.total_cmp(&y.mean_loss))
            {
                if result.aggregates.len() > 1 {
                    println!("lowest mean loss: beta {}", best.beta);
                }
            }
            if check {
                experiment::check_experiment(&cfg, &result)?;
            }
            Ok(())
        }
        Command::Diagnose {
            config,
            out,
            beta,
            rep,
            seed,
            threads,
            check,
        } => {
            let cfg = ExperimentConfig::load(&config, seed)?;
            diagnose::diagnose(&cfg, &out, beta, rep, threads, check)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        if !e.is_quiet() {
            eprintln!("error: {e}");
        }
        std::process::exit(e.exit_code());
    }
}
