use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use metric_rl::trainer::RunConfig;
use metric_rl_cli::{config_to_toml, load_config, parse_seeds, run_sweep, summarize, sweep_threads, write_summary};

/// Train policies toward global performance metrics and summarize the
/// learning curves.
#[derive(Parser)]
#[command(name = "metric-rl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from an experiment file and write one curve CSV per seed plus a merged file.
    Run {
        config: PathBuf,
        /// Single seed; overrides the file's `run.seed`.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Inclusive range `A..B` or comma-separated list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Mean, standard error and sample standard deviation of the evaluation
    /// score per iteration across the seed files of a directory.
    Summarize {
        dir: PathBuf,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default experiment file of an environment.
    Defaults { env: String },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            seeds,
            out,
        } => {
            let cfg = load_config(&config)?;
            let seeds = match (seed, seeds) {
                (Some(s), _) => vec![s],
                (None, Some(spec)) => parse_seeds(&spec)?,
                (None, None) => vec![cfg.run.seed],
            };
            let logs = run_sweep(&cfg, &seeds, &out, sweep_threads()?)?;
            for log in &logs {
                println!("seed {}: final score {}", log.seed, log.final_score().unwrap_or(f64::NAN));
            }
        }
        Command::Summarize { dir, out } => {
            let rows = summarize(&dir)?;
            match out {
                Some(path) => write_summary(&rows, std::fs::File::create(path)?)?,
                None => write_summary(&rows, std::io::stdout().lock())?,
            }
        }
        Command::Defaults { env } => {
            let Ok(cfg) = RunConfig::defaults(&env) else {
                bail!(
                    "unknown environment `{env}`; expected one of {:?}",
                    metric_rl::trainer::ENV_NAMES
                );
            };
            print!("{}", config_to_toml(&cfg)?);
        }
    }
    Ok(())
}
