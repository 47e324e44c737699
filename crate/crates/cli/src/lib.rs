//! Experiment plumbing behind the `metric-rl` binary: configuration files,
//! seed sweeps, learning-curve CSVs and their summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use metric_rl::trainer::{run, RunConfig, TrainLog};
use rayon::prelude::*;

pub const CURVE_HEADER: [&str; 9] = [
    "seed",
    "outer_iteration",
    "env_steps",
    "eval_score",
    "reward_loss",
    "diversity_term",
    "ppo_objective",
    "critic_loss",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 6] = ["outer_iteration", "seeds", "mean_env_steps", "mean", "std_error", "std_dev"];

pub const MERGED_FILE: &str = "merged.csv";

/// Parse an experiment file; unknown keys are rejected by name.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).context("invalid experiment file")?;
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

pub fn config_to_toml(cfg: &RunConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

/// `"3"`, `"0..19"` (inclusive) or `"1,4,9"`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range `{spec}`"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range `{spec}`"))?;
        ensure!(a <= b, "empty seed range `{spec}`");
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = spec
        .split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed `{s}`")))
        .collect::<Result<_>>()?;
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    ensure!(sorted.len() == seeds.len(), "duplicate seeds in `{spec}`");
    Ok(seeds)
}

/// Like C's `%.9g`: 9 significant digits, trailing zeros removed,
/// exponent notation outside `[1e-5, 1e9)`.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn curve_rows(log: &TrainLog) -> Vec<[String; 9]> {
    log.records
        .iter()
        .map(|r| {
            [
                log.seed.to_string(),
                r.outer_iteration.to_string(),
                r.env_steps.to_string(),
                format_sig(r.eval_score),
                format_sig(r.reward_loss),
                format_sig(r.diversity_term),
                format_sig(r.ppo_objective),
                format_sig(r.critic_loss),
                r.wall_ms.to_string(),
            ]
        })
        .collect()
}

pub fn write_curves(path: &Path, logs: &[&TrainLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CURVE_HEADER)?;
    for log in logs {
        for row in curve_rows(log) {
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn seed_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

/// Thread cap for seed sweeps from `METRIC_RL_THREADS`.
pub fn sweep_threads() -> Result<Option<usize>> {
    match std::env::var("METRIC_RL_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("METRIC_RL_THREADS must be a positive integer, got `{v}`"))?;
            ensure!(n > 0, "METRIC_RL_THREADS must be positive");
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Train one run per seed in parallel, write `seed_<S>.csv` for each and a
/// merged file ordered by seed. Returns the logs in seed order.
pub fn run_sweep(cfg: &RunConfig, seeds: &[u64], out: &Path, threads: Option<usize>) -> Result<Vec<TrainLog>> {
    ensure!(!seeds.is_empty(), "no seeds given");
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let mut logs: Vec<TrainLog> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| -> Result<TrainLog> {
                let mut c = cfg.clone();
                c.run.seed = seed;
                let log = run(&c).with_context(|| format!("seed {seed}"))?;
                write_curves(&seed_file(out, seed), &[&log])?;
                log::info!("seed {seed}: final score {:?}", log.final_score());
                Ok(log)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    logs.sort_by_key(|l| l.seed);
    let refs: Vec<&TrainLog> = logs.iter().collect();
    write_curves(&out.join(MERGED_FILE), &refs)?;
    Ok(logs)
}

/// Per-iteration statistics across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub outer_iteration: u64,
    pub seeds: usize,
    pub mean_env_steps: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std_dev: f64,
}

/// `(outer_iteration, env_steps, eval_score)` rows of one curve file.
fn read_curve(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    ensure!(header == CURVE_HEADER, "{}: unexpected header {:?}", path.display(), header);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let it: u64 = rec[1]
            .parse()
            .with_context(|| format!("{}: bad outer_iteration", path.display()))?;
        let steps: f64 = rec[2].parse().with_context(|| format!("{}: bad env_steps", path.display()))?;
        let score: f64 = rec[3]
            .parse()
            .with_context(|| format!("{}: bad eval_score", path.display()))?;
        rows.push((it, steps, score));
    }
    Ok(rows)
}

/// Per-seed curve files of a sweep directory, sorted by name.
pub fn curve_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("seed_") && n.ends_with(".csv"))
    });
    files.sort();
    Ok(files)
}

pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>> {
    let files = curve_files(dir)?;
    if files.is_empty() {
        bail!("no seed_*.csv files in {}", dir.display());
    }
    let curves: Vec<Vec<(u64, f64, f64)>> = files.iter().map(|f| read_curve(f)).collect::<Result<_>>()?;
    let grid: Vec<u64> = curves[0].iter().map(|r| r.0).collect();
    for (f, c) in files.iter().zip(&curves) {
        let g: Vec<u64> = c.iter().map(|r| r.0).collect();
        ensure!(
            g == grid,
            "{} has a different iteration grid than {}",
            f.display(),
            files[0].display()
        );
    }
    let mut by_iter: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for c in &curves {
        for (i, (_, steps, score)) in c.iter().enumerate() {
            let e = by_iter.entry(i).or_default();
            e.0.push(*steps);
            e.1.push(*score);
        }
    }
    Ok(by_iter
        .into_iter()
        .map(|(i, (steps, scores))| {
            let n = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / n;
            let std_dev = if scores.len() > 1 {
                (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                outer_iteration: grid[i],
                seeds: scores.len(),
                mean_env_steps: steps.iter().sum::<f64>() / n,
                mean,
                std_error: std_dev / n.sqrt(),
                std_dev,
            }
        })
        .collect())
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.outer_iteration.to_string(),
            r.seeds.to_string(),
            format_sig(r.mean_env_steps),
            format_sig(r.mean),
            format_sig(r.std_error),
            format_sig(r.std_dev),
        ])?;
    }
    w.flush()?;
    Ok(())
}
