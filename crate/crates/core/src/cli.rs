//! Command-line front end: argument parsing, thread-pool setup, command
//! dispatch, and artifact output.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::densities::SamplerMode;
use crate::error::{Error, Result};
use crate::experiment::{
    covariance_diagnostic, rate_fit, run_scenario, smoothness_trace, RunReport, Scenario,
    TestFunction,
};
use crate::operator::GridFunction;
use crate::report;

pub const THREADS_ENV: &str = "NONSTAT_KRR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "nonstat-krr",
    version,
    about = "Kernel ridge regression under time-varying sampling distributions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario: stream the estimator over all replicates and write
    /// the report, summary, and grid CSV artifacts.
    Run(RunArgs),
    /// Estimate the empirical convergence rate over a checkpoint ladder.
    Rate(RateArgs),
    /// Diagnostics: the smoothness-norm trace or the covariance-summability
    /// table.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Override the replicate count.
    #[arg(long, value_name = "N")]
    pub replicates: Option<usize>,
    /// Worker threads (default: NONSTAT_KRR_THREADS or logical cores).
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Checkpoint ladder, comma separated (default: 250,500,1000,2000,4000).
    #[arg(long, value_name = "LIST")]
    pub ts: Option<String>,
    /// Smoothness exponent used for the theoretical rate field.
    #[arg(long, default_value_t = 1.0, value_name = "R")]
    pub smoothness_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagnoseMode {
    Smoothness,
    Covariance,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Which diagnostic to produce.
    #[arg(long, value_enum)]
    pub mode: DiagnoseMode,
    /// Maximum covariance lag.
    #[arg(long, default_value_t = 50, value_name = "K")]
    pub max_lag: usize,
}

/// Resolve the worker-pool size: flag, then env var, then logical cores.
fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    })
    .filter(|&n| n > 0)
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

struct Prepared {
    config: Config,
    scenario: Scenario,
    out_dir: PathBuf,
    threads: usize,
}

fn prepare(common: &CommonArgs) -> Result<Prepared> {
    let mut config = Config::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        config.seeds.master = seed;
    }
    if let Some(replicates) = common.replicates {
        config.seeds.replicates = replicates;
    }
    if let Some(dir) = &common.output {
        config.output.directory = dir.display().to_string();
    }
    let scenario = config.to_scenario()?;
    let out_dir = PathBuf::from(&config.output.directory);
    let threads = thread_count(common.threads);
    Ok(Prepared {
        config,
        scenario,
        out_dir,
        threads,
    })
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot build worker pool: {e}")))?;
    pool.install(job)
}

fn write_grid_csv(path: &Path, f: &GridFunction) -> Result<()> {
    let mut buf = Vec::new();
    f.write_csv(&mut buf)?;
    report::atomic_write(path, &buf)
}

/// Run the scenario and write every configured artifact into `out_dir`:
/// the per-replicate report, the JSON summary, and the grid CSVs behind the
/// target function, the checkpoint estimates, and the average densities.
pub fn run_and_write(config: &Config, scenario: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let report_data = run_scenario(scenario)?;
    let wants_csv = config.output.formats.iter().any(|f| f == "csv");
    let wants_json = config.output.formats.iter().any(|f| f == "json");

    if wants_csv {
        report::atomic_write(
            &out_dir.join("report.csv"),
            report::report_csv(&report_data).as_bytes(),
        )?;
        let mu = crate::operator::build_regression_function(
            &scenario.kernel,
            &scenario.h,
            &scenario.grid,
        )?;
        write_grid_csv(&out_dir.join("mu.csv"), &mu)?;
        for (t, estimate) in scenario.checkpoints.iter().zip(report_data.estimates.iter()) {
            write_grid_csv(&out_dir.join(format!("estimate_t{t}.csv")), estimate)?;
        }
        for &t in &scenario.checkpoints {
            let avg = scenario.schedule.average_density(t)?;
            let curve = GridFunction::from_fn(&scenario.grid, |x| avg.pdf(x));
            write_grid_csv(&out_dir.join(format!("avg_density_t{t}.csv")), &curve)?;
        }
    }
    if wants_json {
        report::atomic_write(
            &out_dir.join("summary.json"),
            report::summary_json(&report_data, config)?.as_bytes(),
        )?;
    }
    Ok(report_data)
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let prep = prepare(&args.common)?;
    let scenario = &prep.scenario;
    let report_data: RunReport = with_pool(prep.threads, || {
        run_and_write(&prep.config, scenario, &prep.out_dir)
    })?;

    println!(
        "scenario: {} samples, {} replicates, seed {}",
        scenario.schedule.total(),
        scenario.replicates,
        scenario.master_seed
    );
    println!("        t        gamma    mean sup err     std    mean right err");
    for (c, a) in report_data
        .checkpoints
        .iter()
        .zip(report_data.aggregates.iter())
    {
        println!(
            "{:>9}  {:>11.5e}  {:>14.6}  {:>6.4}  {:>14.6}",
            c.t, c.gamma, a.mean_sup_error, a.std_sup_error, a.mean_sup_error_right
        );
    }
    let total_wall: f64 = report_data.wall_seconds.iter().sum();
    println!(
        "replicate wall time: total {:.1}s, mean {:.1}s; outputs in {}",
        total_wall,
        total_wall / report_data.wall_seconds.len().max(1) as f64,
        prep.out_dir.display()
    );
    Ok(())
}

fn parse_ladder(ts: &str) -> Result<Vec<usize>> {
    ts.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Argument(format!("invalid ladder entry '{s}'")))
        })
        .collect()
}

pub fn cmd_rate(args: &RateArgs) -> Result<()> {
    let prep = prepare(&args.common)?;
    let ladder = match &args.ts {
        Some(ts) => parse_ladder(ts)?,
        None => vec![250, 500, 1000, 2000, 4000],
    };
    let scenario = &prep.scenario;
    let replicates = scenario.replicates;
    let estimate = with_pool(prep.threads, || {
        rate_fit(scenario, &ladder, replicates, args.smoothness_r)
    })?;
    report::atomic_write(
        &prep.out_dir.join("rate.csv"),
        report::rate_csv(&estimate).as_bytes(),
    )?;
    report::atomic_write(
        &prep.out_dir.join("rate.json"),
        report::rate_json(&estimate)?.as_bytes(),
    )?;
    println!(
        "rate fit over {:?}: slope {:.4}, r2 {:.4}, theoretical upper-bound exponent {:.4}",
        ladder, estimate.slope, estimate.r2, estimate.theoretical
    );
    Ok(())
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let prep = prepare(&args.common)?;
    let scenario = &prep.scenario;
    match args.mode {
        DiagnoseMode::Smoothness => {
            let trace = smoothness_trace(scenario, &scenario.checkpoints)?;
            report::atomic_write(
                &prep.out_dir.join("smoothness.csv"),
                report::smoothness_csv(&trace).as_bytes(),
            )?;
            for (t, v) in &trace {
                println!("t={t:>8}  smoothness_sq={v:.6}");
            }
        }
        DiagnoseMode::Covariance => {
            let replicates = args.common.replicates.unwrap_or(10_000);
            let mode = scenario.sampler;
            let rows = with_pool(prep.threads, || {
                covariance_diagnostic(
                    &scenario.schedule,
                    mode,
                    &TestFunction::all(),
                    args.max_lag,
                    replicates,
                    scenario.master_seed,
                )
            })?;
            report::atomic_write(
                &prep.out_dir.join("covariance.csv"),
                report::covariance_csv(&rows).as_bytes(),
            )?;
            let flagged = rows
                .iter()
                .filter(|r| r.lag >= 1 && r.estimate.abs() > 3.0 * r.std_error)
                .count();
            println!(
                "covariance diagnostic ({} chains, {} sampler): {} rows, {} positive-lag estimates beyond 3 standard errors",
                replicates,
                match mode {
                    SamplerMode::Independent => "independent",
                    SamplerMode::Metropolis { .. } => "metropolis",
                },
                rows.len(),
                flagged
            );
        }
    }
    Ok(())
}

/// Dispatch a parsed command, returning the process exit code.
pub fn dispatch(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Rate(args) => cmd_rate(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
