//! Report serialization: CSV with round-trip precision, the JSON summary,
//! and atomic file writes (temp + rename, so partial runs never leave
//! truncated artifacts).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiment::{CovarianceRow, RateEstimate, RunReport};

/// Full round-trip float formatting: 17 significant digits, '.' separator.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write bytes atomically: to `<path>.tmp` in the same directory, then
/// rename over the destination.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| Error::Argument(format!("no parent directory for {}", path.display())))?;
    std::fs::create_dir_all(dir)?;
    let mut tmp = PathBuf::from(path);
    let mut name = tmp
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    tmp.set_file_name(name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One row per (checkpoint, replicate), with the data-free checkpoint
/// quantities repeated on each row. Wall times are intentionally absent so
/// identical runs serialize to identical bytes.
pub fn report_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(
        "replicate,seed,t,gamma,sup_error,sup_error_right,smoothness_sq,data_free_distance\n",
    );
    for obs in &report.observations {
        let summary = report
            .checkpoints
            .iter()
            .find(|c| c.t == obs.t)
            .expect("observation at a known checkpoint");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            obs.replicate,
            obs.seed,
            obs.t,
            fmt_float(obs.gamma),
            fmt_float(obs.sup_error),
            fmt_float(obs.sup_error_right),
            fmt_float(summary.smoothness_sq),
            fmt_float(summary.data_free_distance),
        );
    }
    out
}

#[derive(Serialize)]
struct SummaryCheckpoint {
    t: usize,
    gamma: f64,
    smoothness_sq: f64,
    data_free_distance: f64,
    mean_sup_error: f64,
    std_sup_error: f64,
    mean_sup_error_right: f64,
    std_sup_error_right: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'static str,
    master_seed: u64,
    replicates: usize,
    replicate_seeds: &'a [u64],
    checkpoints: Vec<SummaryCheckpoint>,
    config: &'a Config,
}

/// JSON summary: aggregates, seeds, version, and the config echo (which
/// re-parses to an equivalent scenario).
pub fn summary_json(report: &RunReport, config: &Config) -> Result<String> {
    let checkpoints = report
        .checkpoints
        .iter()
        .zip(report.aggregates.iter())
        .map(|(c, a)| SummaryCheckpoint {
            t: c.t,
            gamma: c.gamma,
            smoothness_sq: c.smoothness_sq,
            data_free_distance: c.data_free_distance,
            mean_sup_error: a.mean_sup_error,
            std_sup_error: a.std_sup_error,
            mean_sup_error_right: a.mean_sup_error_right,
            std_sup_error_right: a.std_sup_error_right,
        })
        .collect();
    let summary = Summary {
        version: env!("CARGO_PKG_VERSION"),
        master_seed: config.seeds.master,
        replicates: report.replicate_seeds.len(),
        replicate_seeds: &report.replicate_seeds,
        checkpoints,
        config,
    };
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Numeric(format!("summary serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// `(t, mean sup error, stddev)` rows for the rate ladder.
pub fn rate_csv(estimate: &RateEstimate) -> String {
    let mut out = String::from("t,mean_sup_error,std_sup_error\n");
    for &(t, mean, sd) in &estimate.points {
        let _ = writeln!(out, "{},{},{}", t, fmt_float(mean), fmt_float(sd));
    }
    out
}

#[derive(Serialize)]
struct RateJson {
    slope: f64,
    intercept: f64,
    r2: f64,
    theoretical: f64,
}

pub fn rate_json(estimate: &RateEstimate) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&RateJson {
        slope: estimate.slope,
        intercept: estimate.intercept,
        r2: estimate.r2,
        theoretical: estimate.theoretical,
    })
    .map_err(|e| Error::Numeric(format!("rate serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn smoothness_csv(trace: &[(usize, f64)]) -> String {
    let mut out = String::from("t,smoothness_sq\n");
    for &(t, v) in trace {
        let _ = writeln!(out, "{},{}", t, fmt_float(v));
    }
    out
}

pub fn covariance_csv(rows: &[CovarianceRow]) -> String {
    let mut out = String::from("function,anchor,lag,estimate,std_error,partial_sum\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.function,
            r.anchor,
            r.lag,
            fmt_float(r.estimate),
            fmt_float(r.std_error),
            fmt_float(r.partial_sum),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_has_full_precision() {
        let v = 0.1234567890123456789;
        let s = fmt_float(v);
        let back: f64 = s.parse().unwrap();
        assert_eq!(v.to_bits(), back.to_bits());
        assert!(s.contains('.'));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = std::env::temp_dir().join(format!("nskrr-report-test-{}", std::process::id()));
        let path = dir.join("a.csv");
        atomic_write(&path, b"x,y\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"x,y\n");
        let leftovers: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
