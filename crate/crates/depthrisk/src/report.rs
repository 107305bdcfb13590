//! CSV tables and run manifests.
//!
//! Numbers use Rust's shortest round-trip formatting, so every value reads
//! back to the same `f64`. Files are UTF-8 with LF line endings.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use depthrisk_core::experiments::{ConvergenceReport, RateEntry, ReplicationReport};
use depthrisk_core::stats::Spread;
use serde::Serialize;

use crate::error::Result;
use crate::io::{to_json, write_atomic};

pub const SUMMARY_HEADER: [&str; 8] = [
    "n",
    "alpha",
    "truth",
    "truth_se",
    "mean",
    "sigma_hat",
    "rmae",
    "degenerate_count",
];
pub const RATES_HEADER: [&str; 4] = ["n", "alpha", "delta", "V"];

/// Marker for a statistic that could not be computed.
pub const NA: &str = "NA";

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn summary_csv(report: &ReplicationReport) -> Vec<u8> {
    table(
        &SUMMARY_HEADER,
        report.cells.iter().map(|c| {
            vec![
                c.n.to_string(),
                c.alpha.to_string(),
                c.truth.to_string(),
                c.truth_se.to_string(),
                c.mean.to_string(),
                c.sigma_hat.to_string(),
                c.rmae.to_string(),
                c.degenerate_count.to_string(),
            ]
        }),
    )
}

pub fn rates_csv(rates: &[RateEntry]) -> Vec<u8> {
    table(
        &RATES_HEADER,
        rates.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.alpha.to_string(),
                r.delta.to_string(),
                r.v.to_string(),
            ]
        }),
    )
}

const STATISTICS: [&str; 4] = ["sup", "hausdorff", "symdiff", "scatter"];

pub fn convergence_header() -> Vec<String> {
    let mut h = vec![String::from("n")];
    for s in STATISTICS {
        for q in ["median", "q25", "q75"] {
            h.push(format!("{s}_{q}"));
        }
    }
    h
}

/// One row per `n`, then a `slope` row holding the log-log slopes of the
/// medians (quartile columns are `NA` there).
pub fn convergence_csv(report: &ConvergenceReport) -> Vec<u8> {
    let header = convergence_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string()];
            for s in [r.sup_norm, r.hausdorff, r.sym_diff, r.scatter] {
                let Spread { median, q25, q75 } = s;
                row.extend([median.to_string(), q25.to_string(), q75.to_string()]);
            }
            row
        })
        .collect();
    let sl = report.slopes;
    let mut slope_row = vec![String::from("slope")];
    for s in [sl.sup_norm, sl.hausdorff, sl.sym_diff, sl.scatter] {
        slope_row.push(s.map_or_else(|| NA.to_string(), |v| v.to_string()));
        slope_row.extend([NA.to_string(), NA.to_string()]);
    }
    rows.push(slope_row);
    table(&header, rows)
}

/// Coordinates, depth and gradient per point.
pub fn depth_csv(points: &[Vec<f64>], depths: &[f64], gradients: &[Vec<f64>]) -> Vec<u8> {
    let d = points.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push(String::from("depth"));
    header.extend((0..d).map(|i| format!("grad{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        &header,
        points.iter().zip(depths).zip(gradients).map(|((p, v), g)| {
            p.iter()
                .chain(std::iter::once(v))
                .chain(g)
                .map(f64::to_string)
                .collect()
        }),
    )
}

pub fn points_csv(points: &[Vec<f64>]) -> Vec<u8> {
    let d = points.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(&header, points.iter().map(|p| p.iter().map(f64::to_string).collect()))
}

/// Everything needed to rerun an invocation, plus timing.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub config: C,
    pub master_seed: u64,
    pub version: &'static str,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(config: C, master_seed: u64, threads: usize, started: SystemTime, elapsed: Duration) -> Self {
        Self {
            config,
            master_seed,
            version: env!("CARGO_PKG_VERSION"),
            threads,
            started_unix_seconds: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_seconds: elapsed.as_secs_f64(),
        }
    }
}

/// Writes `summary.csv`, `rates.csv` and `manifest.json` into `dir`.
pub fn write_experiment<C: Serialize>(
    dir: &Path,
    report: &ReplicationReport,
    rates: &[RateEntry],
    manifest: &Manifest<C>,
) -> Result<()> {
    let summary = summary_csv(report);
    let rates = rates_csv(rates);
    let manifest = to_json(manifest);
    write_atomic(&dir.join("summary.csv"), &summary)?;
    write_atomic(&dir.join("rates.csv"), &rates)?;
    write_atomic(&dir.join("manifest.json"), manifest.as_bytes())
}

/// Writes `convergence.csv` and `manifest.json` into `dir`.
pub fn write_convergence<C: Serialize>(dir: &Path, report: &ConvergenceReport, manifest: &Manifest<C>) -> Result<()> {
    let table = convergence_csv(report);
    let manifest = to_json(manifest);
    write_atomic(&dir.join("convergence.csv"), &table)?;
    write_atomic(&dir.join("manifest.json"), manifest.as_bytes())
}
