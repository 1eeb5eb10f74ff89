//! Seeded Monte Carlo experiments, their CSV outputs and run manifests.
//!
//! Every output is a pure function of `(config, seed)`: work is split into
//! fixed chunks with one random stream each, so the worker count never
//! changes a result.

mod common;
pub mod config;
pub mod outage;
pub mod runner;
pub mod sweeps;

pub use config::{ExperimentConfig, ThresholdConfig};
pub use outage::{clopper_pearson_upper, estimate_outage, estimate_outage_with, OutageEstimate};
pub use runner::Runner;
pub use sweeps::{
    bounds_compare, gain_pdf, hardening_sweep, power_vs_m, power_vs_pdec, recycling_closed_form, recycling_ratio,
    BoundsCompareRow, HardeningRow, PdfRow, PowerMRow, PowerPdecRow, RecyclingRow,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Outage,
    Pdf,
    Hardening,
    PowerPdec,
    PowerM,
    Recycling,
    BoundsCompare,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Outage,
        Experiment::Pdf,
        Experiment::Hardening,
        Experiment::PowerPdec,
        Experiment::PowerM,
        Experiment::Recycling,
        Experiment::BoundsCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Outage => "outage",
            Experiment::Pdf => "pdf",
            Experiment::Hardening => "hardening",
            Experiment::PowerPdec => "power-pdec",
            Experiment::PowerM => "power-m",
            Experiment::Recycling => "recycling",
            Experiment::BoundsCompare => "bounds-compare",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment `{s}`")))
    }
}

/// Writes `rows` as CSV with a header row taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub crate_version: &'static str,
    pub git_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub rng: &'static str,
    pub csv: PathBuf,
    pub rows: usize,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
}

/// Files produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Runs `experiment` and writes `<out_dir>/<stem>.csv` plus `<stem>.json`,
/// where `stem` comes from `cfg.output_path`. `config_dir` anchors relative
/// paths inside the config (lookup tables).
pub fn run_experiment(
    experiment: Experiment,
    cfg: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
    workers: usize,
) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let runner = Runner::new(workers, cfg.chunk_size)?;
    let stem = cfg
        .output_path
        .file_stem()
        .ok_or_else(|| Error::Config("output_path: no file name".into()))?;
    let dir = if out_dir.as_os_str().is_empty() {
        cfg.output_path.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        out_dir.to_path_buf()
    };
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir)?;
    }
    let csv = dir.join(stem).with_extension("csv");
    let manifest = dir.join(stem).with_extension("json");
    let mut warnings = Vec::new();
    let rows = match experiment {
        Experiment::Outage => {
            warnings.extend(outage::outage_warnings(cfg));
            let rows = estimate_outage(cfg, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
        Experiment::Pdf => {
            let rows = gain_pdf(cfg, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
        Experiment::Hardening => {
            let rows = hardening_sweep(cfg, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
        Experiment::PowerPdec => {
            let model = cfg.threshold.resolve(config_dir)?;
            let rows = power_vs_pdec(cfg, &model, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
        Experiment::PowerM => {
            let model = cfg.threshold.resolve(config_dir)?;
            let rows = power_vs_m(cfg, &model, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
        Experiment::Recycling => {
            let rows = recycling_ratio(cfg, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
        Experiment::BoundsCompare => {
            let rows = bounds_compare(cfg, &runner)?;
            write_csv(&csv, &rows)?;
            rows.len()
        }
    };
    let m = Manifest {
        experiment,
        crate_version: env!("CARGO_PKG_VERSION"),
        git_hash: git_hash(),
        seed: cfg.seed,
        workers,
        rng: crate::rng::ALGORITHM,
        csv: csv.clone(),
        rows,
        wall_time_s: started.elapsed().as_secs_f64(),
        warnings,
        config: cfg.clone(),
    };
    std::fs::write(&manifest, serde_json::to_string_pretty(&m)?)?;
    Ok(RunOutput { csv, manifest, rows })
}
