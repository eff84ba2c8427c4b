//! Report types and their files on disk.

use super::config::ExperimentConfig;
use super::fit::{DecayFit, TrendTest};
use crate::engine::{io, Ensemble};
use crate::error::Result;
use crate::rates::EntropyConstants;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Every fitted distance is numerically zero.
    PassDegenerate,
    /// The predicted rate is not positive; the run is informational.
    NoContractionPredicted,
    /// No verdict could be formed (fixed point, prediction or fit failed).
    Inconclusive,
    TrendPass,
    TrendFail,
}

/// Thresholds behind the verdict, stored with every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TolerancePolicy {
    /// Pass needs `λ̂ ≥ rate_fraction · λ_pred`.
    pub rate_fraction: f64,
    pub min_r2: f64,
    /// Share of nonincreasing steps required by trend-only metrics.
    pub trend_fraction: f64,
    /// Distances at or below this count as zero.
    pub degenerate_threshold: f64,
    /// In independent coupling, points below this multiple of the sampling
    /// floor are left out of the fit.
    pub floor_multiple: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            rate_fraction: 0.75,
            min_r2: 0.9,
            trend_fraction: 0.8,
            degenerate_threshold: 1e-12,
            floor_multiple: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    /// Rate in the units of `d_n`: `d_n ≲ c e^{−λn}`.
    pub lambda: f64,
    /// Formula the rate comes from.
    pub formula: String,
    /// Branch values and other intermediate constants.
    pub diagnostics: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSummary {
    pub converged: bool,
    pub periods: usize,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub seed: u64,
    pub n: usize,
    pub dt: f64,
    pub steps_per_period: u64,
    pub periods: usize,
    pub workers: usize,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub scenario: String,
    pub metric: String,
    pub coupling: String,
    pub predicted: Option<Prediction>,
    pub prediction_error: Option<String>,
    /// `d_n` for `n = 0..=periods`.
    pub distances: Vec<f64>,
    /// Periods that entered the fit.
    pub fitted_periods: Vec<usize>,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    /// Distance between two independent copies of the reference at the
    /// last period; only for independent coupling.
    pub noise_floor: Option<f64>,
    pub trend: Option<TrendTest>,
    pub entropy_constants: Option<EntropyConstants>,
    pub verdict: Verdict,
    pub tolerance: TolerancePolicy,
    pub fixed_point: FixedPointSummary,
    pub environment: Environment,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
}

/// A finished run: the report plus the snapshots behind it.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: ErgodicityReport,
    pub test: Vec<Ensemble>,
    pub reference: Vec<Ensemble>,
}

/// Writes `report.json`, `config.json`, `distances.csv` and the binary
/// snapshots of both chains under `snapshots/{test,reference}/`.
pub fn emit_report(exp: &Experiment, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report = dir.join("report.json");
    fs::write(&report, serde_json::to_string_pretty(&exp.report)? + "\n")?;
    written.push(report);
    let config = dir.join("config.json");
    fs::write(&config, exp.report.config.to_json() + "\n")?;
    written.push(config);
    let csv_path = dir.join("distances.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["period", "distance"])?;
    for (n, d) in exp.report.distances.iter().enumerate() {
        w.write_record([n.to_string(), d.to_string()])?;
    }
    w.flush()?;
    written.push(csv_path);
    let snaps = dir.join("snapshots");
    if !exp.test.is_empty() {
        written.extend(io::write_binary(&snaps.join("test"), &exp.test)?);
    }
    if !exp.reference.is_empty() {
        written.extend(io::write_binary(&snaps.join("reference"), &exp.reference)?);
    }
    Ok(written)
}
