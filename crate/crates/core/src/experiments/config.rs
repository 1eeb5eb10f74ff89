//! JSON experiment configuration.

use crate::beamforming::BeamformerKind;
use crate::bounds::{BoundKind, Normalization, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fading::AgingParams;
use crate::power::{split_budget, BudgetMode, LookupTable, ReliabilityBudget, ThresholdModel};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_CHUNK_SIZE: usize = 4096;
pub const DEFAULT_BINS: usize = 50;

/// How the decoding-error target maps to an iSNR threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdConfig {
    NormalApproximation { blocklength_bits: usize, rate: f64 },
    LookupTable { table: Vec<(f64, f64)> },
    /// CSV file with header `p_dec,isnr0_db`, relative to the config file.
    LookupCsv { path: PathBuf },
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig::NormalApproximation {
            blocklength_bits: 128,
            rate: 0.5,
        }
    }
}

impl ThresholdConfig {
    pub fn resolve(&self, base_dir: &Path) -> Result<ThresholdModel> {
        match self {
            ThresholdConfig::NormalApproximation { blocklength_bits, rate } => {
                ThresholdModel::normal_approximation(*blocklength_bits, *rate).map_err(to_config)
            }
            ThresholdConfig::LookupTable { table } => Ok(ThresholdModel::LookupTable {
                table: LookupTable::new(table.clone()).map_err(to_config)?,
            }),
            ThresholdConfig::LookupCsv { path } => {
                let path = base_dir.join(path);
                let table = LookupTable::from_csv_path(&path).map_err(|e| {
                    Error::Config(format!("threshold.path `{}`: {e}", path.display()))
                })?;
                Ok(ThresholdModel::LookupTable { table })
            }
        }
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn default_budget_mode() -> BudgetMode {
    BudgetMode::SplitEq15
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_chunk_size() -> usize {
    DEFAULT_CHUNK_SIZE
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn default_normalization() -> Normalization {
    Normalization::PerTxRxPair
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schemes: Vec<BeamformerKind>,
    pub m_tx: usize,
    pub n_rx: usize,
    pub k_groups: usize,
    pub velocity_mps: f64,
    pub carrier_hz: f64,
    pub lag_s: f64,
    pub p_per: f64,
    pub p_dec: f64,
    /// Monte Carlo channel evolutions.
    pub trials: u64,
    /// Independent CSIT draws averaged over in sweeps.
    pub channel_draws: usize,
    pub seed: u64,
    pub output_path: PathBuf,

    /// Overrides the outage share implied by `p_per` and `p_dec`.
    #[serde(default)]
    pub p_out: Option<f64>,
    #[serde(default = "default_budget_mode")]
    pub budget_mode: BudgetMode,
    #[serde(default)]
    pub m_grid: Vec<usize>,
    #[serde(default)]
    pub k_grid: Vec<usize>,
    #[serde(default)]
    pub p_dec_grid: Vec<f64>,
    /// Bound kinds to evaluate; empty means the experiment's default.
    #[serde(default)]
    pub bounds: Vec<BoundKind>,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    /// Linear transmit-power cap; unlimited when absent.
    #[serde(default)]
    pub power_cap: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Outage runs: keep one CSIT draw for every trial instead of redrawing.
    #[serde(default)]
    pub reuse_h0: bool,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.schemes.is_empty() {
            return bad("schemes", "at least one scheme is required".into());
        }
        if self.m_tx == 0 {
            return bad("m_tx", "must be >= 1".into());
        }
        if self.n_rx == 0 {
            return bad("n_rx", "must be >= 1".into());
        }
        if self.k_groups == 0 || self.k_groups > self.m_tx {
            return bad("k_groups", format!("must lie in [1, m_tx], got {}", self.k_groups));
        }
        if self.trials == 0 {
            return bad("trials", "must be >= 1".into());
        }
        if self.channel_draws == 0 {
            return bad("channel_draws", "must be >= 1".into());
        }
        if self.chunk_size == 0 {
            return bad("chunk_size", "must be >= 1".into());
        }
        if self.bins == 0 {
            return bad("bins", "must be >= 1".into());
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("must be > 0, got {}", self.tol));
        }
        if !(self.p_per > 0.0 && self.p_per < 1.0) {
            return bad("p_per", format!("must lie in (0, 1), got {}", self.p_per));
        }
        if !(self.p_dec > 0.0 && self.p_dec < self.p_per) {
            return bad("p_dec", format!("must lie in (0, p_per), got {}", self.p_dec));
        }
        if let Some(p) = self.p_out {
            if !(p > 0.0 && p < 1.0) {
                return bad("p_out", format!("must lie in (0, 1), got {p}"));
            }
        }
        if let Some(&p) = self.p_dec_grid.iter().find(|&&p| !(p > 0.0 && p < self.p_per)) {
            return bad("p_dec_grid", format!("{p} is outside (0, p_per)"));
        }
        if self.m_grid.contains(&0) {
            return bad("m_grid", "entries must be >= 1".into());
        }
        if self.k_grid.contains(&0) {
            return bad("k_grid", "entries must be >= 1".into());
        }
        if let Some(c) = self.power_cap {
            if !(c > 0.0) {
                return bad("power_cap", format!("must be > 0, got {c}"));
            }
        }
        if self.output_path.as_os_str().is_empty() {
            return bad("output_path", "must not be empty".into());
        }
        self.aging().map_err(|e| Error::Config(format!("velocity_mps/carrier_hz/lag_s: {e}")))?;
        Ok(())
    }

    pub fn aging(&self) -> Result<AgingParams> {
        AgingParams::from_kinematics(self.velocity_mps, self.carrier_hz, self.lag_s)
    }

    /// Reliability split for decoding target `p_dec`, honouring `p_out` if set.
    pub fn budget_for(&self, p_dec: f64) -> Result<ReliabilityBudget> {
        split_budget(self.p_per, Some(p_dec), self.budget_mode).map_err(to_config)
    }

    /// Budget at the configured `p_dec`, with `p_out` overridden when set.
    pub fn budget(&self) -> Result<ReliabilityBudget> {
        let mut b = self.budget_for(self.p_dec)?;
        if let Some(p) = self.p_out {
            b.p_out = p;
        }
        Ok(b)
    }

    pub fn p_out(&self) -> Result<f64> {
        Ok(self.budget()?.p_out)
    }

    pub fn m_values(&self) -> Vec<usize> {
        if self.m_grid.is_empty() {
            vec![self.m_tx]
        } else {
            self.m_grid.clone()
        }
    }

    pub fn k_values(&self) -> Vec<usize> {
        if self.k_grid.is_empty() {
            vec![self.k_groups]
        } else {
            self.k_grid.clone()
        }
    }

    pub fn bounds_or(&self, default: &[BoundKind]) -> Vec<BoundKind> {
        if self.bounds.is_empty() {
            default.to_vec()
        } else {
            self.bounds.clone()
        }
    }
}
