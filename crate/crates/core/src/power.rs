//! Pessimistic power adaptation: reliability split, iSNR threshold,
//! transmit power and the CSIT-age cap.

use crate::beamforming::{build_weights, BeamformerKind, GroupingPlan};
use crate::bounds::{chernoff_lower_bound, hardened_limit, DEFAULT_TOL};
use crate::error::{invalid, Error, Result};
use crate::fading::{bessel_j0_inverse, AgingParams, ChannelSnapshot};
use crate::gain_stats::gain_moments;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{LOG2_E, PI, SQRT_2};
use std::io::Read;
use std::path::Path;

pub const LOOKUP_HEADER: [&str; 2] = ["p_dec", "isnr0_db"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// `p_out = p_dec = p_per / 2`.
    PessimisticEq16,
    /// `p_out + p_dec = p_per`.
    SplitEq15,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBudget {
    pub p_per: f64,
    pub p_dec: f64,
    pub p_out: f64,
    pub mode: BudgetMode,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {p}")))
    }
}

/// Splits `p_per` into decoding and outage shares. `p_dec` is required for
/// [`BudgetMode::SplitEq15`] and ignored by the pessimistic mode.
pub fn split_budget(p_per: f64, p_dec: Option<f64>, mode: BudgetMode) -> Result<ReliabilityBudget> {
    check_prob("p_per", p_per)?;
    match mode {
        BudgetMode::PessimisticEq16 => Ok(ReliabilityBudget {
            p_per,
            p_dec: p_per / 2.0,
            p_out: p_per / 2.0,
            mode,
        }),
        BudgetMode::SplitEq15 => {
            let p_dec = p_dec.ok_or_else(|| invalid("split budget needs p_dec"))?;
            check_prob("p_dec", p_dec)?;
            if p_dec >= p_per {
                return Err(invalid(format!("p_dec = {p_dec} must be below p_per = {p_per}")));
            }
            Ok(ReliabilityBudget {
                p_per,
                p_dec,
                p_out: p_per - p_dec,
                mode,
            })
        }
    }
}

/// Measured `(p_dec, isnr_0 [dB])` curve, interpolated linearly in
/// `(log10 p_dec, dB)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct LookupTable {
    /// Sorted by increasing `p_dec`, with strictly decreasing threshold.
    points: Vec<(f64, f64)>,
}

impl LookupTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("lookup table needs at least two points"));
        }
        for &(p, db) in &points {
            check_prob("table p_dec", p)?;
            if !db.is_finite() {
                return Err(invalid(format!("table threshold at p_dec = {p} is not finite")));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in points.windows(2) {
            let ((p1, d1), (p2, d2)) = (pair[0], pair[1]);
            if p1 == p2 || d2 >= d1 {
                return Err(invalid(format!(
                    "lookup table must be strictly decreasing in p_dec: ({p1}, {d1}) then ({p2}, {d2})"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Reads a CSV with the exact header `p_dec,isnr0_db`.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != LOOKUP_HEADER {
            return Err(Error::Config(format!(
                "lookup table header must be `p_dec,isnr0_db`, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
            points.push(rec.map_err(|e| Error::Config(format!("lookup table row {}: {e}", i + 1)))?);
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Threshold in dB; errors outside the tabulated range.
    pub fn threshold_db(&self, p_dec: f64) -> Result<f64> {
        let (lo, hi) = (self.points[0].0, self.points[self.points.len() - 1].0);
        if !(p_dec >= lo && p_dec <= hi) {
            return Err(Error::OutOfRange(format!(
                "p_dec = {p_dec} outside the table range [{lo}, {hi}]"
            )));
        }
        let i = self.points.partition_point(|&(p, _)| p < p_dec);
        let (p2, d2) = self.points[i];
        if p2 == p_dec || i == 0 {
            return Ok(d2);
        }
        let (p1, d1) = self.points[i - 1];
        let f = (p_dec.log10() - p1.log10()) / (p2.log10() - p1.log10());
        Ok(d1 + f * (d2 - d1))
    }
}

impl TryFrom<Vec<(f64, f64)>> for LookupTable {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<LookupTable> for Vec<(f64, f64)> {
    fn from(t: LookupTable) -> Self {
        t.points
    }
}

/// Maps a decoding-error target to the iSNR it requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdModel {
    /// Finite-blocklength normal approximation for the AWGN channel.
    NormalApproximation { blocklength_bits: usize, rate: f64 },
    LookupTable { table: LookupTable },
}

impl ThresholdModel {
    pub fn normal_approximation(blocklength_bits: usize, rate: f64) -> Result<Self> {
        if blocklength_bits < 2 {
            return Err(invalid("blocklength must be at least 2"));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!("rate must be > 0, got {rate}")));
        }
        Ok(ThresholdModel::NormalApproximation { blocklength_bits, rate })
    }
}

fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Normal-approximation error probability at iSNR `x` (linear).
pub fn normal_approximation_error(x: f64, blocklength_bits: usize, rate: f64) -> f64 {
    let n = blocklength_bits as f64;
    let c = x.ln_1p() * LOG2_E;
    let v = x * (x + 2.0) / ((x + 1.0) * (x + 1.0)) * LOG2_E * LOG2_E;
    q_function((c - rate + n.log2() / (2.0 * n)) * (n / v).sqrt())
}

fn normal_approximation_threshold(p_dec: f64, blocklength_bits: usize, rate: f64) -> Result<f64> {
    let target = p_dec.ln();
    let log_err = |lx: f64| normal_approximation_error(lx.exp(), blocklength_bits, rate).ln();
    let (mut lo, mut hi) = ((1e-6_f64).ln(), (1e6_f64).ln());
    if log_err(lo) < target || log_err(hi) > target {
        return Err(Error::OutOfRange(format!(
            "p_dec = {p_dec} is not reachable for iSNR in [1e-6, 1e6]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_err(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Linear iSNR threshold for decoding-error target `p_dec`.
pub fn isnr_threshold(model: &ThresholdModel, p_dec: f64) -> Result<f64> {
    check_prob("p_dec", p_dec)?;
    match model {
        ThresholdModel::NormalApproximation { blocklength_bits, rate } => {
            normal_approximation_threshold(p_dec, *blocklength_bits, *rate)
        }
        ThresholdModel::LookupTable { table } => Ok(db_to_linear(table.threshold_db(p_dec)?)),
    }
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerDecision {
    /// Linear transmit power; `+inf` when the bound is not positive.
    pub gamma: f64,
    pub gamma_db: f64,
    pub isnr_0: f64,
    pub beta_lb: f64,
    /// `gamma <= cap`.
    pub feasible: bool,
    /// Largest CSIT age (s) the cap tolerates; `+inf` if unconstrained or
    /// not evaluated, 0 if no lag is tolerable.
    pub lag_cap_s: f64,
}

/// `gamma = isnr_0 / beta_lb`. A non-positive bound gives an infeasible
/// decision instead of an error.
pub fn transmit_power(isnr_0: f64, beta_lb: f64, cap: f64) -> Result<PowerDecision> {
    if !(isnr_0 > 0.0 && isnr_0.is_finite()) {
        return Err(invalid(format!("isnr_0 must be > 0, got {isnr_0}")));
    }
    if !(cap > 0.0) {
        return Err(invalid(format!("power cap must be > 0, got {cap}")));
    }
    if beta_lb.is_nan() {
        return Err(invalid("beta_lb is NaN"));
    }
    let gamma = if beta_lb > 0.0 { isnr_0 / beta_lb } else { f64::INFINITY };
    Ok(PowerDecision {
        gamma,
        gamma_db: linear_to_db(gamma),
        isnr_0,
        beta_lb,
        feasible: gamma <= cap,
        lag_cap_s: f64::INFINITY,
    })
}

/// Largest normalized lag `tau f_d` at which the hardened gain still meets
/// `isnr_0` under power cap `cap`.
pub fn max_lag(scheme: BeamformerKind, isnr_0: f64, cap: f64, n_rx: usize) -> Result<f64> {
    if !(isnr_0 > 0.0) || !(cap > 0.0) || n_rx == 0 {
        return Err(invalid("max_lag needs isnr_0 > 0, cap > 0 and n_rx >= 1"));
    }
    if scheme == BeamformerKind::MrcBaseline {
        return Ok(f64::INFINITY);
    }
    let ratio = if scheme.is_superimposed_family() {
        n_rx as f64 * isnr_0 / cap
    } else {
        isnr_0 / cap
    };
    if ratio > 1.0 {
        return Err(Error::Infeasible(format!(
            "{scheme}: required correlation sqrt({ratio}) exceeds 1 at any lag"
        )));
    }
    Ok(bessel_j0_inverse(ratio.sqrt())? / (2.0 * PI))
}

/// Everything the four-step adaptation needs besides the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPolicy {
    pub budget: ReliabilityBudget,
    pub model: ThresholdModel,
    /// Transmit-power cap (linear).
    pub cap: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Use the hardened gain instead of the Chernoff bound once `M` reaches this.
    #[serde(default)]
    pub hardening_threshold: Option<usize>,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl PowerPolicy {
    pub fn new(budget: ReliabilityBudget, model: ThresholdModel, cap: f64) -> Self {
        Self {
            budget,
            model,
            cap,
            tol: DEFAULT_TOL,
            hardening_threshold: None,
        }
    }

    pub fn isnr_0(&self) -> Result<f64> {
        isnr_threshold(&self.model, self.budget.p_dec)
    }
}

/// Four-step adaptation for one CSIT snapshot.
pub fn run_power_adaptation(
    h0: &ChannelSnapshot,
    scheme: BeamformerKind,
    plan: Option<&GroupingPlan>,
    params: &AgingParams,
    policy: &PowerPolicy,
) -> Result<PowerDecision> {
    let isnr_0 = policy.isnr_0()?;
    adapt_with_threshold(h0, scheme, plan, params, policy, isnr_0)
}

/// [`run_power_adaptation`] with a precomputed threshold, for sweeps.
pub fn adapt_with_threshold(
    h0: &ChannelSnapshot,
    scheme: BeamformerKind,
    plan: Option<&GroupingPlan>,
    params: &AgingParams,
    policy: &PowerPolicy,
    isnr_0: f64,
) -> Result<PowerDecision> {
    let (m, n) = (h0.m_tx(), h0.n_rx());
    let hardened = policy.hardening_threshold.is_some_and(|t| m >= t)
        && matches!(scheme, BeamformerKind::SuperimposedMf | BeamformerKind::TimeOrthogonalMf);
    let beta_lb = if hardened {
        hardened_limit(scheme, n, params)? * (m * n) as f64
    } else {
        let weights = build_weights(scheme, h0, plan)?;
        let dist = gain_moments(h0, &weights, params)?;
        chernoff_lower_bound(&dist, policy.budget.p_out, policy.tol)?.value
    };
    let mut decision = transmit_power(isnr_0, beta_lb, policy.cap)?;
    decision.lag_cap_s = match max_lag(scheme, isnr_0, policy.cap, n) {
        Ok(x) if params.doppler_hz > 0.0 => x / params.doppler_hz,
        Ok(_) => f64::INFINITY,
        Err(Error::Infeasible(_)) => {
            decision.feasible = false;
            0.0
        }
        Err(e) => return Err(e),
    };
    Ok(decision)
}
