//! Pessimistic lower bounds on the beamforming gain.

use crate::beamforming::BeamformerKind;
use crate::error::{invalid, Result};
use crate::fading::AgingParams;
use crate::gain_stats::{log_chernoff_objective, optimal_t_unchecked, GainDistribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

pub const DEFAULT_TOL: f64 = 1e-4;
const MAX_BISECTIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Chernoff,
    Chebyshev,
    Polynomial,
    HardenedLimit,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Chernoff => "chernoff",
            BoundKind::Chebyshev => "chebyshev",
            BoundKind::Polynomial => "polynomial",
            BoundKind::HardenedLimit => "hardened_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub value: f64,
    pub p_out: f64,
    /// `value` is positive and finite, hence usable for power adaptation.
    pub valid: bool,
    pub iterations: u32,
}

impl BoundResult {
    fn new(kind: BoundKind, value: f64, p_out: f64, iterations: u32) -> Self {
        Self {
            kind,
            value,
            p_out,
            valid: value > 0.0 && value.is_finite(),
            iterations,
        }
    }
}

fn check_p_out(p_out: f64) -> Result<()> {
    if p_out > 0.0 && p_out < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("p_out must lie in (0, 1), got {p_out}")))
    }
}

fn deterministic(kind: BoundKind, dist: &GainDistribution, p_out: f64) -> BoundResult {
    BoundResult::new(kind, dist.mean, p_out, 0)
}

/// Chernoff lower bound: the `beta` with `min_t f(t, beta) = p_out`.
///
/// `beta -> min_t f(t, beta)` increases monotonically from 0 to 1 on
/// `(0, mean)`, so plain bisection on `beta` converges; the inner minimum is
/// the closed-form `t*`. Stops once `|f - p_out| <= tol * p_out`.
pub fn chernoff_lower_bound(dist: &GainDistribution, p_out: f64, tol: f64) -> Result<BoundResult> {
    check_p_out(p_out)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be > 0, got {tol}")));
    }
    if dist.is_deterministic() {
        return Ok(deterministic(BoundKind::Chernoff, dist, p_out));
    }
    let target = p_out.ln();
    let log_min_f = |b: f64| log_chernoff_objective(optimal_t_unchecked(b, dist), b, dist);
    let eps = 1e-12 * dist.mean;
    let (mut lo, mut hi) = (eps, dist.mean - eps);
    if log_min_f(lo) > target {
        // Even a vanishing bound cannot reach p_out.
        return Ok(BoundResult {
            kind: BoundKind::Chernoff,
            value: 0.0,
            p_out,
            valid: false,
            iterations: 0,
        });
    }
    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    while iterations < MAX_BISECTIONS {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        let gap = log_min_f(mid) - target;
        if gap.exp_m1().abs() <= tol {
            break;
        }
        if gap > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(BoundResult::new(BoundKind::Chernoff, mid, p_out, iterations))
}

/// Lower branch of `|beta - mean| = sigma / sqrt(p_out)`, with the
/// non-central variance stored in `dist`.
pub fn chebyshev_lower_bound(dist: &GainDistribution, p_out: f64) -> Result<BoundResult> {
    chebyshev_with_variance(dist, dist.variance, p_out)
}

/// Chebyshev bound with an explicit variance (e.g. the paper's variance form).
pub fn chebyshev_with_variance(dist: &GainDistribution, variance: f64, p_out: f64) -> Result<BoundResult> {
    check_p_out(p_out)?;
    if !(variance >= 0.0) {
        return Err(invalid(format!("variance must be >= 0, got {variance}")));
    }
    let value = dist.mean - variance.sqrt() / p_out.sqrt();
    Ok(BoundResult::new(BoundKind::Chebyshev, value, p_out, 0))
}

/// Polynomial-expansion bound `(p_out D!)^(1/D) s exp(mean / (D s) - 1)`.
pub fn polynomial_lower_bound(dist: &GainDistribution, p_out: f64) -> Result<BoundResult> {
    check_p_out(p_out)?;
    if dist.is_deterministic() {
        return Ok(deterministic(BoundKind::Polynomial, dist, p_out));
    }
    let d = dist.degrees as f64;
    let s = dist.sigma_omega_sq;
    let log_value = (p_out.ln() + ln_gamma(d + 1.0)) / d + s.ln() + dist.mean / (d * s) - 1.0;
    Ok(BoundResult::new(BoundKind::Polynomial, log_value.exp(), p_out, 0))
}

/// How a gain is scaled before comparing it with the hardened limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by `M N`.
    PerTxRxPair,
    /// Divide by `M`.
    PerTxAntenna,
}

impl Normalization {
    pub fn factor(self, m_tx: usize, n_rx: usize) -> f64 {
        match self {
            Normalization::PerTxRxPair => (m_tx * n_rx) as f64,
            Normalization::PerTxAntenna => m_tx as f64,
        }
    }
}

/// Large-M limit of the mean gain normalized by `M N`: `j0^2 / N` for
/// superimposed MF and `j0^2` for time-orthogonal MF.
pub fn hardened_limit(scheme: BeamformerKind, n_rx: usize, params: &AgingParams) -> Result<f64> {
    if n_rx == 0 {
        return Err(invalid("n_rx must be positive"));
    }
    let j2 = params.j0 * params.j0;
    match scheme {
        BeamformerKind::SuperimposedMf => Ok(j2 / n_rx as f64),
        BeamformerKind::TimeOrthogonalMf => Ok(j2),
        other => Err(invalid(format!("no hardened limit for {other}"))),
    }
}

/// Evaluates one bound kind; `HardenedLimit` is not distribution-based and is rejected.
pub fn lower_bound(kind: BoundKind, dist: &GainDistribution, p_out: f64, tol: f64) -> Result<BoundResult> {
    match kind {
        BoundKind::Chernoff => chernoff_lower_bound(dist, p_out, tol),
        BoundKind::Chebyshev => chebyshev_lower_bound(dist, p_out),
        BoundKind::Polynomial => polynomial_lower_bound(dist, p_out),
        BoundKind::HardenedLimit => Err(invalid("use hardened_limit for the hardened bound")),
    }
}
