//! I.i.d. Rayleigh channel snapshots and first-order Markov channel aging.

use crate::error::{invalid, Result};
use crate::rng::SeededRng;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// First positive zero of J0; the end of its first monotone branch.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

// Below this the power series is used, above it the Hankel expansion. Both
// stay under 1e-11 absolute error at the crossover.
const SERIES_LIMIT: f64 = 12.0;

/// Zero-order Bessel function of the first kind.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(invalid(format!("bessel_j0 argument must be finite, got {x}")));
    }
    let ax = x.abs();
    Ok(if ax <= SERIES_LIMIT {
        j0_series(ax)
    } else {
        j0_hankel(ax)
    })
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn j0_hankel(x: f64) -> f64 {
    // P0 ~ sum (-1)^j a_{2j} / x^{2j}, Q0 ~ -sum (-1)^j a_{2j+1} / x^{2j+1},
    // a_k = prod_{j<=k} (2j-1)^2 / (k! 8^k). Truncated at the smallest term.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..200usize {
        if k > 0 {
            let two_k_minus_1 = (2 * k - 1) as f64;
            a *= two_k_minus_1 * two_k_minus_1 / (8.0 * k as f64 * x);
        }
        if a.abs() > prev {
            break;
        }
        prev = a.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q -= sign * a;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Inverse of J0 on its first monotone branch `[0, J0_FIRST_ZERO]`.
pub fn bessel_j0_inverse(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(invalid(format!(
            "J0 inverse on the first branch needs y in [0, 1], got {y}"
        )));
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, J0_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if j0_series(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Doppler/lag model of aged CSIT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgingParams {
    pub doppler_hz: f64,
    pub lag_s: f64,
    /// J0(2 pi f_d tau): correlation between the CSIT and the channel in use.
    pub j0: f64,
    /// Per-entry innovation variance, `1 - j0^2`.
    pub sigma_omega_sq: f64,
}

impl AgingParams {
    /// Aging for a terminal moving at `velocity_mps` on carrier `carrier_hz`,
    /// with CSIT that is `lag_s` seconds old.
    pub fn from_kinematics(velocity_mps: f64, carrier_hz: f64, lag_s: f64) -> Result<Self> {
        if !velocity_mps.is_finite() || !carrier_hz.is_finite() || !lag_s.is_finite() {
            return Err(invalid("aging parameters must be finite"));
        }
        if velocity_mps < 0.0 {
            return Err(invalid(format!("velocity must be >= 0, got {velocity_mps}")));
        }
        if lag_s < 0.0 {
            return Err(invalid(format!("lag must be >= 0, got {lag_s}")));
        }
        if carrier_hz <= 0.0 {
            return Err(invalid(format!("carrier must be > 0, got {carrier_hz}")));
        }
        let doppler_hz = velocity_mps * carrier_hz / SPEED_OF_LIGHT_MPS;
        let j0 = bessel_j0(2.0 * PI * doppler_hz * lag_s)?;
        Ok(Self {
            doppler_hz,
            lag_s,
            j0,
            sigma_omega_sq: 1.0 - j0 * j0,
        })
    }

    /// Aging with a prescribed correlation `j0` in `[0, 1]`, realized as a
    /// one-second lag at the Doppler shift that produces it.
    pub fn from_correlation(j0: f64) -> Result<Self> {
        let x = bessel_j0_inverse(j0)?;
        Ok(Self {
            doppler_hz: x / (2.0 * PI),
            lag_s: 1.0,
            j0,
            sigma_omega_sq: 1.0 - j0 * j0,
        })
    }

    /// Normalized lag `tau * f_d`.
    pub fn normalized_lag(&self) -> f64 {
        self.lag_s * self.doppler_hz
    }

    pub fn is_static(&self) -> bool {
        self.sigma_omega_sq == 0.0
    }
}

/// Convenience wrapper over [`AgingParams::from_kinematics`].
pub fn aging_params(velocity_mps: f64, carrier_hz: f64, lag_s: f64) -> Result<AgingParams> {
    AgingParams::from_kinematics(velocity_mps, carrier_hz, lag_s)
}

/// N x M channel matrix (Rx rows, Tx columns), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    n_rx: usize,
    m_tx: usize,
    entries: Vec<Complex64>,
}

impl ChannelSnapshot {
    pub fn new(n_rx: usize, m_tx: usize, entries: Vec<Complex64>) -> Result<Self> {
        if n_rx == 0 || m_tx == 0 {
            return Err(invalid("channel dimensions must be positive"));
        }
        if entries.len() != n_rx * m_tx {
            return Err(invalid(format!(
                "expected {} entries for a {n_rx}x{m_tx} channel, got {}",
                n_rx * m_tx,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("channel entries must be finite"));
        }
        Ok(Self {
            n_rx,
            m_tx,
            entries,
        })
    }

    /// Builds a snapshot from a list of Rx rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(invalid("ragged channel rows"));
        }
        Self::new(n, m, rows.concat())
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn m_tx(&self) -> usize {
        self.m_tx
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, rx: usize, tx: usize) -> Complex64 {
        self.entries[rx * self.m_tx + tx]
    }

    /// Row `rx`, i.e. `h_rx^T`.
    pub fn row(&self, rx: usize) -> &[Complex64] {
        &self.entries[rx * self.m_tx..(rx + 1) * self.m_tx]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.entries.chunks_exact(self.m_tx)
    }

    /// Squared Frobenius norm.
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn column_norm_sqr(&self, tx: usize) -> f64 {
        (0..self.n_rx).map(|n| self.get(n, tx).norm_sqr()).sum()
    }

    /// `H w` for a length-M vector.
    pub fn mul_vec(&self, w: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(w.len(), self.m_tx, "vector length must equal m_tx");
        self.rows().map(|row| dot(row, w)).collect()
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            n_rx: self.n_rx,
            m_tx: self.m_tx,
            entries: self.entries.iter().map(|z| z * a).collect(),
        }
    }
}

/// Unconjugated inner product `a^T b`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// I.i.d. CN(0, 1) channel.
pub fn sample_initial_channel(m_tx: usize, n_rx: usize, rng: &mut SeededRng) -> Result<ChannelSnapshot> {
    if m_tx == 0 || n_rx == 0 {
        return Err(invalid(format!(
            "channel dimensions must be positive, got {n_rx}x{m_tx}"
        )));
    }
    let entries = (0..m_tx * n_rx).map(|_| rng.complex_normal()).collect();
    Ok(ChannelSnapshot {
        n_rx,
        m_tx,
        entries,
    })
}

/// `H_tau = j0 H_0 + Omega`, Omega i.i.d. CN(0, sigma_omega^2). `h0` is untouched.
pub fn evolve(h0: &ChannelSnapshot, params: &AgingParams, rng: &mut SeededRng) -> ChannelSnapshot {
    let mut out = h0.clone();
    evolve_into(h0, params, rng, &mut out);
    out
}

/// [`evolve`] writing into a preallocated snapshot of the same shape.
pub fn evolve_into(h0: &ChannelSnapshot, params: &AgingParams, rng: &mut SeededRng, out: &mut ChannelSnapshot) {
    assert!(
        out.n_rx == h0.n_rx && out.m_tx == h0.m_tx,
        "evolve_into needs matching shapes"
    );
    let j0 = params.j0;
    if params.sigma_omega_sq == 0.0 {
        for (o, h) in out.entries.iter_mut().zip(&h0.entries) {
            *o = h * j0;
        }
        return;
    }
    let sd = params.sigma_omega_sq.sqrt();
    for (o, h) in out.entries.iter_mut().zip(&h0.entries) {
        *o = h * j0 + rng.complex_normal() * sd;
    }
}
