use crate::beamforming::{adjacent_grouping, build_weights, BeamformerKind, GroupingPlan, TxWeights};
use crate::bounds::{hardened_limit, lower_bound, BoundKind};
use crate::error::Result;
use crate::fading::{sample_initial_channel, AgingParams, ChannelSnapshot};
use crate::gain_stats::{gain_moments, GainDistribution};
use crate::rng::SeededRng;

pub(crate) const TAG_CSIT: u64 = 1;
pub(crate) const TAG_TRIALS: u64 = 2;
pub(crate) const TAG_DRAWS: u64 = 3;
pub(crate) const TAG_ASNR: u64 = 4;

/// Key for sub-experiment `(tag, index)` of a run seeded with `seed`.
pub(crate) fn key(seed: u64, tag: u64, index: u64) -> SeededRng {
    SeededRng::derive(seed, (tag << 40) ^ index)
}

/// One scheme evaluated on one CSIT draw.
pub(crate) struct Evaluated {
    pub weights: TxWeights,
    pub dist: GainDistribution,
}

pub(crate) fn evaluate(
    kind: BeamformerKind,
    h0: &ChannelSnapshot,
    plan: Option<&GroupingPlan>,
    params: &AgingParams,
) -> Result<Evaluated> {
    let weights = build_weights(kind, h0, plan)?;
    let dist = gain_moments(h0, &weights, params)?;
    Ok(Evaluated { weights, dist })
}

/// Bound value of `bound` for `kind`; the hardened bound is scaled back to
/// absolute gain units.
pub(crate) fn bound_value(
    bound: BoundKind,
    kind: BeamformerKind,
    dist: &GainDistribution,
    h0: &ChannelSnapshot,
    params: &AgingParams,
    p_out: f64,
    tol: f64,
) -> Result<f64> {
    match bound {
        BoundKind::HardenedLimit => {
            Ok(hardened_limit(kind, h0.n_rx(), params)? * (h0.m_tx() * h0.n_rx()) as f64)
        }
        other => Ok(lower_bound(other, dist, p_out, tol)?.value),
    }
}

/// Fresh CSIT, plus one grouping plan per requested `K` (in order).
pub(crate) fn draw_csit(
    m_tx: usize,
    n_rx: usize,
    ks: &[usize],
    rng: &mut SeededRng,
) -> Result<(ChannelSnapshot, Vec<GroupingPlan>)> {
    let h0 = sample_initial_channel(m_tx, n_rx, rng)?;
    let plans = ks
        .iter()
        .map(|&k| adjacent_grouping(m_tx, k, rng))
        .collect::<Result<_>>()?;
    Ok((h0, plans))
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Unbiased sample standard deviation.
    pub fn std_dev(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0).sqrt()
    }
}
