//! Monte Carlo validation of the outage guarantee.

use super::common::{bound_value, draw_csit, evaluate, key, TAG_CSIT, TAG_TRIALS};
use super::config::ExperimentConfig;
use super::runner::Runner;
use crate::beamforming::{gain_unchecked, BeamformerKind, GroupingPlan};
use crate::bounds::BoundKind;
use crate::error::Result;
use crate::fading::{evolve_into, AgingParams, ChannelSnapshot};
use serde::Serialize;
use statrs::function::beta::beta_reg;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub scheme: BeamformerKind,
    pub bound: BoundKind,
    pub trials: u64,
    pub failures: u64,
    pub p_hat: f64,
    /// One-sided 99% Clopper-Pearson upper limit on the outage probability.
    pub ci99_upper: f64,
    pub target: f64,
    /// Fraction of trials whose bound was positive.
    pub valid_fraction: f64,
    pub mean_bound: f64,
}

impl OutageEstimate {
    /// `p_hat <= target + 3 sqrt(target / trials)`.
    pub fn within_binomial_slack(&self) -> bool {
        self.p_hat <= self.target + 3.0 * (self.target / self.trials as f64).sqrt()
    }
}

/// Upper end of the one-sided `level` Clopper-Pearson interval.
pub fn clopper_pearson_upper(failures: u64, trials: u64, level: f64) -> f64 {
    if failures >= trials {
        return 1.0;
    }
    let (a, b) = ((failures + 1) as f64, (trials - failures) as f64);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    failures: u64,
    valid: u64,
    bound_sum: f64,
}

/// Outage estimate per (scheme, bound) at the aging implied by the config.
pub fn estimate_outage(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<OutageEstimate>> {
    estimate_outage_with(cfg, &cfg.aging()?, runner)
}

/// [`estimate_outage`] at explicit aging parameters. All schemes and bounds
/// share the same CSIT draws and channel evolutions.
pub fn estimate_outage_with(cfg: &ExperimentConfig, params: &AgingParams, runner: &Runner) -> Result<Vec<OutageEstimate>> {
    let p_out = cfg.p_out()?;
    let bounds = cfg.bounds_or(&[BoundKind::Chernoff]);
    let schemes = cfg.schemes.clone();
    let ks = [cfg.k_groups];
    let fixed = if cfg.reuse_h0 {
        Some(draw_csit(cfg.m_tx, cfg.n_rx, &ks, &mut key(cfg.seed, TAG_CSIT, 0))?)
    } else {
        None
    };
    let n_series = schemes.len() * bounds.len();
    let tallies = runner.fold_chunks(
        &key(cfg.seed, TAG_TRIALS, 0),
        cfg.trials,
        vec![Tally::default(); n_series],
        |range, rng| {
            let mut out = vec![Tally::default(); n_series];
            let mut h_tau: Option<ChannelSnapshot> = None;
            let mut cached = None;
            for _ in range {
                let drawn;
                let (h0, plans): (&ChannelSnapshot, &[GroupingPlan]) = match &fixed {
                    Some((h, p)) => (h, p),
                    None => {
                        drawn = draw_csit(cfg.m_tx, cfg.n_rx, &ks, rng)?;
                        (&drawn.0, &drawn.1)
                    }
                };
                if fixed.is_none() || cached.is_none() {
                    let mut per_scheme = Vec::with_capacity(schemes.len());
                    for &kind in &schemes {
                        let ev = evaluate(kind, h0, plans.first(), params)?;
                        let values = bounds
                            .iter()
                            .map(|&b| bound_value(b, kind, &ev.dist, h0, params, p_out, cfg.tol))
                            .collect::<Result<Vec<_>>>()?;
                        per_scheme.push((ev.weights, values));
                    }
                    cached = Some(per_scheme);
                }
                let h = h_tau.get_or_insert_with(|| h0.clone());
                evolve_into(h0, params, rng, h);
                for (s, (weights, values)) in cached.as_ref().expect("filled above").iter().enumerate() {
                    let gain = gain_unchecked(h, weights);
                    for (b, &v) in values.iter().enumerate() {
                        let t = &mut out[s * bounds.len() + b];
                        t.failures += u64::from(gain < v);
                        if v > 0.0 && v.is_finite() {
                            t.valid += 1;
                        }
                        t.bound_sum += v;
                    }
                }
            }
            Ok(out)
        },
        |acc, part| {
            for (a, p) in acc.iter_mut().zip(part) {
                a.failures += p.failures;
                a.valid += p.valid;
                a.bound_sum += p.bound_sum;
            }
        },
    )?;
    let n = cfg.trials;
    let mut rows = Vec::with_capacity(n_series);
    for (s, &scheme) in schemes.iter().enumerate() {
        for (b, &bound) in bounds.iter().enumerate() {
            let t = tallies[s * bounds.len() + b];
            rows.push(OutageEstimate {
                scheme,
                bound,
                trials: n,
                failures: t.failures,
                p_hat: t.failures as f64 / n as f64,
                ci99_upper: clopper_pearson_upper(t.failures, n, 0.99),
                target: p_out,
                valid_fraction: t.valid as f64 / n as f64,
                mean_bound: t.bound_sum / n as f64,
            });
        }
    }
    Ok(rows)
}

/// Warnings about a configuration too small to resolve its target.
pub fn outage_warnings(cfg: &ExperimentConfig) -> Vec<String> {
    match cfg.p_out() {
        Ok(p) if p * (cfg.trials as f64) < 10.0 => vec![format!(
            "p_out * trials = {} < 10: too few trials to resolve the target",
            p * cfg.trials as f64
        )],
        _ => Vec::new(),
    }
}
