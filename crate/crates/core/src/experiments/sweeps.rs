//! Parameter sweeps over CSIT draws: bound histograms, hardening, power and
//! recycling studies.

use super::common::{bound_value, draw_csit, evaluate, key, Moments, TAG_ASNR, TAG_DRAWS};
use super::config::ExperimentConfig;
use super::runner::Runner;
use crate::beamforming::{gain_unchecked, time_orthogonal_mf, time_orthogonal_mf_recycling, BeamformerKind};
use crate::bounds::{chernoff_lower_bound, hardened_limit, BoundKind};
use crate::error::{Error, Result};
use crate::fading::{evolve_into, sample_initial_channel, AgingParams};
use crate::gain_stats::gain_moments;
use crate::power::{isnr_threshold, linear_to_db, ThresholdModel};
use serde::Serialize;

fn merge_all(acc: &mut [Moments], part: Vec<Moments>) {
    for (a, p) in acc.iter_mut().zip(part) {
        a.merge(p);
    }
}

// ---------------------------------------------------------------- gain_pdf

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfRow {
    pub scheme: BeamformerKind,
    pub bound: BoundKind,
    pub bin: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub density: f64,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub draws: usize,
}

/// Histograms of bound values over independent CSIT draws. The MRC
/// baseline is always included for comparison.
pub fn gain_pdf(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<PdfRow>> {
    let params = cfg.aging()?;
    let p_out = cfg.p_out()?;
    let bounds = cfg.bounds_or(&[BoundKind::Chernoff, BoundKind::Chebyshev]);
    let mut schemes = cfg.schemes.clone();
    if !schemes.contains(&BeamformerKind::MrcBaseline) {
        schemes.push(BeamformerKind::MrcBaseline);
    }
    let n_series = schemes.len() * bounds.len();
    let ks = [cfg.k_groups];
    let samples = runner.fold_chunks(
        &key(cfg.seed, TAG_DRAWS, 0),
        cfg.channel_draws as u64,
        vec![Vec::new(); n_series],
        |range, rng| {
            let mut out = vec![Vec::with_capacity(range.end as usize - range.start as usize); n_series];
            for _ in range {
                let (h0, plans) = draw_csit(cfg.m_tx, cfg.n_rx, &ks, rng)?;
                for (s, &kind) in schemes.iter().enumerate() {
                    let ev = evaluate(kind, &h0, plans.first(), &params)?;
                    for (b, &bound) in bounds.iter().enumerate() {
                        out[s * bounds.len() + b].push(bound_value(bound, kind, &ev.dist, &h0, &params, p_out, cfg.tol)?);
                    }
                }
            }
            Ok(out)
        },
        |acc: &mut Vec<Vec<f64>>, part| {
            for (a, p) in acc.iter_mut().zip(part) {
                a.extend(p);
            }
        },
    )?;
    let mut rows = Vec::new();
    for (s, &scheme) in schemes.iter().enumerate() {
        for (b, &bound) in bounds.iter().enumerate() {
            rows.extend(histogram(scheme, bound, &samples[s * bounds.len() + b], cfg.bins));
        }
    }
    Ok(rows)
}

fn histogram(scheme: BeamformerKind, bound: BoundKind, xs: &[f64], bins: usize) -> Vec<PdfRow> {
    let mut m = Moments::default();
    xs.iter().for_each(|&x| m.push(x));
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| PdfRow {
            scheme,
            bound,
            bin: i,
            bin_lo: lo + i as f64 * width,
            bin_hi: lo + (i + 1) as f64 * width,
            count,
            density: count as f64 / (xs.len() as f64 * width),
            sample_mean: m.mean(),
            sample_std: m.std_dev(),
            draws: xs.len(),
        })
        .collect()
}

// ---------------------------------------------------------- hardening_sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardeningRow {
    pub m_tx: usize,
    pub scheme: BeamformerKind,
    pub draws: usize,
    pub mean_norm_bound: f64,
    pub std_norm_bound: f64,
    /// `std / mean` of the normalized bound.
    pub spread: f64,
    pub mean_norm_gain: f64,
    pub hardened_limit: f64,
    /// `|mean_norm_bound - hardened_limit| / hardened_limit`.
    pub rel_gap: f64,
}

/// Normalized Chernoff bound statistics per `M`, against the hardened limit.
pub fn hardening_sweep(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<HardeningRow>> {
    let params = cfg.aging()?;
    let p_out = cfg.p_out()?;
    let ks = [cfg.k_groups];
    let mut rows = Vec::new();
    for m in cfg.m_values() {
        let scale = cfg.normalization.factor(m, cfg.n_rx);
        let n_series = cfg.schemes.len();
        let stats = runner.fold_chunks(
            &key(cfg.seed, TAG_DRAWS, m as u64),
            cfg.channel_draws as u64,
            vec![(Moments::default(), Moments::default()); n_series],
            |range, rng| {
                let mut out = vec![(Moments::default(), Moments::default()); n_series];
                for _ in range {
                    let (h0, plans) = draw_csit(m, cfg.n_rx, &ks, rng)?;
                    for (s, &kind) in cfg.schemes.iter().enumerate() {
                        let ev = evaluate(kind, &h0, plans.first(), &params)?;
                        let b = chernoff_lower_bound(&ev.dist, p_out, cfg.tol)?.value;
                        out[s].0.push(b / scale);
                        out[s].1.push(ev.dist.mean / scale);
                    }
                }
                Ok(out)
            },
            |acc, part| {
                for (a, p) in acc.iter_mut().zip(part) {
                    a.0.merge(p.0);
                    a.1.merge(p.1);
                }
            },
        )?;
        for (&scheme, (bound, mean)) in cfg.schemes.iter().zip(stats) {
            let limit = hardened_limit(scheme, cfg.n_rx, &params)
                .map(|l| l * (m * cfg.n_rx) as f64 / scale)
                .unwrap_or(f64::NAN);
            rows.push(HardeningRow {
                m_tx: m,
                scheme,
                draws: cfg.channel_draws,
                mean_norm_bound: bound.mean(),
                std_norm_bound: bound.std_dev(),
                spread: bound.std_dev() / bound.mean(),
                mean_norm_gain: mean.mean(),
                hardened_limit: limit,
                rel_gap: (bound.mean() - limit).abs() / limit,
            });
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------ power sweeps

#[derive(Debug, Clone, Copy, Default)]
struct PowerTally {
    valid: u64,
    feasible: u64,
    gamma: Moments,
    gamma_db: Moments,
}

impl PowerTally {
    fn push(&mut self, gamma: f64, cap: Option<f64>) {
        if gamma.is_finite() {
            self.valid += 1;
            self.gamma.push(gamma);
            self.gamma_db.push(linear_to_db(gamma));
            if cap.is_none_or(|c| gamma <= c) {
                self.feasible += 1;
            }
        }
    }

    fn merge(&mut self, o: PowerTally) {
        self.valid += o.valid;
        self.feasible += o.feasible;
        self.gamma.merge(o.gamma);
        self.gamma_db.merge(o.gamma_db);
    }
}

fn merge_tallies(acc: &mut [PowerTally], part: Vec<PowerTally>) {
    for (a, p) in acc.iter_mut().zip(part) {
        a.merge(p);
    }
}

fn gamma_for(isnr_0: f64, beta_lb: f64) -> f64 {
    if beta_lb > 0.0 {
        isnr_0 / beta_lb
    } else {
        f64::INFINITY
    }
}

fn threshold(model: &ThresholdModel, p_dec: f64) -> Result<f64> {
    isnr_threshold(model, p_dec).map_err(|e| match e {
        Error::OutOfRange(m) => Error::Config(format!("threshold: {m}")),
        other => other,
    })
}

fn check_any_valid(what: &str, t: &PowerTally, cap: Option<f64>) -> Result<()> {
    if t.valid == 0 {
        return Err(Error::Infeasible(format!("{what}: no CSIT draw gives a positive bound")));
    }
    if cap.is_some() && t.feasible == 0 {
        return Err(Error::Infeasible(format!("{what}: every draw exceeds the power cap")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPdecRow {
    pub p_dec: f64,
    pub p_out: f64,
    pub isnr0_db: f64,
    pub scheme: BeamformerKind,
    pub draws: usize,
    /// dB of the mean linear power.
    pub avg_gamma_db: f64,
    /// Mean of the per-draw power in dB.
    pub mean_gamma_db: f64,
    pub valid_fraction: f64,
    pub feasible_fraction: f64,
}

/// Average transmit power against the decoding share of the PER budget.
/// Every grid point reuses the same CSIT draws.
pub fn power_vs_pdec(cfg: &ExperimentConfig, model: &ThresholdModel, runner: &Runner) -> Result<Vec<PowerPdecRow>> {
    let params = cfg.aging()?;
    let grid = if cfg.p_dec_grid.is_empty() {
        vec![cfg.p_dec]
    } else {
        cfg.p_dec_grid.clone()
    };
    let mut points = Vec::with_capacity(grid.len());
    for &p_dec in &grid {
        let p_out = cfg.budget_for(p_dec)?.p_out;
        points.push((p_dec, p_out, threshold(model, p_dec)?));
    }
    let ks = [cfg.k_groups];
    let n_series = grid.len() * cfg.schemes.len();
    let tallies = runner.fold_chunks(
        &key(cfg.seed, TAG_DRAWS, 0),
        cfg.channel_draws as u64,
        vec![PowerTally::default(); n_series],
        |range, rng| {
            let mut out = vec![PowerTally::default(); n_series];
            for _ in range {
                let (h0, plans) = draw_csit(cfg.m_tx, cfg.n_rx, &ks, rng)?;
                for (s, &kind) in cfg.schemes.iter().enumerate() {
                    let ev = evaluate(kind, &h0, plans.first(), &params)?;
                    for (g, &(_, p_out, isnr_0)) in points.iter().enumerate() {
                        let b = chernoff_lower_bound(&ev.dist, p_out, cfg.tol)?.value;
                        out[g * cfg.schemes.len() + s].push(gamma_for(isnr_0, b), cfg.power_cap);
                    }
                }
            }
            Ok(out)
        },
        |acc, part| merge_tallies(acc, part),
    )?;
    let mut rows = Vec::with_capacity(n_series);
    for (g, &(p_dec, p_out, isnr_0)) in points.iter().enumerate() {
        for (s, &scheme) in cfg.schemes.iter().enumerate() {
            let t = tallies[g * cfg.schemes.len() + s];
            check_any_valid(&format!("{scheme} at p_dec = {p_dec}"), &t, cfg.power_cap)?;
            rows.push(PowerPdecRow {
                p_dec,
                p_out,
                isnr0_db: linear_to_db(isnr_0),
                scheme,
                draws: cfg.channel_draws,
                avg_gamma_db: linear_to_db(t.gamma.mean()),
                mean_gamma_db: t.gamma_db.mean(),
                valid_fraction: t.valid as f64 / cfg.channel_draws as f64,
                feasible_fraction: t.feasible as f64 / cfg.channel_draws as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerMRow {
    pub m_tx: usize,
    pub scheme: BeamformerKind,
    pub k_groups: usize,
    pub draws: usize,
    pub isnr0_db: f64,
    /// dB of the mean linear power.
    pub avg_gamma_db: f64,
    /// Mean of the per-draw power in dB.
    pub mean_gamma_db: f64,
    /// `avg_gamma_db + 10 log10(M N)`: power relative to the array size.
    pub avg_gamma_norm_db: f64,
    pub valid_fraction: f64,
    pub feasible_fraction: f64,
}

/// `(scheme, K)` series of a power-vs-M sweep: G-STBC kinds expand over the
/// K grid, everything else uses one group.
fn series(cfg: &ExperimentConfig) -> Vec<(BeamformerKind, usize)> {
    let mut out = Vec::new();
    for &kind in &cfg.schemes {
        if kind.is_gstbc() {
            out.extend(cfg.k_values().into_iter().map(|k| (kind, k)));
        } else {
            out.push((kind, 1));
        }
    }
    out
}

/// Average transmit power against the number of Tx antennas, for every
/// scheme (G-STBC at each K of the grid), on shared CSIT draws per `M`.
pub fn power_vs_m(cfg: &ExperimentConfig, model: &ThresholdModel, runner: &Runner) -> Result<Vec<PowerMRow>> {
    let params = cfg.aging()?;
    let budget = cfg.budget()?;
    let isnr_0 = threshold(model, budget.p_dec)?;
    let all = series(cfg);
    let ks: Vec<usize> = cfg.k_values();
    let mut rows = Vec::new();
    for m in cfg.m_values() {
        let active: Vec<(BeamformerKind, usize)> = all.iter().cloned().filter(|&(_, k)| k <= m).collect();
        let plan_ks: Vec<usize> = ks.iter().cloned().filter(|&k| k <= m).collect();
        let tallies = runner.fold_chunks(
            &key(cfg.seed, TAG_DRAWS, m as u64),
            cfg.channel_draws as u64,
            vec![PowerTally::default(); active.len()],
            |range, rng| {
                let mut out = vec![PowerTally::default(); active.len()];
                for _ in range {
                    let (h0, plans) = draw_csit(m, cfg.n_rx, &plan_ks, rng)?;
                    for (s, &(kind, k)) in active.iter().enumerate() {
                        let plan = if kind.is_gstbc() {
                            plan_ks.iter().position(|&pk| pk == k).map(|i| &plans[i])
                        } else {
                            None
                        };
                        let ev = evaluate(kind, &h0, plan, &params)?;
                        let b = chernoff_lower_bound(&ev.dist, budget.p_out, cfg.tol)?.value;
                        out[s].push(gamma_for(isnr_0, b), cfg.power_cap);
                    }
                }
                Ok(out)
            },
            |acc, part| merge_tallies(acc, part),
        )?;
        for (&(scheme, k), t) in active.iter().zip(tallies) {
            check_any_valid(&format!("{scheme} at M = {m}"), &t, cfg.power_cap)?;
            let avg = linear_to_db(t.gamma.mean());
            rows.push(PowerMRow {
                m_tx: m,
                scheme,
                k_groups: k,
                draws: cfg.channel_draws,
                isnr0_db: linear_to_db(isnr_0),
                avg_gamma_db: avg,
                mean_gamma_db: t.gamma_db.mean(),
                avg_gamma_norm_db: avg + linear_to_db((m * cfg.n_rx) as f64),
                valid_fraction: t.valid as f64 / cfg.channel_draws as f64,
                feasible_fraction: t.feasible as f64 / cfg.channel_draws as f64,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------- recycling_ratio

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecyclingRow {
    pub m_tx: usize,
    pub velocity_mps: f64,
    pub j0: f64,
    /// `1 + (N - 1) / (M j0^2 + sigma_omega^2)`.
    pub rho_closed: f64,
    /// Ratio of the average gains, with and without recycling.
    pub asnr_ratio_mc: f64,
    /// Ratio of the average Chernoff bounds, with and without recycling.
    pub bound_mean_ratio: f64,
    pub trials: u64,
    pub draws: usize,
}

pub fn recycling_closed_form(m_tx: usize, n_rx: usize, params: &AgingParams) -> f64 {
    1.0 + (n_rx as f64 - 1.0) / (m_tx as f64 * params.j0 * params.j0 + params.sigma_omega_sq)
}

/// Energy-recycling gain per `M`: closed form, Monte Carlo aSNR ratio over
/// `trials` fresh (CSIT, channel) pairs, and bound-mean ratio over
/// `channel_draws` CSIT draws.
pub fn recycling_ratio(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<RecyclingRow>> {
    let params = cfg.aging()?;
    let p_out = cfg.p_out()?;
    let mut rows = Vec::new();
    for m in cfg.m_values() {
        let asnr = runner.fold_chunks(
            &key(cfg.seed, TAG_ASNR, m as u64),
            cfg.trials,
            vec![Moments::default(); 2],
            |range, rng| {
                let mut out = vec![Moments::default(); 2];
                let mut h = None;
                for _ in range {
                    let h0 = sample_initial_channel(m, cfg.n_rx, rng)?;
                    let w = time_orthogonal_mf(&h0)?;
                    let wr = time_orthogonal_mf_recycling(&h0)?;
                    let h = h.get_or_insert_with(|| h0.clone());
                    evolve_into(&h0, &params, rng, h);
                    out[0].push(gain_unchecked(h, &w));
                    out[1].push(gain_unchecked(h, &wr));
                }
                Ok(out)
            },
            |acc, part| merge_all(acc, part),
        )?;
        let bounds = runner.fold_chunks(
            &key(cfg.seed, TAG_DRAWS, m as u64),
            cfg.channel_draws as u64,
            vec![Moments::default(); 2],
            |range, rng| {
                let mut out = vec![Moments::default(); 2];
                for _ in range {
                    let h0 = sample_initial_channel(m, cfg.n_rx, rng)?;
                    let d = gain_moments(&h0, &time_orthogonal_mf(&h0)?, &params)?;
                    let dr = gain_moments(&h0, &time_orthogonal_mf_recycling(&h0)?, &params)?;
                    out[0].push(chernoff_lower_bound(&d, p_out, cfg.tol)?.value);
                    out[1].push(chernoff_lower_bound(&dr, p_out, cfg.tol)?.value);
                }
                Ok(out)
            },
            |acc, part| merge_all(acc, part),
        )?;
        rows.push(RecyclingRow {
            m_tx: m,
            velocity_mps: cfg.velocity_mps,
            j0: params.j0,
            rho_closed: recycling_closed_form(m, cfg.n_rx, &params),
            asnr_ratio_mc: asnr[1].sum / asnr[0].sum,
            bound_mean_ratio: bounds[1].sum / bounds[0].sum,
            trials: cfg.trials,
            draws: cfg.channel_draws,
        });
    }
    Ok(rows)
}

// ----------------------------------------------------------- bounds_compare

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsCompareRow {
    pub scheme: BeamformerKind,
    pub bound: BoundKind,
    pub m_tx: usize,
    pub draws: usize,
    /// Mean bound value over the CSIT draws.
    pub value: f64,
    /// The bound was positive on every draw.
    pub valid: bool,
    pub valid_fraction: f64,
    pub min_value: f64,
    pub max_value: f64,
}

/// One row per (bound, scheme). Bounds a scheme does not define (the
/// hardened limit outside plain MF) are reported as NaN and invalid.
pub fn bounds_compare(cfg: &ExperimentConfig, runner: &Runner) -> Result<Vec<BoundsCompareRow>> {
    let params = cfg.aging()?;
    let p_out = cfg.p_out()?;
    let bounds = cfg.bounds_or(&[
        BoundKind::Chernoff,
        BoundKind::Chebyshev,
        BoundKind::Polynomial,
        BoundKind::HardenedLimit,
    ]);
    let defined = |b: BoundKind, k: BeamformerKind| {
        b != BoundKind::HardenedLimit || hardened_limit(k, cfg.n_rx, &params).is_ok()
    };
    let ks = [cfg.k_groups];
    let n_series = bounds.len() * cfg.schemes.len();
    #[derive(Clone, Copy)]
    struct Acc {
        m: Moments,
        valid: u64,
        min: f64,
        max: f64,
    }
    let init = Acc {
        m: Moments::default(),
        valid: 0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    let accs = runner.fold_chunks(
        &key(cfg.seed, TAG_DRAWS, 0),
        cfg.channel_draws as u64,
        vec![init; n_series],
        |range, rng| {
            let mut out = vec![init; n_series];
            for _ in range {
                let (h0, plans) = draw_csit(cfg.m_tx, cfg.n_rx, &ks, rng)?;
                for (s, &kind) in cfg.schemes.iter().enumerate() {
                    let ev = evaluate(kind, &h0, plans.first(), &params)?;
                    for (b, &bound) in bounds.iter().enumerate() {
                        if !defined(bound, kind) {
                            continue;
                        }
                        let v = bound_value(bound, kind, &ev.dist, &h0, &params, p_out, cfg.tol)?;
                        let a = &mut out[b * cfg.schemes.len() + s];
                        a.m.push(v);
                        a.valid += u64::from(v > 0.0 && v.is_finite());
                        a.min = a.min.min(v);
                        a.max = a.max.max(v);
                    }
                }
            }
            Ok(out)
        },
        |acc, part| {
            for (a, p) in acc.iter_mut().zip(part) {
                a.m.merge(p.m);
                a.valid += p.valid;
                a.min = a.min.min(p.min);
                a.max = a.max.max(p.max);
            }
        },
    )?;
    let draws = cfg.channel_draws;
    let mut rows = Vec::with_capacity(n_series);
    for (b, &bound) in bounds.iter().enumerate() {
        for (s, &scheme) in cfg.schemes.iter().enumerate() {
            let a = accs[b * cfg.schemes.len() + s];
            let ok = defined(bound, scheme);
            rows.push(BoundsCompareRow {
                scheme,
                bound,
                m_tx: cfg.m_tx,
                draws,
                value: if ok { a.m.mean() } else { f64::NAN },
                valid: ok && a.valid == draws as u64,
                valid_fraction: a.valid as f64 / draws as f64,
                min_value: if ok { a.min } else { f64::NAN },
                max_value: if ok { a.max } else { f64::NAN },
            });
        }
    }
    Ok(rows)
}
