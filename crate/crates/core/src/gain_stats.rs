//! Closed-form statistics of the beamforming gain under aged CSIT.
//!
//! Every scheme's gain is a sum of `D` independent terms `|a_i + e_i|^2`
//! with `e_i ~ CN(0, sigma_omega^2)` and known `a_i`, i.e. a scaled complex
//! non-central chi-square. Its Laplace transform is
//!
//! ```text
//! E[exp(-t beta)] = exp(-nc t / (1 + s t)) / (1 + s t)^D,   s = sigma_omega^2,
//! ```
//!
//! with `nc = sum |a_i|^2`, so `(noncentrality, D, sigma_omega^2)` is all the
//! Chernoff machinery ever needs.

use crate::beamforming::{gain_unchecked, BeamformerKind, GroupingPlan, TxWeights};
use crate::error::{invalid, Error, Result};
use crate::fading::{AgingParams, ChannelSnapshot};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainDistribution {
    pub mean: f64,
    /// `D s^2 + 2 s nc`, the variance of the non-central form above.
    pub variance: f64,
    /// The variance as the paper writes it, `4 nc + 2 D s`.
    pub paper_variance: f64,
    pub degrees: usize,
    pub sigma_omega_sq: f64,
    /// `mean - D s`, the part of the mean the transmitter knows.
    pub noncentrality: f64,
}

impl GainDistribution {
    pub fn new(noncentrality: f64, degrees: usize, sigma_omega_sq: f64) -> Result<Self> {
        if degrees == 0 {
            return Err(invalid("gain distribution needs at least one degree"));
        }
        if !(noncentrality >= 0.0 && noncentrality.is_finite()) {
            return Err(invalid(format!("noncentrality must be finite and >= 0, got {noncentrality}")));
        }
        if !(0.0..=1.0).contains(&sigma_omega_sq) {
            return Err(invalid(format!("sigma_omega^2 must lie in [0, 1], got {sigma_omega_sq}")));
        }
        let d = degrees as f64;
        let s = sigma_omega_sq;
        Ok(Self {
            mean: noncentrality + d * s,
            variance: d * s * s + 2.0 * s * noncentrality,
            paper_variance: 4.0 * noncentrality + 2.0 * d * s,
            degrees,
            sigma_omega_sq,
            noncentrality,
        })
    }

    /// Same distribution with the variance replaced (e.g. by an empirical value).
    pub fn with_variance(mut self, variance: f64) -> Self {
        self.variance = variance;
        self
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// True when there is no CSIT uncertainty and the gain equals its mean.
    pub fn is_deterministic(&self) -> bool {
        self.sigma_omega_sq == 0.0
    }
}

/// Distribution of `||H_tau w||^2` for a single unit-norm vector `w` built from `h0`.
pub fn superimposed_moments(h0: &ChannelSnapshot, w: &[Complex64], params: &AgingParams) -> Result<GainDistribution> {
    if w.len() != h0.m_tx() {
        return Err(invalid("weight length does not match the channel"));
    }
    let beta0: f64 = h0.mul_vec(w).iter().map(Complex64::norm_sqr).sum();
    GainDistribution::new(params.j0 * params.j0 * beta0, h0.n_rx(), params.sigma_omega_sq)
}

/// Time-orthogonal MF, with (`D = N^2`) or without (`D = N`) energy recycling.
pub fn time_orthogonal_moments(h0: &ChannelSnapshot, weights: &TxWeights, params: &AgingParams) -> Result<GainDistribution> {
    match weights.kind {
        BeamformerKind::TimeOrthogonalMf | BeamformerKind::TimeOrthogonalMfRecycling => gain_moments(h0, weights, params),
        other => Err(invalid(format!("{other} is not a time-orthogonal kind"))),
    }
}

/// Grouped STBC: `D = N K`.
pub fn gstbc_moments(
    h0: &ChannelSnapshot,
    weights: &TxWeights,
    plan: &GroupingPlan,
    params: &AgingParams,
    kind: BeamformerKind,
) -> Result<GainDistribution> {
    if !kind.is_gstbc() || weights.kind != kind {
        return Err(invalid(format!("weights of kind {} do not match {kind}", weights.kind)));
    }
    if weights.grouping.as_ref() != Some(plan) {
        return Err(invalid("weights were not built for this grouping plan"));
    }
    gain_moments(h0, weights, params)
}

/// Number of independent complex terms in the gain of `kind`.
pub fn degrees_of(kind: BeamformerKind, n_rx: usize, k_groups: usize) -> usize {
    match kind {
        BeamformerKind::TimeOrthogonalMfRecycling => n_rx * n_rx,
        BeamformerKind::GstbcSuperimposed | BeamformerKind::GstbcTimeOrthogonal => n_rx * k_groups,
        _ => n_rx,
    }
}

/// Gain distribution for any scheme: `nc = j0^2 beta_0`, where `beta_0` is the
/// gain the weights would realize on the CSIT itself.
///
/// The MRC baseline uses no CSIT at all: its gain is a central chi-square
/// with `D = N` unit-variance terms.
pub fn gain_moments(h0: &ChannelSnapshot, weights: &TxWeights, params: &AgingParams) -> Result<GainDistribution> {
    if weights.m_tx() != h0.m_tx() {
        return Err(invalid("weights do not match the channel"));
    }
    if weights.kind == BeamformerKind::MrcBaseline {
        return GainDistribution::new(0.0, h0.n_rx(), 1.0);
    }
    let beta0 = gain_unchecked(h0, weights);
    let d = degrees_of(weights.kind, h0.n_rx(), weights.k_groups());
    GainDistribution::new(params.j0 * params.j0 * beta0, d, params.sigma_omega_sq)
}

/// `ln f(t, beta_lb)` where `f(t, b) = exp(t b) E[exp(-t beta)]`.
pub fn log_chernoff_objective(t: f64, beta_lb: f64, dist: &GainDistribution) -> f64 {
    let st = dist.sigma_omega_sq * t;
    t * beta_lb - dist.noncentrality * t / (1.0 + st) - dist.degrees as f64 * st.ln_1p()
}

/// `f(t, beta_lb) = exp(t beta_lb - nc t / (1 + s t)) / (1 + s t)^D`.
pub fn chernoff_objective(t: f64, beta_lb: f64, dist: &GainDistribution) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("Chernoff parameter must be > 0, got {t}")));
    }
    Ok(log_chernoff_objective(t, beta_lb, dist).exp())
}

/// Minimizer of the Chernoff objective over `t > 0`, for `0 < beta_lb < mean`.
pub fn optimal_t(beta_lb: f64, dist: &GainDistribution) -> Result<f64> {
    if dist.is_deterministic() {
        return Err(Error::DeterministicGain(
            "sigma_omega^2 = 0: the gain equals its mean, no Chernoff parameter".into(),
        ));
    }
    if !(beta_lb > 0.0) {
        return Err(invalid(format!("beta_lb must be > 0, got {beta_lb}")));
    }
    if beta_lb >= dist.mean {
        return Err(invalid(format!(
            "beta_lb = {beta_lb} is not below the mean {}; min_t f = 1 at t -> 0",
            dist.mean
        )));
    }
    Ok(optimal_t_unchecked(beta_lb, dist))
}

// Root of b s^2 - D sigma^2 s - nc = 0 in s = 1 + sigma^2 t, written so that
// s - 1 has no cancellation as beta_lb approaches the mean.
pub(crate) fn optimal_t_unchecked(beta_lb: f64, dist: &GainDistribution) -> f64 {
    let s2 = dist.sigma_omega_sq;
    let ds = dist.degrees as f64 * s2;
    let disc = (ds * ds + 4.0 * beta_lb * dist.noncentrality).sqrt();
    2.0 * (dist.mean - beta_lb) / (s2 * (disc + 2.0 * beta_lb - ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{adjacent_grouping, gstbc_weights, superimposed_mf, time_orthogonal_mf, time_orthogonal_mf_recycling};
    use crate::fading::sample_initial_channel;
    use crate::rng::SeededRng;

    fn worked() -> GainDistribution {
        GainDistribution::new(1.5, 1, 0.5).unwrap()
    }

    #[test]
    fn worked_example_objective() {
        let f = chernoff_objective(1.0, 1.0, &worked()).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn objective_tends_to_one_at_zero() {
        let d = worked();
        for b in [0.1, 1.0, 5.0] {
            assert!((chernoff_objective(1e-12, b, &d).unwrap() - 1.0).abs() < 1e-10);
        }
        assert!(chernoff_objective(0.0, 1.0, &d).is_err());
        assert!(chernoff_objective(-1.0, 1.0, &d).is_err());
    }

    #[test]
    fn worked_example_t_star() {
        let t = optimal_t(1.0, &worked()).unwrap();
        assert!((t - 1.0).abs() < 1e-14);
    }

    #[test]
    fn t_star_matches_textbook_form() {
        // t* = [D s + sqrt(s^2 D^2 + 4 b nc)] / (2 s b) - 1/s, evaluated where it is well conditioned.
        let d = GainDistribution::new(30.0, 4, 0.14).unwrap();
        for b in [1.0, 5.0, 15.0, 25.0] {
            let s = d.sigma_omega_sq;
            let dd = d.degrees as f64;
            let text = (dd * s + (s * s * dd * dd + 4.0 * b * d.noncentrality).sqrt()) / (2.0 * s * b) - 1.0 / s;
            let t = optimal_t(b, &d).unwrap();
            assert!((t - text).abs() <= 1e-10 * text.abs().max(1.0));
        }
    }

    #[test]
    fn t_star_near_mean_goes_to_zero() {
        let d = worked();
        let t = optimal_t(d.mean * (1.0 - 1e-9), &d).unwrap();
        assert!(t > 0.0 && t < 1e-7);
    }

    #[test]
    fn t_star_errors() {
        let d = worked();
        assert!(matches!(optimal_t(d.mean, &d), Err(Error::InvalidArgument(_))));
        assert!(matches!(optimal_t(0.0, &d), Err(Error::InvalidArgument(_))));
        let det = GainDistribution::new(3.0, 2, 0.0).unwrap();
        assert!(matches!(optimal_t(1.0, &det), Err(Error::DeterministicGain(_))));
    }

    #[test]
    fn distribution_validation() {
        assert!(GainDistribution::new(1.0, 0, 0.5).is_err());
        assert!(GainDistribution::new(-1.0, 1, 0.5).is_err());
        assert!(GainDistribution::new(1.0, 1, 1.5).is_err());
        let d = GainDistribution::new(2.0, 3, 0.25).unwrap();
        assert!((d.mean - 2.75).abs() < 1e-15);
        assert!((d.variance - (3.0 * 0.0625 + 2.0 * 0.25 * 2.0)).abs() < 1e-15);
        assert!((d.paper_variance - (8.0 + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn perfect_csit_means() {
        let h = sample_initial_channel(40, 4, &mut SeededRng::new(1)).unwrap();
        let p = AgingParams::from_correlation(1.0).unwrap();
        let w = superimposed_mf(&h).unwrap();
        let d = superimposed_moments(&h, &w.vectors[0], &p).unwrap();
        let direct: f64 = h.mul_vec(&w.vectors[0]).iter().map(Complex64::norm_sqr).sum();
        assert!((d.mean - direct).abs() < 1e-12 * direct);
        assert!(d.is_deterministic());
        assert_eq!(d.variance, 0.0);

        let t = time_orthogonal_mf(&h).unwrap();
        let d = time_orthogonal_moments(&h, &t, &p).unwrap();
        assert!((d.mean - h.norm_sqr()).abs() < 1e-9 * d.mean);
        assert_eq!(d.degrees, 4);
    }

    #[test]
    fn fully_decorrelated_means() {
        let h = sample_initial_channel(40, 4, &mut SeededRng::new(2)).unwrap();
        let p = AgingParams::from_correlation(0.0).unwrap();
        let w = superimposed_mf(&h).unwrap();
        assert!((superimposed_moments(&h, &w.vectors[0], &p).unwrap().mean - 4.0).abs() < 1e-15);
        let r = time_orthogonal_mf_recycling(&h).unwrap();
        let d = time_orthogonal_moments(&h, &r, &p).unwrap();
        assert_eq!(d.degrees, 16);
        assert!((d.mean - 16.0).abs() < 1e-15);
        assert!(time_orthogonal_moments(&h, &w, &p).is_err());
    }

    #[test]
    fn gstbc_reductions_and_grouping_independence() {
        let h = sample_initial_channel(30, 4, &mut SeededRng::new(3)).unwrap();
        let p = AgingParams::from_kinematics(15.0, 3.5e9, 5e-4).unwrap();
        let single = GroupingPlan::single(30);
        let gs = gstbc_weights(&h, &single, BeamformerKind::GstbcSuperimposed).unwrap();
        let a = gstbc_moments(&h, &gs, &single, &p, BeamformerKind::GstbcSuperimposed).unwrap();
        let w = superimposed_mf(&h).unwrap();
        let b = superimposed_moments(&h, &w.vectors[0], &p).unwrap();
        assert!((a.mean - b.mean).abs() <= 1e-12 * b.mean);
        assert_eq!(a.degrees, b.degrees);

        let gt = gstbc_weights(&h, &single, BeamformerKind::GstbcTimeOrthogonal).unwrap();
        let a = gstbc_moments(&h, &gt, &single, &p, BeamformerKind::GstbcTimeOrthogonal).unwrap();
        let b = time_orthogonal_moments(&h, &time_orthogonal_mf(&h).unwrap(), &p).unwrap();
        assert!((a.mean - b.mean).abs() <= 1e-12 * b.mean);

        // Two different 8-group partitions give the same time-orthogonal mean.
        let plan1 = adjacent_grouping(30, 8, &mut SeededRng::new(1)).unwrap();
        let mut idx: Vec<usize> = (0..30).rev().collect();
        idx.rotate_left(7);
        let plan2 = GroupingPlan::new(30, plan1.groups().iter().map(|g| g.iter().map(|&i| idx[i]).collect()).collect()).unwrap();
        let m1 = gstbc_moments(&h, &gstbc_weights(&h, &plan1, BeamformerKind::GstbcTimeOrthogonal).unwrap(), &plan1, &p, BeamformerKind::GstbcTimeOrthogonal).unwrap();
        let m2 = gstbc_moments(&h, &gstbc_weights(&h, &plan2, BeamformerKind::GstbcTimeOrthogonal).unwrap(), &plan2, &p, BeamformerKind::GstbcTimeOrthogonal).unwrap();
        assert!((m1.mean - m2.mean).abs() <= 1e-12 * m1.mean);
        assert_eq!(m1.degrees, 32);
        let want = p.j0 * p.j0 * h.norm_sqr() + 32.0 * p.sigma_omega_sq;
        assert!((m1.mean - want).abs() <= 1e-12 * want);

        assert!(gstbc_moments(&h, &gs, &plan1, &p, BeamformerKind::GstbcSuperimposed).is_err());
    }
}
