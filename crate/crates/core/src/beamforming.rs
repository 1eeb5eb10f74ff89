//! Transmit weights built from aged CSIT, and the gains they realize on the
//! channel actually in use.

use crate::error::{invalid, Error, Result};
use crate::fading::{dot, ChannelSnapshot};
use crate::rng::SeededRng;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const SVD_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamformerKind {
    SvdSingleStream,
    SuperimposedMf,
    TimeOrthogonalMf,
    TimeOrthogonalMfRecycling,
    MrcBaseline,
    GstbcSuperimposed,
    GstbcTimeOrthogonal,
}

impl BeamformerKind {
    pub const ALL: [BeamformerKind; 7] = [
        BeamformerKind::SvdSingleStream,
        BeamformerKind::SuperimposedMf,
        BeamformerKind::TimeOrthogonalMf,
        BeamformerKind::TimeOrthogonalMfRecycling,
        BeamformerKind::MrcBaseline,
        BeamformerKind::GstbcSuperimposed,
        BeamformerKind::GstbcTimeOrthogonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BeamformerKind::SvdSingleStream => "svd_single_stream",
            BeamformerKind::SuperimposedMf => "superimposed_mf",
            BeamformerKind::TimeOrthogonalMf => "time_orthogonal_mf",
            BeamformerKind::TimeOrthogonalMfRecycling => "time_orthogonal_mf_recycling",
            BeamformerKind::MrcBaseline => "mrc_baseline",
            BeamformerKind::GstbcSuperimposed => "gstbc_superimposed",
            BeamformerKind::GstbcTimeOrthogonal => "gstbc_time_orthogonal",
        }
    }

    pub fn is_gstbc(self) -> bool {
        matches!(
            self,
            BeamformerKind::GstbcSuperimposed | BeamformerKind::GstbcTimeOrthogonal
        )
    }

    /// Schemes that serve every Rx antenna with one weight vector per group.
    pub fn is_superimposed_family(self) -> bool {
        matches!(
            self,
            BeamformerKind::SvdSingleStream
                | BeamformerKind::SuperimposedMf
                | BeamformerKind::GstbcSuperimposed
        )
    }

    pub fn is_time_orthogonal_family(self) -> bool {
        matches!(
            self,
            BeamformerKind::TimeOrthogonalMf
                | BeamformerKind::TimeOrthogonalMfRecycling
                | BeamformerKind::GstbcTimeOrthogonal
        )
    }

    /// Channel uses per packet relative to one superimposed slot.
    pub fn latency_slots(self, n_rx: usize, k_groups: usize) -> usize {
        match self {
            BeamformerKind::TimeOrthogonalMf | BeamformerKind::TimeOrthogonalMfRecycling => n_rx,
            BeamformerKind::GstbcSuperimposed => k_groups,
            BeamformerKind::GstbcTimeOrthogonal => n_rx * k_groups,
            _ => 1,
        }
    }
}

impl fmt::Display for BeamformerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BeamformerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown beamformer kind `{s}`")))
    }
}

/// Partition of the Tx antennas into K groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    m_tx: usize,
    assignment: Vec<Vec<usize>>,
}

impl GroupingPlan {
    /// Validates that `assignment` partitions `0..m_tx` into nonempty groups.
    pub fn new(m_tx: usize, assignment: Vec<Vec<usize>>) -> Result<Self> {
        if assignment.is_empty() || assignment.iter().any(Vec::is_empty) {
            return Err(invalid("grouping needs at least one nonempty group"));
        }
        let mut seen = vec![false; m_tx];
        for &i in assignment.iter().flatten() {
            if i >= m_tx || std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("antenna {i} is out of range or assigned twice")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("grouping does not cover every antenna"));
        }
        Ok(Self { m_tx, assignment })
    }

    /// One group holding every antenna.
    pub fn single(m_tx: usize) -> Self {
        Self {
            m_tx,
            assignment: vec![(0..m_tx).collect()],
        }
    }

    pub fn k_groups(&self) -> usize {
        self.assignment.len()
    }

    pub fn m_tx(&self) -> usize {
        self.m_tx
    }

    pub fn group(&self, k: usize) -> &[usize] {
        &self.assignment[k]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignment.iter().map(Vec::len).collect()
    }
}

/// Contiguous antenna blocks of size `floor(M/K)`; when K does not divide M,
/// `M mod K` randomly chosen groups get one extra antenna.
pub fn adjacent_grouping(m_tx: usize, k_groups: usize, rng: &mut SeededRng) -> Result<GroupingPlan> {
    if k_groups == 0 || k_groups > m_tx {
        return Err(invalid(format!(
            "need 1 <= K <= M, got K={k_groups}, M={m_tx}"
        )));
    }
    let base = m_tx / k_groups;
    let extra = m_tx - k_groups * base;
    let mut sizes = vec![base; k_groups];
    if extra > 0 {
        // Partial Fisher-Yates: the first `extra` slots are a uniform subset.
        let mut order: Vec<usize> = (0..k_groups).collect();
        for i in 0..extra {
            let j = i + rng.uniform_index(k_groups - i);
            order.swap(i, j);
        }
        for &g in &order[..extra] {
            sizes[g] += 1;
        }
    }
    let mut start = 0;
    let assignment = sizes
        .into_iter()
        .map(|s| {
            let block = (start..start + s).collect();
            start += s;
            block
        })
        .collect();
    Ok(GroupingPlan { m_tx, assignment })
}

/// Beamforming weights for one scheme. Every vector has length M and unit norm.
///
/// Layout of `vectors` by kind:
/// - single-vector kinds (SVD, superimposed, MRC): one vector;
/// - time-orthogonal (with or without recycling): `w_n` for each Rx antenna `n`;
/// - G-STBC superimposed: `w_k` per group, zero outside the group;
/// - G-STBC time-orthogonal: `w_{n,k}` at index `n * K + k`, zero outside group `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxWeights {
    pub kind: BeamformerKind,
    pub vectors: Vec<Vec<Complex64>>,
    pub grouping: Option<GroupingPlan>,
}

impl TxWeights {
    pub fn m_tx(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn k_groups(&self) -> usize {
        self.grouping.as_ref().map_or(1, GroupingPlan::k_groups)
    }

    /// The single weight vector of a single-vector kind.
    pub fn single(&self) -> Option<&[Complex64]> {
        match self.kind {
            BeamformerKind::SvdSingleStream
            | BeamformerKind::SuperimposedMf
            | BeamformerKind::MrcBaseline => Some(&self.vectors[0]),
            _ => None,
        }
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
}

fn conj_normalized(v: &[Complex64], what: &str) -> Result<Vec<Complex64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateChannel(format!("{what} has zero norm")));
    }
    Ok(v.iter().map(|z| z.conj() / n).collect())
}

fn row_sum(h: &ChannelSnapshot) -> Vec<Complex64> {
    let mut s = vec![Complex64::new(0.0, 0.0); h.m_tx()];
    for row in h.rows() {
        for (a, b) in s.iter_mut().zip(row) {
            *a += b;
        }
    }
    s
}

/// SVD-based single-stream weights: unit-norm `sum q_n`, and the predicted
/// iSNR coefficient `(sum lambda_n)^2 / N` (transmit power excluded).
pub fn svd_single_stream(h0: &ChannelSnapshot) -> Result<(Vec<Complex64>, f64)> {
    let (n, m) = (h0.n_rx(), h0.m_tx());
    if n > m {
        return Err(Error::DegenerateChannel(format!(
            "{n}x{m} channel cannot have rank {n}"
        )));
    }
    let mat = DMatrix::from_row_slice(n, m, h0.entries());
    let svd = mat.svd(false, true);
    let sv = &svd.singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= SVD_RANK_TOL * max {
        return Err(Error::DegenerateChannel(format!(
            "channel is rank deficient (singular values {min:e}..{max:e})"
        )));
    }
    let v_t = svd.v_t.expect("requested V^T");
    // Rows of V^H are q_n^H, so q_n is the conjugate of row n.
    let mut w = vec![Complex64::new(0.0, 0.0); m];
    for r in 0..v_t.nrows() {
        for (c, wc) in w.iter_mut().enumerate() {
            *wc += v_t[(r, c)].conj();
        }
    }
    let wn = norm(&w);
    w.iter_mut().for_each(|z| *z /= wn);
    let sum: f64 = sv.iter().sum();
    Ok((w, sum * sum / n as f64))
}

/// Superimposed MF: `w = (sum_n h_n^*) / ||sum_n h_n||`.
pub fn superimposed_mf(h0: &ChannelSnapshot) -> Result<TxWeights> {
    let w = conj_normalized(&row_sum(h0), "Rx row sum")?;
    Ok(TxWeights {
        kind: BeamformerKind::SuperimposedMf,
        vectors: vec![w],
        grouping: None,
    })
}

/// Time-orthogonal MF: `w_n = h_n^* / ||h_n||`, one slot per Rx antenna.
pub fn time_orthogonal_mf(h0: &ChannelSnapshot) -> Result<TxWeights> {
    let vectors = h0
        .rows()
        .enumerate()
        .map(|(n, row)| conj_normalized(row, &format!("Rx row {n}")))
        .collect::<Result<_>>()?;
    Ok(TxWeights {
        kind: BeamformerKind::TimeOrthogonalMf,
        vectors,
        grouping: None,
    })
}

/// Time-orthogonal weights whose gain is evaluated with Rx-side energy recycling.
pub fn time_orthogonal_mf_recycling(h0: &ChannelSnapshot) -> Result<TxWeights> {
    let mut w = time_orthogonal_mf(h0)?;
    w.kind = BeamformerKind::TimeOrthogonalMfRecycling;
    Ok(w)
}

/// Single Tx antenna `tx_antenna`; the gain comes from Rx combining only.
pub fn mrc_weights(m_tx: usize, tx_antenna: usize) -> Result<TxWeights> {
    if tx_antenna >= m_tx {
        return Err(invalid(format!(
            "tx antenna {tx_antenna} out of range for M={m_tx}"
        )));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); m_tx];
    w[tx_antenna] = Complex64::new(1.0, 0.0);
    Ok(TxWeights {
        kind: BeamformerKind::MrcBaseline,
        vectors: vec![w],
        grouping: None,
    })
}

fn group_mf(source: &[Complex64], group: &[usize], m_tx: usize, what: &str) -> Result<Vec<Complex64>> {
    let n: f64 = group.iter().map(|&i| source[i].norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateChannel(format!("{what} has zero norm")));
    }
    let mut w = vec![Complex64::new(0.0, 0.0); m_tx];
    for &i in group {
        w[i] = source[i].conj() / n;
    }
    Ok(w)
}

/// Per-group MF weights for grouped STBC.
pub fn gstbc_weights(h0: &ChannelSnapshot, plan: &GroupingPlan, kind: BeamformerKind) -> Result<TxWeights> {
    if plan.m_tx() != h0.m_tx() {
        return Err(invalid(format!(
            "grouping covers {} antennas, channel has {}",
            plan.m_tx(),
            h0.m_tx()
        )));
    }
    let m = h0.m_tx();
    let vectors = match kind {
        BeamformerKind::GstbcSuperimposed => {
            let s = row_sum(h0);
            plan.groups()
                .iter()
                .enumerate()
                .map(|(k, g)| group_mf(&s, g, m, &format!("group {k} row sum")))
                .collect::<Result<Vec<_>>>()?
        }
        BeamformerKind::GstbcTimeOrthogonal => {
            let mut out = Vec::with_capacity(h0.n_rx() * plan.k_groups());
            for (n, row) in h0.rows().enumerate() {
                for (k, g) in plan.groups().iter().enumerate() {
                    out.push(group_mf(row, g, m, &format!("row {n} group {k}"))?);
                }
            }
            out
        }
        other => {
            return Err(invalid(format!("{other} is not a G-STBC kind")));
        }
    };
    Ok(TxWeights {
        kind,
        vectors,
        grouping: Some(plan.clone()),
    })
}

/// Builds the weights of `kind` from CSIT `h0`. G-STBC kinds need `plan`;
/// MRC uses Tx antenna 0.
pub fn build_weights(kind: BeamformerKind, h0: &ChannelSnapshot, plan: Option<&GroupingPlan>) -> Result<TxWeights> {
    match kind {
        BeamformerKind::SvdSingleStream => {
            let (w, _) = svd_single_stream(h0)?;
            Ok(TxWeights {
                kind,
                vectors: vec![w],
                grouping: None,
            })
        }
        BeamformerKind::SuperimposedMf => superimposed_mf(h0),
        BeamformerKind::TimeOrthogonalMf => time_orthogonal_mf(h0),
        BeamformerKind::TimeOrthogonalMfRecycling => time_orthogonal_mf_recycling(h0),
        BeamformerKind::MrcBaseline => mrc_weights(h0.m_tx(), 0),
        BeamformerKind::GstbcSuperimposed | BeamformerKind::GstbcTimeOrthogonal => {
            let plan = plan.ok_or_else(|| invalid(format!("{kind} needs a grouping plan")))?;
            gstbc_weights(h0, plan, kind)
        }
    }
}

fn group_dot(row: &[Complex64], w: &[Complex64], group: &[usize]) -> Complex64 {
    group.iter().map(|&i| row[i] * w[i]).sum()
}

/// N x K equivalent channel `h~_{n,k} = h_{n,k}^T w_k` (or `w_{n,k}`), row-major.
pub fn equivalent_channel(h: &ChannelSnapshot, weights: &TxWeights) -> Result<Vec<Complex64>> {
    let plan = weights
        .grouping
        .as_ref()
        .filter(|_| weights.kind.is_gstbc())
        .ok_or_else(|| invalid("equivalent channel needs G-STBC weights"))?;
    check_dims(h, weights)?;
    let k_groups = plan.k_groups();
    let mut out = Vec::with_capacity(h.n_rx() * k_groups);
    for (n, row) in h.rows().enumerate() {
        for (k, g) in plan.groups().iter().enumerate() {
            let w = match weights.kind {
                BeamformerKind::GstbcSuperimposed => &weights.vectors[k],
                _ => &weights.vectors[n * k_groups + k],
            };
            out.push(group_dot(row, w, g));
        }
    }
    Ok(out)
}

fn check_dims(h: &ChannelSnapshot, weights: &TxWeights) -> Result<()> {
    if weights.m_tx() != h.m_tx() {
        return Err(invalid(format!(
            "weights have length {}, channel has {} Tx antennas",
            weights.m_tx(),
            h.m_tx()
        )));
    }
    let expected = match weights.kind {
        BeamformerKind::TimeOrthogonalMf | BeamformerKind::TimeOrthogonalMfRecycling => h.n_rx(),
        BeamformerKind::GstbcSuperimposed => weights.k_groups(),
        BeamformerKind::GstbcTimeOrthogonal => h.n_rx() * weights.k_groups(),
        _ => 1,
    };
    if weights.vectors.len() != expected {
        return Err(invalid(format!(
            "{} expects {expected} weight vectors for N={}, got {}",
            weights.kind,
            h.n_rx(),
            weights.vectors.len()
        )));
    }
    Ok(())
}

/// Realized beamforming gain of `kind` on a single channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSample {
    pub value: f64,
    pub kind: BeamformerKind,
}

/// Beamforming gain of `weights` on the channel in use, `h_tau`.
pub fn realized_gain(h_tau: &ChannelSnapshot, weights: &TxWeights) -> Result<GainSample> {
    check_dims(h_tau, weights)?;
    Ok(GainSample {
        value: gain_unchecked(h_tau, weights),
        kind: weights.kind,
    })
}

/// [`realized_gain`] without the dimension checks, for hot Monte Carlo loops.
pub fn gain_unchecked(h: &ChannelSnapshot, weights: &TxWeights) -> f64 {
    match weights.kind {
        BeamformerKind::SvdSingleStream | BeamformerKind::SuperimposedMf | BeamformerKind::MrcBaseline => {
            let w = &weights.vectors[0];
            h.rows().map(|row| dot(row, w).norm_sqr()).sum()
        }
        BeamformerKind::TimeOrthogonalMf => h
            .rows()
            .zip(&weights.vectors)
            .map(|(row, w)| dot(row, w).norm_sqr())
            .sum(),
        BeamformerKind::TimeOrthogonalMfRecycling => h
            .rows()
            .map(|row| weights.vectors.iter().map(|w| dot(row, w).norm_sqr()).sum::<f64>())
            .sum(),
        BeamformerKind::GstbcSuperimposed | BeamformerKind::GstbcTimeOrthogonal => {
            let plan = weights.grouping.as_ref().expect("G-STBC weights carry a plan");
            let k_groups = plan.k_groups();
            let mut total = 0.0;
            for (n, row) in h.rows().enumerate() {
                for (k, g) in plan.groups().iter().enumerate() {
                    let w = if weights.kind == BeamformerKind::GstbcSuperimposed {
                        &weights.vectors[k]
                    } else {
                        &weights.vectors[n * k_groups + k]
                    };
                    total += group_dot(row, w, g).norm_sqr();
                }
            }
            total
        }
    }
}

/// Single Tx antenna with Rx maximum-ratio combining: `||H_tau[:, tx]||^2`.
pub fn mrc_baseline_gain(h_tau: &ChannelSnapshot, tx_antenna: usize) -> Result<GainSample> {
    if tx_antenna >= h_tau.m_tx() {
        return Err(invalid(format!(
            "tx antenna {tx_antenna} out of range for M={}",
            h_tau.m_tx()
        )));
    }
    Ok(GainSample {
        value: h_tau.column_norm_sqr(tx_antenna),
        kind: BeamformerKind::MrcBaseline,
    })
}
