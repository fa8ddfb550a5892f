//! Probe schedules and tail-limit estimation.
//!
//! Every "limit as n goes to infinity" in this crate is estimated the same
//! way: evaluate the quantity along a sparse geometric index schedule, then
//! classify the tail as converged, diverged, oscillating, or inconclusive.
//! Keeping one engine with pinned tolerances makes verdicts comparable
//! across modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::median;
use crate::sequences::{NormalizingSequence, PointSequence};
use crate::space::MetricSpace;

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_ABS_TOL: f64 = 1e-9;

/// Relative and absolute tolerance pair passed to [`estimate_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: DEFAULT_REL_TOL,
            abs: DEFAULT_ABS_TOL,
        }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        if !(rel > 0.0 && rel.is_finite() && abs > 0.0 && abs.is_finite()) {
            return Err(Error::InvalidArgument(
                "tolerances must be positive finite".into(),
            ));
        }
        Ok(Tolerances { rel, abs })
    }
}

/// Length of the tail window used by the convergence test.
pub const TAIL_LEN: usize = 6;
/// Minimum sample count accepted by `estimate_limit`.
pub const MIN_SAMPLES: usize = 8;
/// Window used by the oscillation detector.
const OSC_WINDOW: usize = 10;
/// Cluster centers must be separated by this multiple of the tolerance (or
/// of the cluster spreads, whichever is larger).
const CLUSTER_GAP_FACTOR: f64 = 4.0;
/// A strictly increasing tail growing by at least this factor across the
/// growth window is divergent even before it exceeds 1/abs_tol.
const DIVERGENCE_GROWTH_FACTOR: f64 = 4.0;
/// Window over which divergent growth is measured. Wider than the
/// convergence tail so that slow power growth (square roots of a geometric
/// index schedule grow only ~3x per six samples) is still caught.
const GROWTH_WINDOW: usize = 10;
/// Growth must be sustained: each half of the growth window has to expand by
/// this factor on its own. A sequence that climbs steeply and then flattens
/// (late-starting convergence) fails this and falls through to acceleration.
const DIVERGENCE_HALF_FACTOR: f64 = 2.0;
/// Floor for the accelerated convergence test, as a fraction of the raw tail
/// spread. Index rounding in geometric schedules injects relative noise of
/// order 1/n_j into power-law tails; one Aitken pass contracts the tail by
/// orders of magnitude but cannot remove that noise, so the accelerated pass
/// certifies against this floor (together with a no-trend check) instead of
/// the bare absolute tolerance.
const ACCEL_CONTRACTION_TOL: f64 = 1e-2;
/// Stand-in for infinity; keeps every stored float finite for serialization.
pub const OVERFLOW_CAP: f64 = 1e300;

/// Sparse strictly increasing probe indices n_0 < n_1 < ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSchedule {
    indices: Vec<u64>,
}

impl IndexSchedule {
    /// Geometric schedule n_j = ceil(base * growth^j). Collisions caused by
    /// rounding at small growth are bumped to keep the schedule strictly
    /// increasing.
    pub fn geometric(base: f64, growth: f64, len: usize) -> Result<Self> {
        if !(base >= 1.0 && growth > 1.0) || len == 0 {
            return Err(Error::InvalidArgument(format!(
                "geometric schedule needs base >= 1, growth > 1, len >= 1 \
                 (got {base}, {growth}, {len})"
            )));
        }
        let mut indices = Vec::with_capacity(len);
        let mut prev = 0u64;
        for j in 0..len {
            let raw = (base * growth.powi(j as i32)).ceil();
            if !raw.is_finite() || raw >= 9.0e18 {
                return Err(Error::InvalidArgument(
                    "schedule index overflows u64".into(),
                ));
            }
            let n = (raw as u64).max(prev + 1);
            indices.push(n);
            prev = n;
        }
        Ok(IndexSchedule { indices })
    }

    pub fn from_indices(indices: Vec<u64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty schedule".into()));
        }
        if indices[0] == 0 || indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "schedule indices must be strictly increasing and start at >= 1".into(),
            ));
        }
        Ok(IndexSchedule { indices })
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sub-schedule keeping every `step`-th index.
    pub fn thin(&self, step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidArgument("thin step must be >= 1".into()));
        }
        Self::from_indices(self.indices.iter().copied().step_by(step).collect())
    }
}

impl Default for IndexSchedule {
    fn default() -> Self {
        IndexSchedule::geometric(4.0, 1.6, 24).expect("default schedule parameters are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitStatus {
    Converged,
    Diverged,
    Oscillating,
    Inconclusive,
}

/// Classification of a sampled tail. `value` is set only for `Converged`;
/// `clusters` only for `Oscillating`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitVerdict {
    pub status: LimitStatus,
    pub value: Option<f64>,
    pub error_estimate: f64,
    pub tail_values: Vec<f64>,
    pub accelerated: bool,
    pub clusters: Vec<f64>,
}

impl LimitVerdict {
    pub fn is_converged(&self) -> bool {
        self.status == LimitStatus::Converged
    }

    /// Converged value, if any.
    pub fn converged_value(&self) -> Option<f64> {
        if self.is_converged() {
            self.value
        } else {
            None
        }
    }

    fn basic(status: LimitStatus, tail: Vec<f64>) -> Self {
        LimitVerdict {
            status,
            value: None,
            error_estimate: 0.0,
            tail_values: tail,
            accelerated: false,
            clusters: Vec::new(),
        }
    }
}

/// One Aitken delta-squared pass. Entries where the second difference
/// vanishes (already converged region) fall back to the raw value.
pub fn aitken(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n < 3 {
        return samples.to_vec();
    }
    let mut out = Vec::with_capacity(n - 2);
    for i in 0..n - 2 {
        let (s0, s1, s2) = (samples[i], samples[i + 1], samples[i + 2]);
        let d1 = s1 - s0;
        let d2 = s2 - 2.0 * s1 + s0;
        let scale = s0.abs().max(s1.abs()).max(s2.abs());
        if d2.abs() <= f64::EPSILON * 8.0 * scale.max(1e-300) {
            out.push(s2);
        } else {
            out.push(s0 - d1 * d1 / d2);
        }
    }
    out
}

fn tail_of(samples: &[f64], len: usize) -> &[f64] {
    &samples[samples.len().saturating_sub(len)..]
}

fn converged_verdict(
    tail: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    accelerated: bool,
) -> Option<LimitVerdict> {
    let med = median(tail);
    let tol = (rel_tol * med.abs()).max(abs_tol);
    let maxdev = tail.iter().map(|s| (s - med).abs()).fold(0.0f64, f64::max);
    if maxdev <= tol {
        Some(LimitVerdict {
            status: LimitStatus::Converged,
            value: Some(med),
            error_estimate: maxdev,
            tail_values: tail.to_vec(),
            accelerated,
            clusters: Vec::new(),
        })
    } else {
        None
    }
}

/// Classifies the tail of a sampled sequence.
///
/// Order of tests: raw convergence (median of the last `TAIL_LEN` samples),
/// divergence (strictly increasing tail past 1/abs_tol or with sustained
/// geometric growth), Aitken-accelerated convergence (single pass, only on a
/// monotone tail with shrinking differences), oscillation (largest-gap
/// two-cluster split of the last `OSC_WINDOW` samples), else inconclusive.
pub fn estimate_limit(samples: &[f64], rel_tol: f64, abs_tol: f64) -> Result<LimitVerdict> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "estimate_limit needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(rel_tol > 0.0 && abs_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN sample".into()));
    }
    let clamped: Vec<f64> = samples
        .iter()
        .map(|&s| {
            if s.is_infinite() || s.abs() > OVERFLOW_CAP {
                OVERFLOW_CAP.copysign(s)
            } else {
                s
            }
        })
        .collect();

    let tail = tail_of(&clamped, TAIL_LEN);
    if let Some(v) = converged_verdict(tail, rel_tol, abs_tol, false) {
        return Ok(v);
    }

    let med = median(tail);
    let tol = (rel_tol * med.abs()).max(abs_tol);
    let last = *tail.last().unwrap();
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    let sustained_growth = {
        let window = tail_of(&clamped, GROWTH_WINDOW);
        let first = window[0];
        let mid = window[window.len() / 2];
        first > 0.0
            && last >= DIVERGENCE_GROWTH_FACTOR * first
            && mid >= DIVERGENCE_HALF_FACTOR * first
            && last >= DIVERGENCE_HALF_FACTOR * mid
    };
    if last.abs() >= OVERFLOW_CAP || (increasing && (last > 1.0 / abs_tol || sustained_growth)) {
        return Ok(LimitVerdict::basic(LimitStatus::Diverged, tail.to_vec()));
    }

    let mono_window = tail_of(&clamped, TAIL_LEN + 2);
    let monotone = mono_window.windows(2).all(|w| w[1] >= w[0])
        || mono_window.windows(2).all(|w| w[1] <= w[0]);
    let shrinking = {
        let d_first = mono_window[1] - mono_window[0];
        let d_last = mono_window[mono_window.len() - 1] - mono_window[mono_window.len() - 2];
        d_last.abs() <= d_first.abs()
    };
    if monotone && shrinking {
        let acc = aitken(&clamped);
        if acc.len() >= TAIL_LEN {
            let acc_tail = tail_of(&acc, TAIL_LEN);
            let raw_spread = tail.iter().cloned().fold(f64::MIN, f64::max)
                - tail.iter().cloned().fold(f64::MAX, f64::min);
            let med_acc = median(acc_tail);
            let tol_acc = (rel_tol * med_acc.abs())
                .max(abs_tol)
                .max(ACCEL_CONTRACTION_TOL * raw_spread);
            let maxdev_acc = acc_tail
                .iter()
                .map(|s| (s - med_acc).abs())
                .fold(0.0f64, f64::max);
            let trend = (median(&acc_tail[TAIL_LEN - 3..]) - median(&acc_tail[..3])).abs();
            if maxdev_acc <= tol_acc && trend <= tol_acc {
                return Ok(LimitVerdict {
                    status: LimitStatus::Converged,
                    value: Some(med_acc),
                    error_estimate: maxdev_acc,
                    tail_values: acc_tail.to_vec(),
                    accelerated: true,
                    clusters: Vec::new(),
                });
            }
        }
    }

    let mut window = tail_of(&clamped, OSC_WINDOW).to_vec();
    window.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut split = 0;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 0..window.len() - 1 {
        let gap = window[i + 1] - window[i];
        if gap > best_gap {
            best_gap = gap;
            split = i + 1;
        }
    }
    let (lo, hi) = window.split_at(split);
    if lo.len() >= 2 && hi.len() >= 2 {
        let (m_lo, m_hi) = (median(lo), median(hi));
        let spread_lo = lo[lo.len() - 1] - lo[0];
        let spread_hi = hi[hi.len() - 1] - hi[0];
        let sep = m_hi - m_lo;
        if sep > CLUSTER_GAP_FACTOR * tol.max(spread_lo).max(spread_hi) {
            return Ok(LimitVerdict {
                status: LimitStatus::Oscillating,
                value: None,
                error_estimate: spread_lo.max(spread_hi),
                tail_values: tail.to_vec(),
                accelerated: false,
                clusters: vec![m_lo, m_hi],
            });
        }
    }

    Ok(LimitVerdict::basic(
        LimitStatus::Inconclusive,
        tail.to_vec(),
    ))
}

/// d(x_n, y_n) / r_n evaluated along the schedule. Errors if the
/// normalizing sequence is invalid over the schedule or a distance is
/// undefined. Ratios beyond `OVERFLOW_CAP` are clamped.
pub fn ratio_sequence(
    space: &MetricSpace,
    x: &PointSequence,
    y: &PointSequence,
    norm: &NormalizingSequence,
    schedule: &IndexSchedule,
) -> Result<Vec<f64>> {
    norm.validate(schedule.indices())?;
    schedule
        .indices()
        .iter()
        .map(|&n| {
            let d = space.dist(&x.at(n), &y.at(n))?;
            if !d.is_finite() {
                return Err(Error::NumericalAnomaly(format!(
                    "non-finite distance between {} and {} at n = {n}",
                    x.label(),
                    y.label()
                )));
            }
            let r = norm.at(n);
            Ok((d / r).min(OVERFLOW_CAP))
        })
        .collect()
}
