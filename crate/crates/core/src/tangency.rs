//! Shell-to-subspace distance profiles and the tangency decision they
//! support: how far does the sphere of radius t in one subspace stray from
//! the other subspace, and does that deviation vanish faster than t?
//!
//! The profile is sampled on a dyadic radius grid, the decision fits a
//! log-log slope to its tail, and a positive verdict can be cross-checked by
//! transferring a stable family from one subspace to the other.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::Subspace;
use crate::error::{Error, Result};
use crate::limits::TAIL_LEN;
use crate::numerics::{bootstrap_max_stderr, derive_seed, fit_line, median};
use crate::pretangent::{
    family_from_parts, metric_identification, mutual_stability, PretangentQuotient, StableFamily,
    DEFAULT_ZERO_TOL,
};
use crate::sequences::{NormalizingSequence, PointSequence};
use crate::space::Point;

/// Relative half-width of the sampled shell around radius t.
pub const DEFAULT_SHELL_WIDTH: f64 = 0.05;
/// Shell sample budget per grid point and direction.
pub const DEFAULT_N_SPHERE: usize = 512;
/// Target-subspace sample budget for the inner infimum.
pub const DEFAULT_N_TARGET: usize = 4096;
/// Dyadic radius grid length.
pub const DEFAULT_GRID_LEN: usize = 20;
/// Fitted slope must clear 1 by this margin for a tangency verdict.
pub const DEFAULT_SLOPE_MARGIN: f64 = 0.15;
/// Refutation needs the eps/t tail bounded below by this.
pub const DEFAULT_RATIO_FLOOR: f64 = 1e-3;

/// The inner infimum searches the target only inside a ball of this many
/// radii around the base point. Anything outside is at least 2t - eta*t away
/// from every shell point, which already refutes tangency.
const LOCALITY_FACTOR: f64 = 3.0;
/// Inner-infimum refinement stops once a descent round improves the distance
/// by less than this fraction of t^2. The slack is quadratic in t so it
/// cannot bend the fitted slope, and the fraction keeps it well under the
/// t^2/2 deviation of a genuinely tangent pair.
const INNER_REFINE_FACTOR: f64 = 1e-2;
/// Resamples for the shell-maximum error bar.
const BOOTSTRAP_ROUNDS: usize = 64;
/// Minimum usable grid points for a decision.
const MIN_USABLE: usize = 8;
/// The slope is fitted over this many usable tail points.
const FIT_WINDOW: usize = 10;
/// The ratio tail examined by the trend tests.
const RATIO_TAIL_LEN: usize = 6;
/// Ratios at or below this count as an exact collapse (identical subspaces).
const COLLAPSE_RATIO: f64 = 1e-9;
/// Tail-half medians must drop by this factor to call the ratio decreasing.
const DECREASE_FACTOR: f64 = 0.8;
/// Tail-half medians at or above this fraction count as flat or growing.
/// Genuine ratio floors come from scale-invariant geometry and hold exactly,
/// so the band is tight: a slowly vanishing ratio (slope barely above 1)
/// must fall to Inconclusive rather than be refuted.
const FLAT_FACTOR: f64 = 0.97;
/// Base-point membership is verified this loosely, relative to the subspace
/// scale: the check is there to catch points off by the geometry's own
/// order, not to re-derive the projection accuracy.
const MEMBERSHIP_REL_TOL: f64 = 1e-4;

/// One directed shell-to-subspace deviation: the sup over sampled shell
/// points of the distance to the other subspace.
#[derive(Debug, Clone, Serialize)]
pub struct DirectedEpsilon {
    pub value: f64,
    /// Bootstrap standard error of the shell maximum.
    pub error: f64,
    /// No shell points were found at this radius. The value is 0 by the
    /// empty-sup convention and the grid point is excluded from fits.
    pub empty: bool,
    /// Shell point achieving the sup.
    pub witness: Option<Vec<f64>>,
    pub n_shell: usize,
}

impl DirectedEpsilon {
    fn empty_shell() -> Self {
        DirectedEpsilon {
            value: 0.0,
            error: 0.0,
            empty: true,
            witness: None,
            n_shell: 0,
        }
    }
}

/// Sampling and grid parameters shared by the profile operations.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileParams {
    /// Largest shell radius. None picks 0.1x the smaller subspace scale.
    pub t0: Option<f64>,
    pub grid_len: usize,
    pub shell_width: f64,
    pub n_sphere: usize,
    pub n_target: usize,
    pub seed: u64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            t0: None,
            grid_len: DEFAULT_GRID_LEN,
            shell_width: DEFAULT_SHELL_WIDTH,
            n_sphere: DEFAULT_N_SPHERE,
            n_target: DEFAULT_N_TARGET,
            seed: 0,
        }
    }
}

fn validate_params(p: &ProfileParams) -> Result<()> {
    if p.grid_len == 0 {
        return Err(Error::InvalidArgument("grid_len must be at least 1".into()));
    }
    if !(p.shell_width > 0.0 && p.shell_width < 1.0) {
        return Err(Error::InvalidArgument(
            "shell_width must lie strictly between 0 and 1".into(),
        ));
    }
    if p.n_sphere == 0 || p.n_target == 0 {
        return Err(Error::InvalidArgument(
            "sample counts must be positive".into(),
        ));
    }
    if let Some(t0) = p.t0 {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidArgument("t0 must be positive finite".into()));
        }
    }
    Ok(())
}

fn require_member(a: &Point, s: &Subspace, role: &str) -> Result<()> {
    let tol = MEMBERSHIP_REL_TOL * (1.0 + s.scale_estimate());
    if !s.membership(a, tol)? {
        return Err(Error::InvalidArgument(format!(
            "base point is not in {role} ({}) within {tol:.3e}",
            s.label()
        )));
    }
    Ok(())
}

/// Directed deviation of the radius-t shell of `z` from `y`: the sup over
/// sampled shell points of the distance to `y`, where the inner infimum
/// searches y-samples inside the ball of radius 3t around `a` and refines by
/// local parameter descent. Returns the sup with a bootstrap error bar; an
/// unreachable radius comes back flagged `empty` instead of erroring.
#[allow(clippy::too_many_arguments)]
pub fn epsilon(
    a: &Point,
    t: f64,
    z: &Subspace,
    y: &Subspace,
    shell_width: f64,
    n_sphere: usize,
    n_target: usize,
    seed: u64,
) -> Result<DirectedEpsilon> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(
            "shell radius must be positive".into(),
        ));
    }
    if !(shell_width > 0.0 && shell_width < 1.0) {
        return Err(Error::InvalidArgument(
            "shell_width must lie strictly between 0 and 1".into(),
        ));
    }
    if n_sphere == 0 || n_target == 0 {
        return Err(Error::InvalidArgument(
            "sample counts must be positive".into(),
        ));
    }
    require_member(a, z, "the shell subspace")?;
    require_member(a, y, "the target subspace")?;
    directed_epsilon(a, t, z, y, shell_width, n_sphere, n_target, seed)
}

#[allow(clippy::too_many_arguments)]
fn directed_epsilon(
    a: &Point,
    t: f64,
    from: &Subspace,
    to: &Subspace,
    shell_width: f64,
    n_sphere: usize,
    n_target: usize,
    seed: u64,
) -> Result<DirectedEpsilon> {
    let shell = from.shell_sample(a, t, shell_width, n_sphere, derive_seed(seed, "shell", 0))?;
    if shell.is_empty() {
        return Ok(DirectedEpsilon::empty_shell());
    }
    let ball = to.ball_sample(
        a,
        LOCALITY_FACTOR * t,
        n_target,
        derive_seed(seed, "ball", 0),
    )?;
    let stop = INNER_REFINE_FACTOR * t * t;
    let dists: Vec<f64> = shell
        .par_iter()
        .map(|sp| match to.nearest_among(&sp.ambient, &ball, stop) {
            // no target sample within 3t of the base: fall back to the
            // global projection so the sup stays honest
            None => to.project(&sp.ambient).map(|(d, _)| d),
            Some((d, _)) => Ok(d),
        })
        .collect::<Result<_>>()?;
    let (best, value) =
        dists
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    let error = bootstrap_max_stderr(&dists, BOOTSTRAP_ROUNDS, derive_seed(seed, "boot", 1));
    Ok(DirectedEpsilon {
        value,
        error,
        empty: false,
        witness: Some(shell[best].ambient.clone()),
        n_shell: shell.len(),
    })
}

/// Both directed deviations over a decreasing dyadic radius grid.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonProfile {
    pub t_grid: Vec<f64>,
    pub eps_zy: Vec<DirectedEpsilon>,
    pub eps_yz: Vec<DirectedEpsilon>,
    pub n_sphere: usize,
    pub n_target: usize,
    pub seed: u64,
}

impl EpsilonProfile {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// Pointwise minimum of the directed values.
    pub fn eps_min(&self) -> Vec<f64> {
        self.eps_zy
            .iter()
            .zip(&self.eps_yz)
            .map(|(a, b)| a.value.min(b.value))
            .collect()
    }

    /// Pointwise maximum of the directed values. The decision runs on this:
    /// the minimum is blind to one subspace strictly containing the other
    /// (the thin side never strays from the fat one), while the maximum
    /// vanishes at order > t exactly when both do.
    pub fn eps_combined(&self) -> Vec<f64> {
        self.eps_zy
            .iter()
            .zip(&self.eps_yz)
            .map(|(a, b)| a.value.max(b.value))
            .collect()
    }

    /// A grid point is usable when at least one direction found shell points.
    pub fn usable(&self, k: usize) -> bool {
        !(self.eps_zy[k].empty && self.eps_yz[k].empty)
    }

    /// Error bar of the direction that achieves the combined value.
    fn combined_error(&self, k: usize) -> f64 {
        if self.eps_zy[k].value >= self.eps_yz[k].value {
            self.eps_zy[k].error
        } else {
            self.eps_yz[k].error
        }
    }

    /// Witness shell point of the direction that achieves the combined value.
    fn combined_witness(&self, k: usize) -> Option<Vec<f64>> {
        if self.eps_zy[k].value >= self.eps_yz[k].value {
            self.eps_zy[k].witness.clone()
        } else {
            self.eps_yz[k].witness.clone()
        }
    }
}

/// Evaluates both directed deviations over the grid t_k = t0 / 2^k.
/// Grid points and directions are independent work items; each draws its
/// randomness from a seed derived per (index, direction).
pub fn epsilon_profile(
    a: &Point,
    z: &Subspace,
    y: &Subspace,
    params: &ProfileParams,
) -> Result<EpsilonProfile> {
    validate_params(params)?;
    require_member(a, z, "the shell subspace")?;
    require_member(a, y, "the target subspace")?;
    let t0 = match params.t0 {
        Some(v) => v,
        None => 0.1 * z.scale_estimate().min(y.scale_estimate()),
    };
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "derived t0 = {t0} is not a usable radius"
        )));
    }
    let t_grid: Vec<f64> = (0..params.grid_len)
        .map(|k| t0 * 0.5f64.powi(k as i32))
        .collect();

    let jobs: Vec<(usize, bool)> = (0..params.grid_len)
        .flat_map(|k| [(k, false), (k, true)])
        .collect();
    let results: Vec<DirectedEpsilon> = jobs
        .par_iter()
        .map(|&(k, swapped)| {
            let tag = if swapped { "eps-yz" } else { "eps-zy" };
            let s = derive_seed(params.seed, tag, k as u64);
            let (from, to) = if swapped { (y, z) } else { (z, y) };
            directed_epsilon(
                a,
                t_grid[k],
                from,
                to,
                params.shell_width,
                params.n_sphere,
                params.n_target,
                s,
            )
        })
        .collect::<Result<_>>()?;
    let mut eps_zy = Vec::with_capacity(params.grid_len);
    let mut eps_yz = Vec::with_capacity(params.grid_len);
    for pair in results.chunks(2) {
        eps_zy.push(pair[0].clone());
        eps_yz.push(pair[1].clone());
    }

    let dead = (0..t_grid.len())
        .filter(|&k| eps_zy[k].empty && eps_yz[k].empty)
        .count();
    if 2 * dead > t_grid.len() {
        return Err(Error::InsufficientGeometry(format!(
            "{dead} of {} grid radii produced no shell samples in either direction",
            t_grid.len()
        )));
    }
    Ok(EpsilonProfile {
        t_grid,
        eps_zy,
        eps_yz,
        n_sphere: params.n_sphere,
        n_target: params.n_target,
        seed: params.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TangencyKind {
    StronglyTangentEquivalent,
    NotTangentEquivalent,
    Inconclusive,
}

/// Decision extracted from an [`EpsilonProfile`].
#[derive(Debug, Clone, Serialize)]
pub struct TangencyVerdict {
    pub kind: TangencyKind,
    /// Log-log slope of the combined deviation over the fit window.
    pub slope: Option<f64>,
    /// Two-sigma band around the slope.
    pub slope_band: Option<(f64, f64)>,
    /// Combined deviation over radius, along the usable tail, largest radius
    /// first.
    pub ratio_tail: Vec<f64>,
    /// Lower confidence bound on the tail ratio when refuting.
    pub floor: Option<f64>,
    /// Shell point backing the refutation.
    pub witness: Option<Vec<f64>>,
    pub usable_points: usize,
    pub note: String,
}

impl TangencyVerdict {
    fn inconclusive(ratio_tail: Vec<f64>, usable_points: usize, note: String) -> Self {
        TangencyVerdict {
            kind: TangencyKind::Inconclusive,
            slope: None,
            slope_band: None,
            ratio_tail,
            floor: None,
            witness: None,
            usable_points,
            note,
        }
    }
}

/// Decides strong tangent equivalence from a profile. Tangent: the fitted
/// slope clears 1 by `slope_margin` and the deviation-over-radius tail
/// decreases. Refuted: the tail is bounded below by `ratio_floor` (after
/// subtracting error bars) and does not decrease. Anything else, including a
/// profile with fewer than 8 usable grid points, is inconclusive; this
/// function never errors.
pub fn decide_strong_tangency(
    profile: &EpsilonProfile,
    slope_margin: f64,
    ratio_floor: f64,
) -> TangencyVerdict {
    if !(slope_margin > 0.0
        && slope_margin.is_finite()
        && ratio_floor > 0.0
        && ratio_floor.is_finite())
    {
        return TangencyVerdict::inconclusive(
            Vec::new(),
            0,
            "slope margin and ratio floor must be positive finite".into(),
        );
    }
    let usable: Vec<usize> = (0..profile.len()).filter(|&k| profile.usable(k)).collect();
    if usable.len() < MIN_USABLE {
        return TangencyVerdict::inconclusive(
            Vec::new(),
            usable.len(),
            format!(
                "only {} usable grid points, need {MIN_USABLE}; widen the grid or the shells",
                usable.len()
            ),
        );
    }
    let combined = profile.eps_combined();
    let tail: Vec<usize> = usable
        .iter()
        .copied()
        .skip(usable.len().saturating_sub(RATIO_TAIL_LEN))
        .collect();
    let ratio_tail: Vec<f64> = tail
        .iter()
        .map(|&k| combined[k] / profile.t_grid[k])
        .collect();

    if ratio_tail.iter().all(|&r| r <= COLLAPSE_RATIO) {
        return TangencyVerdict {
            kind: TangencyKind::StronglyTangentEquivalent,
            slope: None,
            slope_band: None,
            ratio_tail,
            floor: None,
            witness: None,
            usable_points: usable.len(),
            note: "deviation collapses to zero at every tail radius".into(),
        };
    }

    let fit_pts: Vec<usize> = {
        let positive: Vec<usize> = usable
            .iter()
            .copied()
            .filter(|&k| combined[k] > 0.0)
            .collect();
        positive
            .iter()
            .copied()
            .skip(positive.len().saturating_sub(FIT_WINDOW))
            .collect()
    };
    let (slope, slope_band) = if fit_pts.len() >= 3 {
        let xs: Vec<f64> = fit_pts.iter().map(|&k| profile.t_grid[k].ln()).collect();
        let ys: Vec<f64> = fit_pts.iter().map(|&k| combined[k].ln()).collect();
        let (s, _, se) = fit_line(&xs, &ys);
        (Some(s), Some((s - 2.0 * se, s + 2.0 * se)))
    } else {
        (None, None)
    };

    // trend over tail-half medians; robust to single noisy shell maxima
    let half = ratio_tail.len() / 2;
    let m_early = median(&ratio_tail[..half.max(1)]);
    let m_late = median(&ratio_tail[half..]);
    let decreasing = m_late <= DECREASE_FACTOR * m_early;
    let flat_or_growing = m_late >= FLAT_FACTOR * m_early;

    let floor = tail
        .iter()
        .zip(&ratio_tail)
        .map(|(&k, r)| r - profile.combined_error(k) / profile.t_grid[k])
        .fold(f64::INFINITY, f64::min);

    if let Some(s) = slope {
        if s >= 1.0 + slope_margin && decreasing {
            return TangencyVerdict {
                kind: TangencyKind::StronglyTangentEquivalent,
                slope,
                slope_band,
                ratio_tail,
                floor: None,
                witness: None,
                usable_points: usable.len(),
                note: format!(
                    "slope {s:.3} clears 1 + {slope_margin} and the deviation ratio decreases"
                ),
            };
        }
    }
    if floor >= ratio_floor && flat_or_growing {
        let last = *tail.last().expect("tail nonempty");
        return TangencyVerdict {
            kind: TangencyKind::NotTangentEquivalent,
            slope,
            slope_band,
            ratio_tail,
            floor: Some(floor),
            witness: profile.combined_witness(last),
            usable_points: usable.len(),
            note: format!("deviation ratio bounded below by {floor:.4} over the tail"),
        };
    }
    TangencyVerdict {
        kind: TangencyKind::Inconclusive,
        slope,
        slope_band,
        ratio_tail,
        floor: None,
        witness: None,
        usable_points: usable.len(),
        note: match slope {
            Some(s) => format!(
                "slope {s:.3} and tail trend (late/early medians {m_late:.3e}/{m_early:.3e}) \
                 support neither verdict"
            ),
            None => "not enough positive deviations to fit a slope".into(),
        },
    }
}

/// How a transferred partner sequence was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairOrigin {
    Pool,
    Projection,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferPair {
    pub member: String,
    pub partner: String,
    pub origin: PairOrigin,
    /// Converged limit distance between member and partner.
    pub residual: f64,
}

/// A family rebuilt inside another subspace, member by member.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub family: StableFamily,
    pub pairs: Vec<TransferPair>,
    /// The transferred family induces the same class partition as the
    /// original, member indices aligned.
    pub classes_match: bool,
}

/// Shadows each family member by a sequence inside `y`: first by the best
/// converging match from `search_pool`, then by per-index nearest-point
/// projection onto `y`. A member whose projection keeps a positive distance
/// ratio cannot be shadowed at this normalization and fails the transfer
/// with the observed floor.
pub fn transfer_family(
    family: &StableFamily,
    y: &Subspace,
    search_pool: &[PointSequence],
    zero_tol: Option<f64>,
) -> Result<TransferOutcome> {
    let space = family.space();
    if space.dim() != y.parent().dim() {
        return Err(Error::InvalidArgument(
            "family space and target subspace live in different ambient spaces".into(),
        ));
    }
    let ztol = zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
    let eps = family.zero_eps(ztol);
    let norm = family.norm();
    let schedule = family.schedule();
    let tol = family.tolerances();

    let mut partners: Vec<PointSequence> = Vec::with_capacity(family.len());
    let mut pairs: Vec<TransferPair> = Vec::with_capacity(family.len());
    for member in family.members() {
        let mut best: Option<(usize, f64)> = None;
        for (pi, cand) in search_pool.iter().enumerate() {
            let v = mutual_stability(space, member, cand, norm, schedule, tol)?;
            if let Some(val) = v.converged_value() {
                if val <= eps.max(4.0 * v.error_estimate) && best.is_none_or(|(_, b)| val < b) {
                    best = Some((pi, val));
                }
            }
        }
        if let Some((pi, val)) = best {
            partners.push(search_pool[pi].clone());
            pairs.push(TransferPair {
                member: member.label().to_string(),
                partner: search_pool[pi].label().to_string(),
                origin: PairOrigin::Pool,
                residual: val,
            });
            continue;
        }
        let (proj, floor) = projected_partner(member, y, schedule.indices(), norm)?;
        let v = mutual_stability(space, member, &proj, norm, schedule, tol)?;
        match v.converged_value() {
            Some(val) if val <= eps.max(4.0 * v.error_estimate) => {
                pairs.push(TransferPair {
                    member: member.label().to_string(),
                    partner: proj.label().to_string(),
                    origin: PairOrigin::Projection,
                    residual: val,
                });
                partners.push(proj);
            }
            _ => {
                return Err(Error::TransferFailure {
                    member: member.label().to_string(),
                    floor,
                });
            }
        }
    }

    // pairwise limits of the transferred members; any failure here means the
    // partners do not form a stable family and the transfer is meaningless
    let m = partners.len();
    let jobs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let verdicts = jobs
        .par_iter()
        .map(|&(i, j)| mutual_stability(space, &partners[i], &partners[j], norm, schedule, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut dmat = vec![vec![None; m]; m];
    for (&(i, j), v) in jobs.iter().zip(verdicts) {
        dmat[j][i] = Some(v.clone());
        dmat[i][j] = Some(v);
    }
    let dmat = dmat
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.expect("filled above")).collect())
        .collect();
    let transferred = family_from_parts(
        space.clone(),
        family.base().clone(),
        norm.clone(),
        schedule.clone(),
        tol,
        partners,
        dmat,
    )?;

    let qz = metric_identification(family, zero_tol)?;
    let qy = metric_identification(&transferred, zero_tol)?;
    let classes_match = normalized_partition(&qz) == normalized_partition(&qy);
    Ok(TransferOutcome {
        family: transferred,
        pairs,
        classes_match,
    })
}

fn normalized_partition(q: &PretangentQuotient) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = q
        .classes
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c
        })
        .collect();
    classes.sort();
    classes
}

/// Per-index nearest-point projection of a member onto `y`, tabulated at the
/// schedule indices. Also returns the observed floor: the minimum of
/// d(z_n, y)/r_n over the schedule tail, which bounds every possible shadow
/// from below when the projection itself fails.
fn projected_partner(
    member: &PointSequence,
    y: &Subspace,
    indices: &[u64],
    norm: &NormalizingSequence,
) -> Result<(PointSequence, f64)> {
    let mut table: Vec<(u64, Point)> = Vec::with_capacity(indices.len());
    let mut floor = f64::INFINITY;
    let tail_from = indices.len().saturating_sub(TAIL_LEN);
    for (j, &n) in indices.iter().enumerate() {
        let p = member.at(n);
        let coords = p.as_coords().map_err(|_| {
            Error::InvalidArgument(format!(
                "transfer needs coordinate sequences, {} produced another point kind",
                member.label()
            ))
        })?;
        let (d, q) = y.project(coords)?;
        if j >= tail_from {
            floor = floor.min(d / norm.at(n));
        }
        table.push((n, Point::coords(q)));
    }
    let label = format!("proj({})", member.label());
    let seq = PointSequence::from_fn(label, move |n| {
        match table.binary_search_by_key(&n, |e| e.0) {
            Ok(i) => table[i].1.clone(),
            Err(0) => table[0].1.clone(),
            Err(i) => table[i - 1].1.clone(),
        }
    });
    Ok((seq, floor))
}

/// Class pairing induced by aligned member indices: class i of `qz` maps to
/// the class its members occupy in `qy`. Errors when a class splits.
pub fn aligned_class_pairing(
    qz: &PretangentQuotient,
    qy: &PretangentQuotient,
) -> Result<Vec<usize>> {
    if qz.class_of.len() != qy.class_of.len() {
        return Err(Error::InvalidArgument(
            "quotients have different member counts".into(),
        ));
    }
    let mut pairing = vec![usize::MAX; qz.classes.len()];
    for (m, &zc) in qz.class_of.iter().enumerate() {
        let yc = qy.class_of[m];
        if pairing[zc] == usize::MAX {
            pairing[zc] = yc;
        } else if pairing[zc] != yc {
            return Err(Error::QuotientInconsistency(format!(
                "members of class {zc} land in different classes of the other quotient"
            )));
        }
    }
    Ok(pairing)
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub isometric: bool,
    pub max_distortion: f64,
    pub tolerance: f64,
}

/// Compares the class metrics of two quotients along a bijective class
/// pairing. Distances must agree within twice the larger zero threshold.
pub fn quotient_isometry_check(
    qz: &PretangentQuotient,
    qy: &PretangentQuotient,
    pairing: &[usize],
) -> Result<IsometryReport> {
    let k = qz.classes.len();
    if pairing.len() != k || qy.classes.len() != k {
        return Err(Error::InvalidArgument(format!(
            "pairing must cover {k} classes of both quotients, got {} -> {}",
            pairing.len(),
            qy.classes.len()
        )));
    }
    let mut seen = vec![false; k];
    for &p in pairing {
        if p >= k || seen[p] {
            return Err(Error::InvalidArgument(
                "pairing is not a bijection on classes".into(),
            ));
        }
        seen[p] = true;
    }
    let tolerance = 2.0 * qz.zero_eps.max(qy.zero_eps);
    let mut max_distortion: f64 = 0.0;
    for i in 0..k {
        for j in 0..i {
            let defect = (qz.rho[i][j] - qy.rho[pairing[i]][pairing[j]]).abs();
            max_distortion = max_distortion.max(defect);
        }
    }
    Ok(IsometryReport {
        isometric: max_distortion <= tolerance,
        max_distortion,
        tolerance,
    })
}

/// Deviation of a space from a dense sample of itself, against the sample's
/// mesh bound.
#[derive(Debug, Clone, Serialize)]
pub struct DenseSampleReport {
    pub t_grid: Vec<f64>,
    /// Shell-of-x deviation from the sample, per grid radius.
    pub eps: Vec<DirectedEpsilon>,
    /// eps within h plus sampling error.
    pub within_mesh: Vec<bool>,
    /// Grid radius below the mesh; ratios there measure resolution, not
    /// geometry.
    pub below_resolution: Vec<bool>,
    /// Every usable radius at or above the mesh met the bound.
    pub tangent_at_resolution: bool,
    pub note: String,
}

/// Checks that the radius-t shells of `x` stay within `h` of the sample `y`
/// for every grid radius, so the deviation ratio is at most h/t and the
/// sample is tangent to the space at every resolution well above h.
/// The inner distance uses the exact projection onto `y` rather than the
/// truncated ball search: the mesh bound must not inherit subsampling error.
pub fn dense_subspace_check(
    x: &Subspace,
    y: &Subspace,
    a: &Point,
    h: f64,
    params: &ProfileParams,
) -> Result<DenseSampleReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(
            "mesh h must be positive finite".into(),
        ));
    }
    validate_params(params)?;
    require_member(a, x, "the sampled space")?;
    let t0 = match params.t0 {
        Some(v) => v,
        None => 0.1 * x.scale_estimate(),
    };
    let t_grid: Vec<f64> = (0..params.grid_len)
        .map(|k| t0 * 0.5f64.powi(k as i32))
        .collect();
    let eps: Vec<DirectedEpsilon> = t_grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let seed = derive_seed(params.seed, "dense-shell", k as u64);
            let shell = x.shell_sample(a, t, params.shell_width, params.n_sphere, seed)?;
            if shell.is_empty() {
                return Ok(DirectedEpsilon::empty_shell());
            }
            let dists: Vec<f64> = shell
                .iter()
                .map(|sp| y.project(&sp.ambient).map(|(d, _)| d))
                .collect::<Result<_>>()?;
            let (best, value) =
                dists
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv {
                            (i, v)
                        } else {
                            (bi, bv)
                        }
                    });
            let error =
                bootstrap_max_stderr(&dists, BOOTSTRAP_ROUNDS, derive_seed(seed, "boot", 1));
            Ok(DirectedEpsilon {
                value,
                error,
                empty: false,
                witness: Some(shell[best].ambient.clone()),
                n_shell: shell.len(),
            })
        })
        .collect::<Result<_>>()?;
    let within_mesh: Vec<bool> = eps
        .iter()
        .map(|e| e.value <= h + 2.0 * e.error + 1e-12)
        .collect();
    let below_resolution: Vec<bool> = t_grid.iter().map(|&t| t < h).collect();
    let tangent_at_resolution = (0..t_grid.len())
        .filter(|&k| !below_resolution[k] && !eps[k].empty)
        .all(|k| within_mesh[k]);
    let floor_count = below_resolution.iter().filter(|&&b| b).count();
    let note = if floor_count > 0 {
        format!(
            "{floor_count} grid radii lie below the sample mesh h = {h:.3e}; deviations there \
             reflect the sampling resolution, not the geometry"
        )
    } else if tangent_at_resolution {
        format!("shell deviations stay within the mesh bound h = {h:.3e} at every radius")
    } else {
        format!("mesh bound h = {h:.3e} violated at some radius; sample may not be dense")
    };
    Ok(DenseSampleReport {
        t_grid,
        eps,
        within_mesh,
        below_resolution,
        tangent_at_resolution,
        note,
    })
}
