//! Families of point sequences that stay mutually stable under a common
//! normalizing sequence, the limit pseudometric they carry, and its metric
//! identification into a genuine metric space of classes.
//!
//! Everything here is pool-relative: maximality, tangency, and confluence
//! are only ever decided against the finite candidate material supplied by
//! the caller, and reports say so. Greedy construction uses input order as
//! the tie-breaker, which makes results deterministic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limits::{
    estimate_limit, ratio_sequence, IndexSchedule, LimitStatus, LimitVerdict, Tolerances,
    OVERFLOW_CAP,
};
use crate::sequences::{IndexSelector, NormalizingSequence, PointSequence};
use crate::space::{MetricSpace, Point};

/// Default zero threshold for the metric identification, relative to the
/// largest limit value in the family. Separates genuine zero limits from
/// small-but-positive ones at double-precision schedule depths.
pub const DEFAULT_ZERO_TOL: f64 = 1e-4;
/// Absolute floor for the effective zero threshold.
pub const ZERO_EPS_FLOOR: f64 = 1e-9;
/// Absolute threshold above which a converged member-to-base limit
/// certifies non-confluence.
pub const CONFLUENCE_TOL: f64 = 1e-4;
/// Slack factor for pseudometric triangle checks, relative to the largest
/// entry.
const TRIANGLE_SLACK: f64 = 1e-6;
/// Members of one zero-class may sit at most this multiple of the zero
/// threshold apart; beyond it the zero relation failed transitivity.
const TRANSITIVITY_FACTOR: f64 = 3.0;
/// Allowed max-min spread of cross-class limits entering one class distance.
const SPREAD_FACTOR: f64 = 2.0;
/// Tail of raw distances to the base must drop below this fraction of the
/// initial distance for a member to count as converging to the base.
const VANISH_FACTOR: f64 = 1e-3;

/// Limit of d(x_n, y_n) / r_n along the schedule. A Converged verdict means
/// the two sequences are mutually stable and carries their limit distance.
pub fn mutual_stability(
    space: &MetricSpace,
    x: &PointSequence,
    y: &PointSequence,
    norm: &NormalizingSequence,
    schedule: &IndexSchedule,
    tol: Tolerances,
) -> Result<LimitVerdict> {
    let samples = ratio_sequence(space, x, y, norm, schedule)?;
    estimate_limit(&samples, tol.rel, tol.abs)
}

/// Why a candidate was rejected from a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RejectionKind {
    /// The limit against an accepted member diverged or oscillated.
    NotStable,
    /// The limit estimator could not classify the tail.
    Inconclusive,
    /// The raw distances to the base point do not vanish.
    NotVanishing,
}

/// Record of one rejected candidate with the failing pair identified.
#[derive(Debug, Clone, Serialize)]
pub struct Rejection {
    pub candidate: String,
    pub against: String,
    pub kind: RejectionKind,
    pub verdict: LimitVerdict,
}

/// A finite family of point sequences, all mutually stable under one
/// normalizing sequence, together with the matrix of their limit distances.
/// Member 0 is always the constant sequence at the base point.
#[derive(Clone)]
pub struct StableFamily {
    space: MetricSpace,
    base: Point,
    norm: NormalizingSequence,
    schedule: IndexSchedule,
    tol: Tolerances,
    members: Vec<PointSequence>,
    dmat: Vec<Vec<LimitVerdict>>,
}

impl std::fmt::Debug for StableFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "StableFamily({} members, norm {})",
            self.members.len(),
            self.norm.label()
        )
    }
}

impl StableFamily {
    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn norm(&self) -> &NormalizingSequence {
        &self.norm
    }

    pub fn schedule(&self) -> &IndexSchedule {
        &self.schedule
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn members(&self) -> &[PointSequence] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn verdict(&self, i: usize, j: usize) -> &LimitVerdict {
        &self.dmat[i][j]
    }

    /// Limit distance between members i and j.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.dmat[i][j]
            .converged_value()
            .expect("family invariant: all pairs converged")
    }

    /// Largest limit distance in the family; the scale for relative
    /// thresholds.
    pub fn max_value(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                best = best.max(self.value(i, j));
            }
        }
        best
    }

    /// Effective absolute zero threshold for a relative tolerance.
    pub fn zero_eps(&self, zero_tol: f64) -> f64 {
        (zero_tol * self.max_value()).max(ZERO_EPS_FLOOR)
    }

    pub fn labels(&self) -> Vec<String> {
        self.members.iter().map(|m| m.label().to_string()).collect()
    }
}

/// Assembles a family from precomputed parts, enforcing the invariants
/// (all pairs converged, zero diagonal, pseudometric triangle).
pub(crate) fn family_from_parts(
    space: MetricSpace,
    base: Point,
    norm: NormalizingSequence,
    schedule: IndexSchedule,
    tol: Tolerances,
    members: Vec<PointSequence>,
    dmat: Vec<Vec<LimitVerdict>>,
) -> Result<StableFamily> {
    let m = members.len();
    if dmat.len() != m || dmat.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument(
            "limit matrix shape does not match the member count".into(),
        ));
    }
    for (i, row) in dmat.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_converged() {
                return Err(Error::NumericalAnomaly(format!(
                    "pair ({}, {}) is not converged",
                    members[i].label(),
                    members[j].label()
                )));
            }
        }
    }
    let family = StableFamily {
        space,
        base,
        norm,
        schedule,
        tol,
        members,
        dmat,
    };
    check_triangle(&family)?;
    Ok(family)
}

/// Greedily grows a family from the constant sequence at `base`, keeping
/// each candidate (in input order) iff its limit distance to every already
/// accepted member converges and its raw distances to the base vanish.
/// Returns the family and the rejected candidates with evidence.
pub fn build_family(
    space: &MetricSpace,
    base: &Point,
    candidates: &[PointSequence],
    norm: &NormalizingSequence,
    schedule: &IndexSchedule,
    tol: Tolerances,
) -> Result<(StableFamily, Vec<Rejection>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate pool".into()));
    }
    let self_dist = space.dist(base, base)?;
    if self_dist != 0.0 {
        return Err(Error::MetricAxiomViolation(format!(
            "base point has nonzero self-distance {self_dist}"
        )));
    }
    norm.validate(schedule.indices())?;
    let anchor = PointSequence::constant(base.clone(), "base");
    let mut members = vec![anchor];
    // lower-triangular rows of verdicts; row i holds pairs (i, 0..i)
    let mut rows: Vec<Vec<LimitVerdict>> = vec![Vec::new()];
    let mut rejected = Vec::new();

    'candidates: for cand in candidates {
        // raw distances to the base must vanish along the schedule; the
        // scale is the peak (not the first sample: interleaved sequences
        // may start at the base)
        let raw: Vec<f64> = schedule
            .indices()
            .iter()
            .map(|&n| space.dist(&cand.at(n), base))
            .collect::<Result<_>>()?;
        let peak = raw.iter().fold(0.0f64, |a, &b| a.max(b));
        let last = *raw.last().unwrap();
        if last > (VANISH_FACTOR * peak).max(1e-12) {
            rejected.push(Rejection {
                candidate: cand.label().to_string(),
                against: "base".to_string(),
                kind: RejectionKind::NotVanishing,
                verdict: estimate_limit(&raw, tol.rel, tol.abs)?,
            });
            continue;
        }
        let verdicts: Vec<LimitVerdict> = members
            .par_iter()
            .map(|m| mutual_stability(space, cand, m, norm, schedule, tol))
            .collect::<Result<_>>()?;
        for (m, v) in members.iter().zip(&verdicts) {
            if !v.is_converged() {
                let kind = match v.status {
                    LimitStatus::Inconclusive => RejectionKind::Inconclusive,
                    _ => RejectionKind::NotStable,
                };
                rejected.push(Rejection {
                    candidate: cand.label().to_string(),
                    against: m.label().to_string(),
                    kind,
                    verdict: v.clone(),
                });
                continue 'candidates;
            }
        }
        members.push(cand.clone());
        rows.push(verdicts);
    }

    let m = members.len();
    let zero = estimate_limit(&vec![0.0; schedule.len()], tol.rel, tol.abs)?;
    let mut dmat = vec![vec![zero; m]; m];
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            dmat[i][j] = v.clone();
            dmat[j][i] = v.clone();
        }
    }
    let family = StableFamily {
        space: space.clone(),
        base: base.clone(),
        norm: norm.clone(),
        schedule: schedule.clone(),
        tol,
        members,
        dmat,
    };
    check_triangle(&family)?;
    Ok((family, rejected))
}

/// Pseudometric triangle inequality on the limit matrix, with slack
/// proportional to the largest entry.
fn check_triangle(family: &StableFamily) -> Result<()> {
    let m = family.len();
    let slack = TRIANGLE_SLACK * family.max_value().max(1.0);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let lhs = family.value(i, k);
                let rhs = family.value(i, j) + family.value(j, k);
                if lhs > rhs + slack {
                    return Err(Error::MetricAxiomViolation(format!(
                        "limit distances break the triangle inequality: \
                         d({i},{k}) = {lhs} > {rhs} = d({i},{j}) + d({j},{k})"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The metric identification of a stable family: members at limit distance
/// ~0 are merged, classes inherit a genuine metric.
#[derive(Debug, Clone, Serialize)]
pub struct PretangentQuotient {
    /// Member indices per class, each sorted; classes ordered by smallest
    /// member.
    pub classes: Vec<Vec<usize>>,
    /// Smallest member index of each class.
    pub representative: Vec<usize>,
    /// Class index of each member.
    pub class_of: Vec<usize>,
    /// Class containing member 0 (the constant sequence at the base).
    pub base_class: usize,
    /// Class distance matrix: mean limit distance over cross pairs.
    pub rho: Vec<Vec<f64>>,
    /// Effective absolute zero threshold used for merging.
    pub zero_eps: f64,
    /// Worst max-min spread of the cross-pair limits behind any rho entry.
    pub max_spread: f64,
}

/// Merges members whose limit distance is at most `zero_tol` (relative to
/// the largest limit in the family, floored absolutely) and returns the
/// class metric. Errors if the zero relation fails transitivity or a class
/// distance depends on the choice of representatives beyond tolerance.
pub fn metric_identification(
    family: &StableFamily,
    zero_tol: Option<f64>,
) -> Result<PretangentQuotient> {
    let zero_tol = zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
    if !(zero_tol > 0.0 && zero_tol.is_finite()) {
        return Err(Error::InvalidArgument(
            "zero tolerance must be positive finite".into(),
        ));
    }
    let m = family.len();
    let zero_eps = family.zero_eps(zero_tol);

    // connected components of the "limit distance <= zero_eps" graph
    let mut class_of = vec![usize::MAX; m];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for start in 0..m {
        if class_of[start] != usize::MAX {
            continue;
        }
        let cid = classes.len();
        let mut stack = vec![start];
        let mut component = Vec::new();
        class_of[start] = cid;
        while let Some(i) = stack.pop() {
            component.push(i);
            for j in 0..m {
                if class_of[j] == usize::MAX && family.value(i, j) <= zero_eps {
                    class_of[j] = cid;
                    stack.push(j);
                }
            }
        }
        component.sort_unstable();
        classes.push(component);
    }

    // near-transitivity: within a class no pair may sit far apart
    for class in &classes {
        for (ai, &i) in class.iter().enumerate() {
            for &k in &class[ai + 1..] {
                let v = family.value(i, k);
                if v > TRANSITIVITY_FACTOR * zero_eps {
                    let bridge = class
                        .iter()
                        .copied()
                        .find(|&j| {
                            j != i
                                && j != k
                                && family.value(i, j) <= zero_eps
                                && family.value(j, k) <= TRANSITIVITY_FACTOR * zero_eps
                        })
                        .unwrap_or(i);
                    return Err(Error::QuotientInconsistency(format!(
                        "zero relation is not transitive: members {i} and {k} were \
                         merged through {bridge} but sit at limit distance {v} \
                         > {TRANSITIVITY_FACTOR} * {zero_eps}"
                    )));
                }
            }
        }
    }

    let representative: Vec<usize> = classes.iter().map(|c| c[0]).collect();
    let n_classes = classes.len();
    let mut rho = vec![vec![0.0; n_classes]; n_classes];
    let mut max_spread: f64 = 0.0;
    for c1 in 0..n_classes {
        for c2 in 0..c1 {
            let mut sum = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut count = 0usize;
            for &i in &classes[c1] {
                for &j in &classes[c2] {
                    let v = family.value(i, j);
                    sum += v;
                    lo = lo.min(v);
                    hi = hi.max(v);
                    count += 1;
                }
            }
            let spread = hi - lo;
            if spread > SPREAD_FACTOR * zero_eps {
                return Err(Error::QuotientInconsistency(format!(
                    "class distance between classes {c2} and {c1} depends on the \
                     representatives: limits range over [{lo}, {hi}], spread {spread} \
                     > {SPREAD_FACTOR} * {zero_eps}"
                )));
            }
            max_spread = max_spread.max(spread);
            let mean = sum / count as f64;
            rho[c1][c2] = mean;
            rho[c2][c1] = mean;
        }
    }

    // the class metric must itself satisfy the triangle inequality
    let scale = rho.iter().flatten().fold(0.0f64, |a, &b| a.max(b)).max(1.0);
    for i in 0..n_classes {
        for j in 0..n_classes {
            for k in 0..n_classes {
                if rho[i][k] > rho[i][j] + rho[j][k] + TRIANGLE_SLACK * scale {
                    return Err(Error::QuotientInconsistency(format!(
                        "class metric breaks the triangle inequality on classes \
                         ({i},{j},{k})"
                    )));
                }
            }
        }
    }

    Ok(PretangentQuotient {
        base_class: class_of[0],
        classes,
        representative,
        class_of,
        rho,
        zero_eps,
        max_spread,
    })
}

/// Outcome of re-deriving a family along a subsequence and comparing.
#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub selector: String,
    /// Largest |original - restricted| over member pairs.
    pub max_pair_defect: f64,
    /// Whether every pair agreed within the summed error estimates.
    pub distances_preserved: bool,
    /// Original class index -> restricted class index.
    pub class_map: Vec<usize>,
    /// Whether all members of each original class landed in one restricted
    /// class.
    pub class_map_consistent: bool,
    /// Largest |rho - rho'| over mapped class pairs.
    pub rho_defect: f64,
    pub restricted_classes: usize,
}

/// Restricts every member and the normalizing sequence through a strictly
/// increasing index map, recomputes all pairwise limits, and verifies they
/// match the original family within summed error estimates. A restricted
/// pair that fails to converge is a numerical anomaly: subsequences of
/// convergent sequences converge.
pub fn embed_subsequence(
    family: &StableFamily,
    selector: &IndexSelector,
) -> Result<EmbeddingReport> {
    selector.validate(family.schedule().indices())?;
    let restricted = restrict_family(family, selector)?;

    let m = family.len();
    let mut max_defect: f64 = 0.0;
    let mut preserved = true;
    for i in 0..m {
        for j in 0..i {
            let orig = &family.dmat[i][j];
            let new = &restricted.dmat[i][j];
            let defect = (orig.converged_value().unwrap() - new.converged_value().unwrap()).abs();
            max_defect = max_defect.max(defect);
            let budget = orig.error_estimate + new.error_estimate + 1e-12;
            if defect > budget {
                preserved = false;
            }
        }
    }

    let q_orig = metric_identification(family, None)?;
    let q_new = metric_identification(&restricted, None)?;
    let mut class_map = Vec::with_capacity(q_orig.classes.len());
    let mut consistent = true;
    for class in &q_orig.classes {
        let target = q_new.class_of[class[0]];
        if class.iter().any(|&i| q_new.class_of[i] != target) {
            consistent = false;
        }
        class_map.push(target);
    }
    let mut rho_defect: f64 = 0.0;
    for c1 in 0..q_orig.classes.len() {
        for c2 in 0..c1 {
            let orig = q_orig.rho[c1][c2];
            let new = q_new.rho[class_map[c1]][class_map[c2]];
            rho_defect = rho_defect.max((orig - new).abs());
        }
    }

    Ok(EmbeddingReport {
        selector: selector.label().to_string(),
        max_pair_defect: max_defect,
        distances_preserved: preserved,
        class_map,
        class_map_consistent: consistent,
        rho_defect,
        restricted_classes: q_new.classes.len(),
    })
}

/// The same family viewed along a subsequence; all pairs must stay
/// converged.
fn restrict_family(family: &StableFamily, selector: &IndexSelector) -> Result<StableFamily> {
    let members: Vec<PointSequence> = family
        .members()
        .iter()
        .map(|s| s.restrict(selector))
        .collect();
    let norm = family.norm().restrict(selector);
    norm.validate(family.schedule().indices())?;
    let m = members.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let verdicts: Vec<LimitVerdict> = pairs
        .par_iter()
        .map(|&(i, j)| {
            mutual_stability(
                family.space(),
                &members[i],
                &members[j],
                &norm,
                family.schedule(),
                family.tolerances(),
            )
        })
        .collect::<Result<_>>()?;
    let mut dmat = vec![vec![verdicts[0].clone(); m]; m];
    for (&(i, j), v) in pairs.iter().zip(&verdicts) {
        if !v.is_converged() {
            return Err(Error::NumericalAnomaly(format!(
                "pair ({}, {}) lost convergence along selector {}: {:?}",
                family.members()[i].label(),
                family.members()[j].label(),
                selector.label(),
                v.status
            )));
        }
        dmat[i][j] = v.clone();
        dmat[j][i] = v.clone();
    }
    Ok(StableFamily {
        space: family.space.clone(),
        base: family.base.clone(),
        norm,
        schedule: family.schedule.clone(),
        tol: family.tol,
        members,
        dmat,
    })
}

/// A pool sequence that, along some subsequence, is stable against the whole
/// family yet lands far from every member: evidence the family misses a
/// class there.
#[derive(Debug, Clone, Serialize)]
pub struct TangencyWitness {
    pub sequence: String,
    pub selector: String,
    pub min_distance: f64,
    pub nearest_member: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyReport {
    /// No witness found under any selector. One-sided: this supports
    /// tangency relative to the pool, it cannot prove it.
    pub tangent_within_pool: bool,
    pub witnesses: Vec<TangencyWitness>,
    pub selectors: Vec<String>,
    pub pool_size: usize,
}

/// Probes whether the family could fail maximality along subsequences: for
/// each selector, any pool sequence whose restriction is stable against all
/// restricted members must collapse onto one of them (limit distance within
/// the zero threshold). Stable-and-far sequences are reported as witnesses.
pub fn tangency_probe(
    family: &StableFamily,
    pool: &[PointSequence],
    selectors: &[IndexSelector],
    zero_tol: Option<f64>,
) -> Result<TangencyReport> {
    if selectors.is_empty() {
        return Err(Error::InvalidArgument("empty selector list".into()));
    }
    let zero_tol = zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
    // family members always take part in the probe
    let mut probes: Vec<PointSequence> = family.members().to_vec();
    let known: std::collections::HashSet<String> =
        probes.iter().map(|s| s.label().to_string()).collect();
    for s in pool {
        if !known.contains(s.label()) {
            probes.push(s.clone());
        }
    }

    let mut witnesses = Vec::new();
    for selector in selectors {
        selector.validate(family.schedule().indices())?;
        let restricted = restrict_family(family, selector)?;
        let zero_eps = restricted.zero_eps(zero_tol);
        let results: Vec<Option<TangencyWitness>> = probes
            .par_iter()
            .map(|cand| -> Result<Option<TangencyWitness>> {
                let cand_r = cand.restrict(selector);
                let mut min_dist = f64::INFINITY;
                let mut nearest = String::new();
                for member in restricted.members() {
                    let v = mutual_stability(
                        family.space(),
                        &cand_r,
                        member,
                        restricted.norm(),
                        family.schedule(),
                        family.tolerances(),
                    )?;
                    let Some(value) = v.converged_value() else {
                        // not stable along this subsequence: no evidence
                        return Ok(None);
                    };
                    if value < min_dist {
                        min_dist = value;
                        nearest = member.label().to_string();
                    }
                }
                if min_dist > zero_eps {
                    Ok(Some(TangencyWitness {
                        sequence: cand.label().to_string(),
                        selector: selector.label().to_string(),
                        min_distance: min_dist,
                        nearest_member: nearest,
                    }))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        witnesses.extend(results.into_iter().flatten());
    }

    Ok(TangencyReport {
        tangent_within_pool: witnesses.is_empty(),
        witnesses,
        selectors: selectors.iter().map(|s| s.label().to_string()).collect(),
        pool_size: probes.len(),
    })
}

/// Whether the normalizing sequence admits only the trivial one-class
/// structure at `base`, relative to the witness pool: returns false with
/// the witness when some pool sequence keeps a converged positive limit
/// distance from the base. Diverging or oscillating ratios are not
/// witnesses.
pub fn is_confluent(
    space: &MetricSpace,
    norm: &NormalizingSequence,
    base: &Point,
    pool: &[PointSequence],
    schedule: &IndexSchedule,
    tol: Tolerances,
) -> Result<(bool, Option<(String, f64)>)> {
    let anchor = PointSequence::constant(base.clone(), "base");
    for x in pool {
        let raw: Vec<f64> = schedule
            .indices()
            .iter()
            .map(|&n| space.dist(&x.at(n), base))
            .collect::<Result<_>>()?;
        let peak = raw.iter().fold(0.0f64, |a, &b| a.max(b));
        let last = *raw.last().unwrap();
        if last > (VANISH_FACTOR * peak).max(1e-12) {
            return Err(Error::InvalidArgument(format!(
                "witness pool sequence {} does not converge to the base point",
                x.label()
            )));
        }
        let v = mutual_stability(space, x, &anchor, norm, schedule, tol)?;
        if let Some(value) = v.converged_value() {
            if value > CONFLUENCE_TOL.max(4.0 * v.error_estimate) {
                return Ok((false, Some((x.label().to_string(), value))));
            }
        }
    }
    Ok((true, None))
}

/// How two normalizing sequences relate at a point.
#[derive(Debug, Clone, Serialize)]
pub enum PairKind {
    /// r_n / t_n converged to a positive constant; the sequences induce the
    /// same structure at every point.
    RatioEquivalent(f64),
    /// Both sequences admit only the trivial structure at the point
    /// (relative to the witness pool).
    Confluent,
    /// The ratio definitively fails to converge to a positive constant and
    /// a witness rules out confluence.
    NotEquivalent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizingPairVerdict {
    pub kind: PairKind,
    pub ratio: LimitVerdict,
    /// Witness certifying the first sequence non-confluent, if any.
    pub r_witness: Option<(String, f64)>,
    /// Same for the second sequence.
    pub t_witness: Option<(String, f64)>,
    pub note: String,
}

/// Classifies a pair of normalizing sequences at a base point through the
/// dichotomy: either their ratio converges to a positive constant, or both
/// must be confluent there; a non-confluence witness together with a
/// definitively non-positive ratio refutes equivalence.
pub fn classify_normalizing_pair(
    space: &MetricSpace,
    r: &NormalizingSequence,
    t: &NormalizingSequence,
    base: &Point,
    witness_pool: &[PointSequence],
    schedule: &IndexSchedule,
    tol: Tolerances,
) -> Result<NormalizingPairVerdict> {
    r.validate(schedule.indices())?;
    t.validate(schedule.indices())?;
    let samples: Vec<f64> = schedule
        .indices()
        .iter()
        .map(|&n| (r.at(n) / t.at(n)).min(OVERFLOW_CAP))
        .collect();
    let ratio = estimate_limit(&samples, tol.rel, tol.abs)?;

    if let Some(c) = ratio.converged_value() {
        if c > ZERO_EPS_FLOOR {
            return Ok(NormalizingPairVerdict {
                kind: PairKind::RatioEquivalent(c),
                ratio,
                r_witness: None,
                t_witness: None,
                note: format!("ratio converged to {c}"),
            });
        }
    }

    if witness_pool.is_empty() {
        return Ok(NormalizingPairVerdict {
            kind: PairKind::Inconclusive,
            ratio,
            r_witness: None,
            t_witness: None,
            note: "ratio did not converge to a positive constant and no witness \
                   pool was supplied to test confluence"
                .to_string(),
        });
    }

    let (r_conf, r_witness) = is_confluent(space, r, base, witness_pool, schedule, tol)?;
    let (t_conf, t_witness) = is_confluent(space, t, base, witness_pool, schedule, tol)?;
    if r_conf && t_conf {
        return Ok(NormalizingPairVerdict {
            kind: PairKind::Confluent,
            ratio,
            r_witness: None,
            t_witness: None,
            note: format!(
                "both sequences confluent relative to the {}-sequence witness pool",
                witness_pool.len()
            ),
        });
    }

    // a witness exists; the ratio decides whether that refutes equivalence
    let definitive = matches!(
        ratio.status,
        LimitStatus::Diverged | LimitStatus::Oscillating
    ) || ratio.converged_value().is_some();
    let kind = if definitive {
        PairKind::NotEquivalent
    } else {
        PairKind::Inconclusive
    };
    let note = match kind {
        PairKind::NotEquivalent => {
            "ratio fails to converge to a positive constant and a witness \
             certifies non-confluence"
        }
        _ => "non-confluence witness found but the ratio tail is inconclusive",
    }
    .to_string();
    Ok(NormalizingPairVerdict {
        kind,
        ratio,
        r_witness,
        t_witness,
        note,
    })
}
