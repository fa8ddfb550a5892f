//! Lifting maps between metric spaces to sequence level, testing whether
//! they respect a pair of stable families, and reading the induced map off
//! the quotients as a class-level derivative.
//!
//! All verdicts are evidence relative to the supplied families: membership
//! of an image in a maximal family is tested as "stable against the given
//! family plus previously adjoined images", and reports say so.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limits::{estimate_limit, IndexSchedule, LimitStatus, LimitVerdict, Tolerances};
use crate::pretangent::{
    family_from_parts, metric_identification, mutual_stability, PretangentQuotient, StableFamily,
    DEFAULT_ZERO_TOL,
};
use crate::sequences::{NormalizingSequence, PointSequence};
use crate::space::{MetricSpace, Point};

/// Base images must land this close to the declared target base point.
pub const BASE_MATCH_TOL: f64 = 1e-12;

/// A converged distance ratio above this counts as a positive scale rather
/// than a collapse onto the base (collapses certify well below 1e-5).
const NONZERO_RATIO_FLOOR: f64 = 1e-3;

/// A map between metric spaces with matched base points, applied pointwise
/// to sequences.
#[derive(Clone)]
pub struct LiftedMap {
    f: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    source: MetricSpace,
    target: MetricSpace,
    a1: Point,
    a2: Point,
    label: String,
}

impl std::fmt::Debug for LiftedMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LiftedMap({})", self.label)
    }
}

impl LiftedMap {
    /// Wraps a pointwise map. The base image f(a1) must sit within
    /// `BASE_MATCH_TOL` of a2.
    pub fn new(
        label: impl Into<String>,
        source: MetricSpace,
        target: MetricSpace,
        a1: Point,
        a2: Point,
        f: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Result<Self> {
        let image = f(&a1);
        let d = target.dist(&image, &a2)?;
        if d > BASE_MATCH_TOL {
            return Err(Error::InvalidArgument(format!(
                "map does not match the base points: d(f(a1), a2) = {d}"
            )));
        }
        Ok(LiftedMap {
            f: Arc::new(f),
            source,
            target,
            a1,
            a2,
            label: label.into(),
        })
    }

    /// f(x) = c * x on the real line, base 0 -> 0.
    pub fn linear(c: f64) -> Result<Self> {
        let reals = MetricSpace::euclidean(1)?;
        LiftedMap::new(
            format!("linear({c})"),
            reals.clone(),
            reals,
            Point::coords([0.0]),
            Point::coords([0.0]),
            move |p| match p {
                Point::Coords(v) => Point::coords([c * v[0]]),
                other => other.clone(),
            },
        )
    }

    /// f(x) = x^k on the real line (integer k >= 1), base 0 -> 0.
    pub fn monomial(k: i32) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument(format!(
                "monomial exponent must be >= 1, got {k}"
            )));
        }
        let reals = MetricSpace::euclidean(1)?;
        LiftedMap::new(
            format!("monomial({k})"),
            reals.clone(),
            reals,
            Point::coords([0.0]),
            Point::coords([0.0]),
            move |p| match p {
                Point::Coords(v) => Point::coords([v[0].powi(k)]),
                other => other.clone(),
            },
        )
    }

    /// Indicator of {0} on the real line: f(0) = 1, f(x) = 0 otherwise.
    /// Base 0 -> 1; discontinuous at the base.
    pub fn indicator_at_zero() -> Result<Self> {
        let reals = MetricSpace::euclidean(1)?;
        LiftedMap::new(
            "indicator{0}",
            reals.clone(),
            reals,
            Point::coords([0.0]),
            Point::coords([1.0]),
            |p| match p {
                Point::Coords(v) if v[0] == 0.0 => Point::coords([1.0]),
                Point::Coords(_) => Point::coords([0.0]),
                other => other.clone(),
            },
        )
    }

    /// f(x) = x * sin(1/x) with f(0) = 0 on the real line. Continuous but
    /// with no limit of f(x)/x at 0.
    pub fn x_sin_inverse() -> Result<Self> {
        let reals = MetricSpace::euclidean(1)?;
        LiftedMap::new(
            "x*sin(1/x)",
            reals.clone(),
            reals,
            Point::coords([0.0]),
            Point::coords([0.0]),
            |p| match p {
                Point::Coords(v) if v[0] == 0.0 => Point::coords([0.0]),
                Point::Coords(v) => Point::coords([v[0] * (1.0 / v[0]).sin()]),
                other => other.clone(),
            },
        )
    }

    /// The composition g after f. Requires f's target base to match g's
    /// source base.
    pub fn compose(g: &LiftedMap, f: &LiftedMap) -> Result<Self> {
        let gap = g.source.dist(&g.a1, &f.a2)?;
        if gap > BASE_MATCH_TOL {
            return Err(Error::InvalidArgument(format!(
                "composition base mismatch: d(g base, f image base) = {gap}"
            )));
        }
        let gf = g.f.clone();
        let ff = f.f.clone();
        LiftedMap::new(
            format!("{}∘{}", g.label, f.label),
            f.source.clone(),
            g.target.clone(),
            f.a1.clone(),
            g.a2.clone(),
            move |p| gf(&ff(p)),
        )
    }

    pub fn apply(&self, p: &Point) -> Point {
        (self.f)(p)
    }

    /// Image sequence {f(x_n)}. Outputs within `BASE_MATCH_TOL` of the
    /// target base snap to it exactly: at that scale the points are
    /// indistinguishable from the base, and leaving the noise in would let
    /// d/r_n amplify float fuzz into a fake divergence.
    pub fn lift(&self, x: &PointSequence) -> PointSequence {
        let f = self.f.clone();
        let target = self.target.clone();
        let a2 = self.a2.clone();
        let label = format!("{}({})", self.label, x.label());
        let x = x.clone();
        PointSequence::from_fn(label, move |n| {
            let image = f(&x.at(n));
            match target.dist(&image, &a2) {
                Ok(d) if d <= BASE_MATCH_TOL => a2.clone(),
                _ => image,
            }
        })
    }

    pub fn source(&self) -> &MetricSpace {
        &self.source
    }

    pub fn target(&self) -> &MetricSpace {
        &self.target
    }

    pub fn base_source(&self) -> &Point {
        &self.a1
    }

    pub fn base_target(&self) -> &Point {
        &self.a2
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// One failed or undecidable limit behind a differentiability verdict.
#[derive(Debug, Clone, Serialize)]
pub struct PairEvidence {
    pub member: String,
    pub against: String,
    pub status: LimitStatus,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Differentiability {
    Differentiable,
    NotDifferentiable,
    Inconclusive,
}

/// Outcome of testing a lifted map against a family pair: image stability
/// (every image sequence mutually stable with the target family and with
/// previously adjoined images) and zero-pair preservation (sources at limit
/// distance zero map to images at limit distance zero).
#[derive(Debug, Clone, Serialize)]
pub struct DifferentiabilityReport {
    pub status: Differentiability,
    /// Image stability failures: oscillating or diverging limits.
    pub stability_violations: Vec<PairEvidence>,
    /// Source zero-pairs whose images separate.
    pub zero_pair_violations: Vec<PairEvidence>,
    /// Limits the estimator could not classify.
    pub inconclusive: Vec<PairEvidence>,
    pub src_zero_eps: f64,
    pub tgt_zero_eps: f64,
}

fn evidence(member: &PointSequence, against: &PointSequence, v: &LimitVerdict) -> PairEvidence {
    PairEvidence {
        member: member.label().to_string(),
        against: against.label().to_string(),
        status: v.status,
        value: v.value,
    }
}

/// Checks base-point agreement between a lifted map and the family pair.
fn check_bases(
    lift: &LiftedMap,
    src_family: &StableFamily,
    tgt_family: &StableFamily,
) -> Result<()> {
    let d1 = lift.source().dist(lift.base_source(), src_family.base())?;
    if d1 > BASE_MATCH_TOL {
        return Err(Error::InvalidArgument(format!(
            "source family base differs from the map base by {d1}"
        )));
    }
    let d2 = lift.target().dist(lift.base_target(), tgt_family.base())?;
    if d2 > BASE_MATCH_TOL {
        return Err(Error::InvalidArgument(format!(
            "target family base differs from the map image base by {d2}"
        )));
    }
    if src_family.schedule() != tgt_family.schedule() {
        return Err(Error::InvalidArgument(
            "family pair uses two different probe schedules".into(),
        ));
    }
    Ok(())
}

/// All image-side limits needed by the differentiability test: image vs
/// target members and image vs earlier images, in deterministic order.
struct ImageLimits {
    images: Vec<PointSequence>,
    /// vs_tgt[i][j]: image i against target member j.
    vs_tgt: Vec<Vec<LimitVerdict>>,
    /// vs_img[i][j] for j < i: image i against image j.
    vs_img: Vec<Vec<LimitVerdict>>,
}

fn image_limits(
    lift: &LiftedMap,
    src_family: &StableFamily,
    tgt_family: &StableFamily,
    schedule: &IndexSchedule,
    tol: Tolerances,
) -> Result<ImageLimits> {
    let images: Vec<PointSequence> = src_family.members().iter().map(|x| lift.lift(x)).collect();
    let space = lift.target();
    let norm = tgt_family.norm();
    let m_img = images.len();
    let m_tgt = tgt_family.len();
    let mut jobs: Vec<(usize, usize, bool)> = Vec::new();
    for i in 0..m_img {
        for j in 0..m_tgt {
            jobs.push((i, j, false));
        }
        for j in 0..i {
            jobs.push((i, j, true));
        }
    }
    let verdicts: Vec<LimitVerdict> = jobs
        .par_iter()
        .map(|&(i, j, img_side)| {
            let other = if img_side {
                &images[j]
            } else {
                &tgt_family.members()[j]
            };
            mutual_stability(space, &images[i], other, norm, schedule, tol)
        })
        .collect::<Result<_>>()?;
    let mut vs_tgt = vec![Vec::new(); m_img];
    let mut vs_img = vec![Vec::new(); m_img];
    for (&(i, _, img_side), v) in jobs.iter().zip(verdicts) {
        if img_side {
            vs_img[i].push(v);
        } else {
            vs_tgt[i].push(v);
        }
    }
    Ok(ImageLimits {
        images,
        vs_tgt,
        vs_img,
    })
}

/// Tests whether the lifted map is differentiable with respect to the
/// family pair. Oscillating or diverging limits refute it; any
/// inconclusive limit downgrades the verdict to Inconclusive rather than
/// failing.
pub fn check_differentiable(
    lift: &LiftedMap,
    src_family: &StableFamily,
    tgt_family: &StableFamily,
    schedule: &IndexSchedule,
    zero_tol: Option<f64>,
) -> Result<DifferentiabilityReport> {
    check_bases(lift, src_family, tgt_family)?;
    let zero_tol = zero_tol.unwrap_or(DEFAULT_ZERO_TOL);
    let tol = src_family.tolerances();
    let lims = image_limits(lift, src_family, tgt_family, schedule, tol)?;

    let mut stability_violations = Vec::new();
    let mut inconclusive = Vec::new();
    let mut max_value = tgt_family.max_value();
    for i in 0..lims.images.len() {
        for (j, v) in lims.vs_tgt[i].iter().enumerate() {
            match v.status {
                LimitStatus::Converged => max_value = max_value.max(v.value.unwrap()),
                LimitStatus::Inconclusive => {
                    inconclusive.push(evidence(&lims.images[i], &tgt_family.members()[j], v));
                }
                _ => {
                    stability_violations.push(evidence(
                        &lims.images[i],
                        &tgt_family.members()[j],
                        v,
                    ));
                }
            }
        }
        for (j, v) in lims.vs_img[i].iter().enumerate() {
            match v.status {
                LimitStatus::Converged => max_value = max_value.max(v.value.unwrap()),
                LimitStatus::Inconclusive => {
                    inconclusive.push(evidence(&lims.images[i], &lims.images[j], v));
                }
                _ => {
                    stability_violations.push(evidence(&lims.images[i], &lims.images[j], v));
                }
            }
        }
    }

    let src_zero_eps = src_family.zero_eps(zero_tol);
    let tgt_zero_eps = (zero_tol * max_value).max(crate::pretangent::ZERO_EPS_FLOOR);

    // zero pairs of the source must stay zero pairs downstream
    let mut zero_pair_violations = Vec::new();
    for i in 0..src_family.len() {
        for j in 0..i {
            if src_family.value(i, j) > src_zero_eps {
                continue;
            }
            let v = if let Some(v) = lims.vs_img[i].get(j) {
                v.clone()
            } else {
                continue;
            };
            match v.status {
                LimitStatus::Converged => {
                    if v.value.unwrap() > tgt_zero_eps {
                        zero_pair_violations.push(evidence(&lims.images[i], &lims.images[j], &v));
                    }
                }
                LimitStatus::Inconclusive => {
                    // already recorded above
                }
                _ => {
                    // already recorded as a stability violation
                }
            }
        }
    }

    let status = if !stability_violations.is_empty() || !zero_pair_violations.is_empty() {
        Differentiability::NotDifferentiable
    } else if !inconclusive.is_empty() {
        Differentiability::Inconclusive
    } else {
        Differentiability::Differentiable
    };
    Ok(DifferentiabilityReport {
        status,
        stability_violations,
        zero_pair_violations,
        inconclusive,
        src_zero_eps,
        tgt_zero_eps,
    })
}

/// The class-level derivative: source quotient classes mapped into the
/// quotient of the target family augmented by all image sequences.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeMap {
    pub source_quotient: PretangentQuotient,
    /// Quotient of the target family with every image sequence adjoined.
    pub target_quotient: PretangentQuotient,
    /// Source class index -> augmented target class index.
    pub class_map: Vec<usize>,
    /// Augmented member index of each source member's image (offset by the
    /// original target member count).
    pub image_member_offset: usize,
    /// Every source class landed in the augmented base class.
    pub degenerate: bool,
    pub member_labels_target: Vec<String>,
}

/// Builds the derivative map for a pair the differentiability check
/// accepted. The target family is augmented with the image sequences, both
/// quotients are formed, and each source class is sent to the class of its
/// members' images. Errors if two same-class sources land in different
/// target classes, or if an image merges two previously distinct target
/// classes (ambiguous resolution).
pub fn construct_derivative(
    lift: &LiftedMap,
    src_family: &StableFamily,
    tgt_family: &StableFamily,
    zero_tol: Option<f64>,
) -> Result<DerivativeMap> {
    let schedule = src_family.schedule().clone();
    let report = check_differentiable(lift, src_family, tgt_family, &schedule, zero_tol)?;
    match report.status {
        Differentiability::Differentiable => {}
        Differentiability::NotDifferentiable => {
            return Err(Error::InvalidArgument(format!(
                "map is not differentiable for this family pair: {} stability and {} \
                 zero-pair violations",
                report.stability_violations.len(),
                report.zero_pair_violations.len()
            )));
        }
        Differentiability::Inconclusive => {
            return Err(Error::InsufficientData(format!(
                "differentiability is inconclusive on {} pair(s); deepen the schedule \
                 or change the pool",
                report.inconclusive.len()
            )));
        }
    }

    let tol = src_family.tolerances();
    let lims = image_limits(lift, src_family, tgt_family, &schedule, tol)?;
    let m_tgt = tgt_family.len();
    let m_img = lims.images.len();
    let m_aug = m_tgt + m_img;

    // assemble the augmented limit matrix: target block, image-vs-target
    // strips, image-vs-image block
    let zero = estimate_limit(&vec![0.0; schedule.len()], tol.rel, tol.abs)?;
    let mut dmat = vec![vec![zero; m_aug]; m_aug];
    for i in 0..m_tgt {
        for j in 0..m_tgt {
            dmat[i][j] = tgt_family.verdict(i, j).clone();
        }
    }
    for i in 0..m_img {
        for (j, v) in lims.vs_tgt[i].iter().enumerate() {
            dmat[m_tgt + i][j] = v.clone();
            dmat[j][m_tgt + i] = v.clone();
        }
        for (j, v) in lims.vs_img[i].iter().enumerate() {
            dmat[m_tgt + i][m_tgt + j] = v.clone();
            dmat[m_tgt + j][m_tgt + i] = v.clone();
        }
    }
    let mut members = tgt_family.members().to_vec();
    members.extend(lims.images.iter().cloned());
    let augmented = family_from_parts(
        lift.target().clone(),
        tgt_family.base().clone(),
        tgt_family.norm().clone(),
        schedule,
        tol,
        members,
        dmat,
    )?;

    let q_src = metric_identification(src_family, zero_tol)?;
    let q_tgt_orig = metric_identification(tgt_family, zero_tol)?;
    let q_aug = metric_identification(&augmented, zero_tol)?;

    // an image may not merge two original target classes
    for class in &q_aug.classes {
        let mut seen: Option<usize> = None;
        for &m in class {
            if m >= m_tgt {
                continue;
            }
            let orig = q_tgt_orig.class_of[m];
            if let Some(prev) = seen {
                if prev != orig {
                    return Err(Error::QuotientInconsistency(format!(
                        "image sequences bridge two target classes ({prev} and {orig}); \
                         class resolution is ambiguous at this zero tolerance"
                    )));
                }
            }
            seen = Some(orig);
        }
    }

    // well-definedness: one target class per source class
    let mut class_map = vec![usize::MAX; q_src.classes.len()];
    for (src_class, members) in q_src.classes.iter().enumerate() {
        for &i in members {
            let image_class = q_aug.class_of[m_tgt + i];
            if class_map[src_class] == usize::MAX {
                class_map[src_class] = image_class;
            } else if class_map[src_class] != image_class {
                return Err(Error::QuotientInconsistency(format!(
                    "source class {src_class} maps to two target classes \
                     ({} and {image_class})",
                    class_map[src_class]
                )));
            }
        }
    }

    // the base class must map to the base class
    if class_map[q_src.base_class] != q_aug.base_class {
        return Err(Error::QuotientInconsistency(
            "derivative does not send the base class to the base class".into(),
        ));
    }

    let degenerate = class_map.iter().all(|&c| c == q_aug.base_class);
    Ok(DerivativeMap {
        source_quotient: q_src,
        target_quotient: q_aug,
        class_map,
        image_member_offset: m_tgt,
        degenerate,
        member_labels_target: augmented.labels(),
    })
}

/// Result of comparing the derivative of a composition with the composition
/// of derivatives, expressed over the outer target family's own classes.
#[derive(Debug, Clone, Serialize)]
pub struct ChainRuleReport {
    pub holds: bool,
    /// Per source class: classes of the third family reached via the composed
    /// map and via the two factors. None marks a path through an image class
    /// that contains no member of the family it must land in, so no
    /// comparison is possible for that class.
    pub per_class: Vec<(Option<usize>, Option<usize>)>,
    /// Source classes where at least one path was inexpressible.
    pub skipped: usize,
    pub composed_degenerate: bool,
    pub detail: String,
}

/// Sends each augmented class to the class of some original member it
/// contains, or None when the class holds only images: the family does not
/// realize that image, so class-level composition is not expressible there.
fn land_classes(
    q_aug: &PretangentQuotient,
    original: &StableFamily,
    zero_tol: Option<f64>,
) -> Result<Vec<Option<usize>>> {
    let q_orig = metric_identification(original, zero_tol)?;
    let m_orig = original.len();
    Ok(q_aug
        .classes
        .iter()
        .map(|class| {
            class
                .iter()
                .find(|&&m| m < m_orig)
                .map(|&m| q_orig.class_of[m])
        })
        .collect())
}

/// Verifies that the derivative of g∘f equals the composition of the
/// derivatives of f and g, on the classes of the three supplied families.
/// Classes are compared wherever both paths land inside existing classes of
/// the middle and outer families; classes whose images the families do not
/// realize are skipped and counted in the report.
pub fn verify_chain_rule(
    f_lift: &LiftedMap,
    g_lift: &LiftedMap,
    family1: &StableFamily,
    family2: &StableFamily,
    family3: &StableFamily,
    zero_tol: Option<f64>,
) -> Result<ChainRuleReport> {
    let df = construct_derivative(f_lift, family1, family2, zero_tol)?;
    let dg = construct_derivative(g_lift, family2, family3, zero_tol)?;
    let composed_lift = LiftedMap::compose(g_lift, f_lift)?;
    let dgf = construct_derivative(&composed_lift, family1, family3, zero_tol)?;

    let land_f = land_classes(&df.target_quotient, family2, zero_tol)?;
    let land_g = land_classes(&dg.target_quotient, family3, zero_tol)?;
    let land_gf = land_classes(&dgf.target_quotient, family3, zero_tol)?;

    let mut per_class = Vec::new();
    let mut holds = true;
    let mut skipped = 0usize;
    for src_class in 0..df.source_quotient.classes.len() {
        let via_composed = land_gf[dgf.class_map[src_class]];
        let via_factors = land_f[df.class_map[src_class]].and_then(|mid| land_g[dg.class_map[mid]]);
        match (via_composed, via_factors) {
            (Some(a), Some(b)) => {
                if a != b {
                    holds = false;
                }
            }
            _ => skipped += 1,
        }
        per_class.push((via_composed, via_factors));
    }
    let detail = if !holds {
        "composition mismatch; see per_class".to_string()
    } else if skipped > 0 {
        format!(
            "derivative of {} agrees with the composed factors on {} of {} source classes; \
             {skipped} skipped where an image class contains no family member",
            composed_lift.label(),
            per_class.len() - skipped,
            per_class.len()
        )
    } else {
        format!(
            "derivative of {} agrees with the composed factors on all {} source classes",
            composed_lift.label(),
            per_class.len()
        )
    };
    Ok(ChainRuleReport {
        holds,
        per_class,
        skipped,
        composed_degenerate: dgf.degenerate,
        detail,
    })
}

/// One battery entry of the continuity probe.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryEntry {
    pub norm: String,
    pub status: LimitStatus,
    pub value: Option<f64>,
}

/// Evidence report from the continuity consequence: a differentiable map
/// must be continuous at the base, so an image sequence that stays away
/// from the target base while no battery normalization stabilizes it is
/// evidence against differentiability with respect to any pair involving
/// that sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    /// The raw image distances d(f(x_n), a2) vanish along the schedule.
    pub image_converges: bool,
    /// Some battery normalization gave a converged image limit.
    pub stable_norm: Option<String>,
    pub battery: Vec<BatteryEntry>,
    /// Image stays away from the base and nothing in the battery
    /// stabilizes it.
    pub evidence_against_differentiability: bool,
    pub note: String,
}

/// Probes the continuity consequence along one sequence x_n -> a1. The
/// battery pairs power-law normalizations with the supplied schedule and
/// geometric ones with a shallow schedule (deep indices underflow
/// geometric tails).
pub fn continuity_witness(
    lift: &LiftedMap,
    x: &PointSequence,
    schedule: &IndexSchedule,
    tol: Tolerances,
) -> Result<ContinuityReport> {
    let src_dist: Vec<f64> = schedule
        .indices()
        .iter()
        .map(|&n| lift.source().dist(&x.at(n), lift.base_source()))
        .collect::<Result<_>>()?;
    let peak_src = src_dist.iter().fold(0.0f64, |a, &b| a.max(b));
    let last_src = *src_dist.last().unwrap();
    if last_src > (1e-3 * peak_src).max(1e-12) {
        return Err(Error::InvalidArgument(format!(
            "probe sequence {} does not converge to the source base",
            x.label()
        )));
    }

    let image = lift.lift(x);
    let img_dist: Vec<f64> = schedule
        .indices()
        .iter()
        .map(|&n| lift.target().dist(&image.at(n), lift.base_target()))
        .collect::<Result<_>>()?;
    let peak_img = img_dist.iter().fold(0.0f64, |a, &b| a.max(b));
    let tail_floor = img_dist
        .iter()
        .rev()
        .take(crate::limits::TAIL_LEN)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let image_converges = *img_dist.last().unwrap() <= (1e-3 * peak_img).max(1e-12);
    let image_stays_away = tail_floor > (1e-3 * peak_img).max(1e-9);

    let shallow = IndexSchedule::geometric(4.0, 1.4, 16)?;
    let battery: Vec<(NormalizingSequence, &IndexSchedule)> = vec![
        (NormalizingSequence::power(1.0, 0.5), schedule),
        (NormalizingSequence::power(1.0, 1.0), schedule),
        (NormalizingSequence::power(1.0, 2.0), schedule),
        (NormalizingSequence::geometric(1.0, 0.5), &shallow),
        (NormalizingSequence::geometric(1.0, 0.9), &shallow),
    ];
    let anchor = PointSequence::constant(lift.base_target().clone(), "base");
    let mut entries = Vec::new();
    let mut first_converged = None;
    let mut nonzero_converged = None;
    for (norm, sched) in &battery {
        let v = mutual_stability(lift.target(), &image, &anchor, norm, sched, tol)?;
        if v.is_converged() {
            if first_converged.is_none() {
                first_converged = Some(norm.label().to_string());
            }
            if nonzero_converged.is_none() && v.value.is_some_and(|c| c > NONZERO_RATIO_FLOOR) {
                nonzero_converged = Some(norm.label().to_string());
            }
        }
        entries.push(BatteryEntry {
            norm: norm.label().to_string(),
            status: v.status,
            value: v.value,
        });
    }
    // a normalization at which the image keeps a positive distance ratio
    // identifies the image's own scale; zero-collapse stability (the image
    // merges with the base) is reported only when nothing better converged
    let stable_norm = nonzero_converged.or(first_converged);

    let evidence_against = image_stays_away && stable_norm.is_none();
    let note = if evidence_against {
        "image sequence stays away from the target base and no battery \
         normalization stabilizes it; evidence against differentiability with \
         respect to any family pair containing this sequence"
            .to_string()
    } else if let Some(n) = &stable_norm {
        format!("image is stable against the target base under {n}; no contradiction")
    } else {
        "no battery member stabilized the image, but the image does not stay \
         bounded away from the base either; no conclusion"
            .to_string()
    };
    Ok(ContinuityReport {
        image_converges,
        stable_norm,
        battery: entries,
        evidence_against_differentiability: evidence_against,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pretangent::build_family;

    fn reals() -> MetricSpace {
        MetricSpace::euclidean(1).unwrap()
    }

    fn origin() -> Point {
        Point::coords([0.0])
    }

    fn seq(c: f64, label: &str) -> PointSequence {
        PointSequence::radial_power(vec![0.0], vec![1.0], c, 1.0).with_label(label)
    }

    fn family_of(rates: &[(f64, &str)]) -> StableFamily {
        let norm = NormalizingSequence::power(1.0, 1.0);
        let schedule = IndexSchedule::default();
        let candidates: Vec<PointSequence> = rates.iter().map(|&(c, l)| seq(c, l)).collect();
        build_family(
            &reals(),
            &origin(),
            &candidates,
            &norm,
            &schedule,
            Tolerances::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn identity_map_is_differentiable_with_identity_classes() {
        let lift = LiftedMap::linear(1.0).unwrap();
        let fam = family_of(&[(1.0, "x"), (2.0, "z")]);
        let report =
            check_differentiable(&lift, &fam, &fam, &IndexSchedule::default(), None).unwrap();
        assert_eq!(report.status, Differentiability::Differentiable);
        let d = construct_derivative(&lift, &fam, &fam, None).unwrap();
        assert!(!d.degenerate);
        // each source class maps to the augmented class holding the same
        // original member
        for (src_class, &tgt_class) in d.class_map.iter().enumerate() {
            let rep = d.source_quotient.representative[src_class];
            assert!(d.target_quotient.classes[tgt_class].contains(&rep));
        }
    }

    #[test]
    fn doubling_map_sends_unit_class_to_double_class() {
        let lift = LiftedMap::linear(2.0).unwrap();
        let fam = family_of(&[(1.0, "x"), (2.0, "z")]);
        let report =
            check_differentiable(&lift, &fam, &fam, &IndexSchedule::default(), None).unwrap();
        assert_eq!(report.status, Differentiability::Differentiable);
        let d = construct_derivative(&lift, &fam, &fam, None).unwrap();
        // source class of "x" (rho 1 from base) -> class containing "z"
        let src_x = d.source_quotient.class_of[1];
        let tgt = d.class_map[src_x];
        assert!(
            d.target_quotient.classes[tgt].contains(&2),
            "expected class of member z, got members {:?}",
            d.target_quotient.classes[tgt]
        );
        // base to base
        assert_eq!(
            d.class_map[d.source_quotient.base_class],
            d.target_quotient.base_class
        );
    }

    #[test]
    fn squaring_map_gives_degenerate_derivative() {
        let lift = LiftedMap::monomial(2).unwrap();
        let src = family_of(&[(1.0, "x")]);
        let tgt = family_of(&[(1.0, "x")]);
        let d = construct_derivative(&lift, &src, &tgt, None).unwrap();
        assert!(d.degenerate);
        assert!(d
            .class_map
            .iter()
            .all(|&c| c == d.target_quotient.base_class));
    }

    #[test]
    fn oscillating_image_refutes_or_defers_differentiability() {
        // x*sin(1/x): the image ratio |sin n| has no limit, but its samples
        // do not form two clean clusters either, so the estimator may
        // return Inconclusive instead of Oscillating. Either way the map
        // must not come out differentiable.
        let lift = LiftedMap::x_sin_inverse().unwrap();
        let src = family_of(&[(1.0, "x")]);
        let tgt = family_of(&[(1.0, "x")]);
        let report =
            check_differentiable(&lift, &src, &tgt, &IndexSchedule::default(), None).unwrap();
        assert_ne!(report.status, Differentiability::Differentiable);
        let troubled = report
            .stability_violations
            .iter()
            .chain(&report.inconclusive)
            .any(|e| e.member.contains("x*sin(1/x)"));
        assert!(troubled, "report: {report:?}");
    }

    #[test]
    fn chain_rule_holds_for_linear_maps() {
        let f = LiftedMap::linear(2.0).unwrap();
        let g = LiftedMap::linear(3.0).unwrap();
        let fam = family_of(&[(1.0, "x"), (2.0, "y2"), (3.0, "y3"), (6.0, "y6")]);
        let report = verify_chain_rule(&f, &g, &fam, &fam, &fam, None).unwrap();
        assert!(report.holds, "{report:?}");
        // 2/n -> 4/n, 6/n -> 12/n, and 6/n -> 18/n under g are unrealized;
        // the base class and 1/n -> 2/n -> 6/n compare
        assert_eq!(report.skipped, 3, "{report:?}");
        let compared: Vec<_> = report
            .per_class
            .iter()
            .filter_map(|&(a, b)| a.zip(b))
            .collect();
        assert_eq!(compared.len(), 2);
        assert!(compared.iter().all(|(a, b)| a == b));
    }

    #[test]
    fn chain_rule_holds_for_degenerate_factor() {
        let f = LiftedMap::monomial(2).unwrap();
        let g = LiftedMap::linear(1.0).unwrap();
        let fam = family_of(&[(1.0, "x")]);
        let report = verify_chain_rule(&f, &g, &fam, &fam, &fam, None).unwrap();
        assert!(report.holds, "{report:?}");
        assert!(report.composed_degenerate);
        // every image collapses onto the base class, so nothing is skipped
        assert_eq!(report.skipped, 0, "{report:?}");
    }

    #[test]
    fn chain_rule_skips_unrealized_image_classes() {
        // f doubles, but the middle family has no 2/n member to land on:
        // the 1/n class cannot be compared and only the base class remains
        let f = LiftedMap::linear(2.0).unwrap();
        let g = LiftedMap::linear(1.0).unwrap();
        let thin = family_of(&[(1.0, "x")]);
        let report = verify_chain_rule(&f, &g, &thin, &thin, &thin, None).unwrap();
        assert!(report.holds, "{report:?}");
        assert_eq!(report.skipped, 1, "{report:?}");
        assert!(report.per_class.contains(&(None, None)), "{report:?}");
        assert!(report.detail.contains("skipped"), "{report:?}");
    }

    #[test]
    fn indicator_map_rejected_at_construction_is_wrong_base() {
        // indicator maps 0 -> 1; declaring a2 = 0 must fail the base check
        let reals = MetricSpace::euclidean(1).unwrap();
        let err = LiftedMap::new(
            "bad indicator",
            reals.clone(),
            reals,
            Point::coords([0.0]),
            Point::coords([0.0]),
            |p| match p {
                Point::Coords(v) if v[0] == 0.0 => Point::coords([1.0]),
                other => other.clone(),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn continuity_witness_flags_indicator_map() {
        let lift = LiftedMap::indicator_at_zero().unwrap();
        let x = seq(1.0, "x");
        let report =
            continuity_witness(&lift, &x, &IndexSchedule::default(), Tolerances::default())
                .unwrap();
        assert!(report.evidence_against_differentiability, "{report:?}");
        assert!(!report.image_converges);
        assert!(report.stable_norm.is_none());
        // every battery ratio 1/t_n diverges
        for entry in &report.battery {
            assert_eq!(entry.status, LimitStatus::Diverged, "{entry:?}");
        }
    }

    #[test]
    fn continuity_witness_finds_stability_for_identity() {
        let lift = LiftedMap::linear(1.0).unwrap();
        let x = seq(1.0, "x");
        let report =
            continuity_witness(&lift, &x, &IndexSchedule::default(), Tolerances::default())
                .unwrap();
        assert!(!report.evidence_against_differentiability);
        assert_eq!(report.stable_norm.as_deref(), Some("1/n^1"));
    }

    #[test]
    fn derivative_construction_requires_differentiability() {
        let lift = LiftedMap::x_sin_inverse().unwrap();
        let src = family_of(&[(1.0, "x")]);
        let tgt = family_of(&[(1.0, "x")]);
        let err = construct_derivative(&lift, &src, &tgt, None).unwrap_err();
        assert!(
            matches!(err, Error::InvalidArgument(_) | Error::InsufficientData(_)),
            "{err:?}"
        );
    }
}
