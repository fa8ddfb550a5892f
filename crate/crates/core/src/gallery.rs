//! Worked geometric scenarios with known tangency behavior, run end to end:
//! profile the shell deviations, decide tangency, build a reference family
//! on the model object, transfer it onto the scene geometry, and test
//! whether the resulting quotient embeds into a line, half-line, or plane.
//!
//! The embeddability checks are finite surrogates: a quotient that embeds
//! into the line (resp. half-line, plane) is consistent with the limit space
//! being the real line (resp. half-line, plane), which is the strongest
//! finitely checkable form of those statements.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{Chart, Subspace};
use crate::error::{Error, Result};
use crate::limits::{IndexSchedule, Tolerances};
use crate::numerics::{cayley_menger, derive_seed, triangle_area_sq};
use crate::pretangent::{build_family, metric_identification, PretangentQuotient, StableFamily};
use crate::sequences::{NormalizingSequence, PointSequence};
use crate::space::{MetricSpace, Point};
use crate::tangency::{
    aligned_class_pairing, decide_strong_tangency, epsilon_profile, quotient_isometry_check,
    transfer_family, EpsilonProfile, IsometryReport, ProfileParams, TangencyVerdict,
    DEFAULT_RATIO_FLOOR, DEFAULT_SLOPE_MARGIN,
};

/// An embeddability flag is set iff its defect is at most this fraction of
/// the quotient scale.
pub const EMBED_TOL_FACTOR: f64 = 1e-6;
/// Class-count cap for the subset enumeration in embeddability checks.
pub const MAX_EMBED_CLASSES: usize = 64;
/// Scenario ids accepted by [`run_scenario`], in `run_all` order.
pub const SCENARIO_IDS: [&str; 6] = ["curve", "graphs", "between", "rotation", "surface", "cone"];

/// Parameter half-span of the polynomial scenario charts around 0; small
/// enough that the geometry is graph-like over the whole box.
const SCENARIO_SPAN: f64 = 0.5;
/// Half-span of model lines and planes; generous against the default grid.
const MODEL_SPAN: f64 = 2.0;
/// Ratios of the canonical one-direction family pool.
const POOL_RATIOS: [f64; 3] = [1.0, 2.0, 3.0];
/// Jacobian rank test: smallest singular value must exceed this fraction of
/// the largest.
const RANK_RTOL: f64 = 1e-9;
/// Rim suprema of solid charts need denser direction coverage than curves.
const SOLID_MIN_SPHERE: usize = 160;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EmbedTarget {
    Line,
    HalfLine,
    Plane,
}

#[derive(Debug, Clone, Serialize)]
pub struct Embeddability {
    pub target: EmbedTarget,
    pub embeddable: bool,
    pub defect: f64,
    pub tolerance: f64,
}

/// Tests whether the class metric of `q` embeds isometrically into the
/// target model space, reporting the worst violation as a length-scale
/// defect. Line: farthest-pair anchoring assigns each class a signed
/// coordinate and the defect is the worst additivity gap. Half-line: a line
/// embedding whose base class sits at an end (reflection is free). Plane:
/// every 3-subset has a real triangle area and every 4-subset is flat by its
/// Cayley-Menger determinant.
pub fn embeddability_check(q: &PretangentQuotient, target: EmbedTarget) -> Result<Embeddability> {
    let k = q.classes.len();
    if k > MAX_EMBED_CLASSES {
        return Err(Error::SizeLimit(format!(
            "embeddability enumerates subsets of at most {MAX_EMBED_CLASSES} classes, got {k}"
        )));
    }
    let scale = q.rho.iter().flatten().copied().fold(0.0f64, f64::max);
    let tolerance = EMBED_TOL_FACTOR * scale;
    let defect = match target {
        EmbedTarget::Line => line_defect(q).0,
        EmbedTarget::HalfLine => {
            let (d, s) = line_defect(q);
            let min = s.iter().copied().fold(f64::INFINITY, f64::min);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sb = s[q.base_class];
            d.max((sb - min).min(max - sb))
        }
        EmbedTarget::Plane => plane_defect(q, scale),
    };
    Ok(Embeddability {
        target,
        embeddable: defect <= tolerance,
        defect,
        tolerance,
    })
}

/// Signed line coordinates via farthest-pair anchoring, plus the worst
/// additivity defect max |rho(i,j) - |s(i) - s(j)||.
fn line_defect(q: &PretangentQuotient) -> (f64, Vec<f64>) {
    let k = q.classes.len();
    let mut s = vec![0.0; k];
    if k == 1 {
        return (0.0, s);
    }
    let (mut ai, mut bi, mut far) = (0, 1, -1.0);
    for i in 0..k {
        for j in 0..i {
            if q.rho[i][j] > far {
                far = q.rho[i][j];
                ai = j;
                bi = i;
            }
        }
    }
    s[ai] = 0.0;
    s[bi] = q.rho[ai][bi];
    for c in 0..k {
        if c == ai || c == bi {
            continue;
        }
        // distance from the first anchor fixes |s|; the second anchor picks
        // the side
        let r = q.rho[ai][c];
        let fit = |x: f64| ((x - s[bi]).abs() - q.rho[bi][c]).abs();
        s[c] = if fit(r) <= fit(-r) { r } else { -r };
    }
    let mut defect = 0.0f64;
    for i in 0..k {
        for j in 0..i {
            defect = defect.max((q.rho[i][j] - (s[i] - s[j]).abs()).abs());
        }
    }
    (defect, s)
}

/// Worst planarity violation over class subsets, normalized to a length.
/// 3-subsets must have nonnegative squared area (lengths^4, so the excess is
/// divided by scale^3); 4-subsets must have zero Cayley-Menger determinant
/// (288 V^2, lengths^6, divided by 288 scale^5).
fn plane_defect(q: &PretangentQuotient, scale: f64) -> f64 {
    let k = q.classes.len();
    if k < 3 || scale <= 0.0 {
        return 0.0;
    }
    let mut defect = 0.0f64;
    for i in 0..k {
        for j in 0..i {
            for l in 0..j {
                let a2 = triangle_area_sq(q.rho[i][j], q.rho[i][l], q.rho[j][l]);
                defect = defect.max((-a2).max(0.0) / scale.powi(3));
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            for l in 0..j {
                for m in 0..l {
                    let idx = [i, j, l, m];
                    let d: Vec<Vec<f64>> = idx
                        .iter()
                        .map(|&x| idx.iter().map(|&y| q.rho[x][y]).collect())
                        .collect();
                    defect = defect.max(cayley_menger(&d).abs() / (288.0 * scale.powi(5)));
                }
            }
        }
    }
    defect
}

/// Sampling and decision parameters shared by all scenarios.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioParams {
    pub profile: ProfileParams,
    pub slope_margin: f64,
    pub ratio_floor: f64,
    pub zero_tol: Option<f64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            profile: ProfileParams {
                t0: Some(0.1),
                grid_len: 11,
                shell_width: 0.05,
                n_sphere: 96,
                n_target: 768,
                seed: 0,
            },
            slope_margin: DEFAULT_SLOPE_MARGIN,
            ratio_floor: DEFAULT_RATIO_FLOOR,
            zero_tol: None,
        }
    }
}

/// Outcome of one scenario. The transfer legs are None when the model
/// family cannot be shadowed in the scene geometry (a refutation in itself,
/// recorded in `transfer_failure`).
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub verdict: TangencyVerdict,
    pub profile: EpsilonProfile,
    /// Quotient of the family transferred onto the scene geometry.
    pub quotient: Option<PretangentQuotient>,
    pub line: Option<Embeddability>,
    pub half_line: Option<Embeddability>,
    pub plane: Option<Embeddability>,
    pub classes_match: Option<bool>,
    pub isometry: Option<IsometryReport>,
    pub transfer_failure: Option<String>,
}

impl ScenarioResult {
    /// Fitted slope, for summary tables.
    pub fn slope(&self) -> Option<f64> {
        self.verdict.slope
    }
}

/// Canonical family on the model object: the base plus points receding at
/// the given ambient offsets scaled by 1/n, normalized by 1/n. The limits
/// are exact offset distances, so the quotient classes and their metric are
/// known in closed form.
fn canonical_family(
    space: &MetricSpace,
    a: &Point,
    offsets: &[(String, Vec<f64>)],
) -> Result<StableFamily> {
    let ac = a.as_coords()?.to_vec();
    let candidates: Vec<PointSequence> = offsets
        .iter()
        .map(|(label, off)| {
            let ac = ac.clone();
            let off = off.clone();
            PointSequence::from_fn(label.clone(), move |n| {
                Point::coords(
                    ac.iter()
                        .zip(&off)
                        .map(|(c, o)| c + o / n as f64)
                        .collect::<Vec<f64>>(),
                )
            })
        })
        .collect();
    let (family, rejected) = build_family(
        space,
        a,
        &candidates,
        &NormalizingSequence::power(1.0, 1.0),
        &IndexSchedule::default(),
        Tolerances::default(),
    )?;
    if !rejected.is_empty() {
        return Err(Error::NumericalAnomaly(format!(
            "{} canonical pool members were rejected from the model family",
            rejected.len()
        )));
    }
    Ok(family)
}

fn ratio_offsets(unit: &[f64]) -> Vec<(String, Vec<f64>)> {
    POOL_RATIOS
        .iter()
        .map(|&r| (format!("ratio-{r}"), unit.iter().map(|&u| r * u).collect()))
        .collect()
}

fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument(
            "direction vector must be nonzero and finite".into(),
        ));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Shared scenario pipeline: profile + decision, then the family transfer
/// leg with quotient comparisons and embeddability checks.
fn run_pipeline(
    scenario: &str,
    space: &MetricSpace,
    a: &Point,
    z: &Subspace,
    y: &Subspace,
    offsets: &[(String, Vec<f64>)],
    params: &ScenarioParams,
) -> Result<ScenarioResult> {
    let profile = epsilon_profile(a, z, y, &params.profile)?;
    let verdict = decide_strong_tangency(&profile, params.slope_margin, params.ratio_floor);
    let family = canonical_family(space, a, offsets)?;
    let mut result = ScenarioResult {
        scenario: scenario.to_string(),
        verdict,
        profile,
        quotient: None,
        line: None,
        half_line: None,
        plane: None,
        classes_match: None,
        isometry: None,
        transfer_failure: None,
    };
    match transfer_family(&family, y, &[], params.zero_tol) {
        Ok(transfer) => {
            let qz = metric_identification(&family, params.zero_tol)?;
            let qy = metric_identification(&transfer.family, params.zero_tol)?;
            let pairing = aligned_class_pairing(&qz, &qy)?;
            result.isometry = Some(quotient_isometry_check(&qz, &qy, &pairing)?);
            result.line = Some(embeddability_check(&qy, EmbedTarget::Line)?);
            result.half_line = Some(embeddability_check(&qy, EmbedTarget::HalfLine)?);
            result.plane = Some(embeddability_check(&qy, EmbedTarget::Plane)?);
            result.classes_match = Some(transfer.classes_match);
            result.quotient = Some(qy);
        }
        Err(Error::TransferFailure { member, floor }) => {
            result.transfer_failure = Some(format!(
                "no sequence in the scene geometry shadows {member}: distance ratio stays >= {floor:.4}"
            ));
        }
        Err(e) => return Err(e),
    }
    Ok(result)
}

/// A smooth curve against its tangent line at the point reached by
/// `base_param`. The caller supplies the curve derivative there; it must be
/// nonzero for the tangent line to exist.
pub fn scenario_simple_curve(
    curve: Chart,
    base_param: f64,
    derivative: Vec<f64>,
    params: &ScenarioParams,
) -> Result<ScenarioResult> {
    if curve.param_dim() != 1 {
        return Err(Error::InvalidArgument(
            "curve scenario needs a one-parameter chart".into(),
        ));
    }
    let (lo, hi) = curve.domain()[0];
    if !(base_param >= lo && base_param <= hi) {
        return Err(Error::InvalidArgument(format!(
            "base parameter {base_param} outside the curve domain [{lo}, {hi}]"
        )));
    }
    let unit = normalize(&derivative).map_err(|_| {
        Error::InvalidArgument(
            "the curve derivative at the base parameter is zero; no tangent line exists".into(),
        )
    })?;
    let ac = curve.eval(&[base_param]);
    if unit.len() != ac.len() {
        return Err(Error::InvalidArgument(
            "derivative dimension does not match the curve ambient dimension".into(),
        ));
    }
    let space = MetricSpace::euclidean(ac.len())?;
    let y = Subspace::from_chart(space.clone(), curve)?;
    let z = Subspace::from_chart(
        space.clone(),
        Chart::line(ac.clone(), unit.clone(), MODEL_SPAN)?,
    )?;
    let a = Point::coords(ac);
    run_pipeline("curve", &space, &a, &z, &y, &ratio_offsets(&unit), params)
}

fn poly_value_slope(coeffs: &[f64]) -> (f64, f64) {
    let c = coeffs.first().copied().unwrap_or(0.0);
    let b = coeffs.get(1).copied().unwrap_or(0.0);
    (c, b)
}

/// A union of polynomial graphs sharing value and slope at x = 0, against
/// the line through (0, c) with that slope.
pub fn scenario_graph_union(
    functions: &[Vec<f64>],
    params: &ScenarioParams,
) -> Result<ScenarioResult> {
    let first = functions
        .first()
        .ok_or_else(|| Error::InvalidArgument("graph union needs at least one function".into()))?;
    let (c, b) = poly_value_slope(first);
    for f in functions {
        let (fc, fb) = poly_value_slope(f);
        if fc != c || fb != b {
            return Err(Error::InvalidArgument(format!(
                "graphs must share value and slope at 0: got ({fc}, {fb}) against ({c}, {b})"
            )));
        }
    }
    let space = MetricSpace::euclidean(2)?;
    let charts = functions
        .iter()
        .map(|f| Chart::graph(f.clone(), -SCENARIO_SPAN, SCENARIO_SPAN))
        .collect::<Result<Vec<_>>>()?;
    let y = Subspace::from_charts(space.clone(), charts)?;
    let unit = normalize(&[1.0, b])?;
    let z = Subspace::from_chart(
        space.clone(),
        Chart::line(vec![0.0, c], unit.clone(), MODEL_SPAN)?,
    )?;
    let a = Point::coords([0.0, c]);
    run_pipeline("graphs", &space, &a, &z, &y, &ratio_offsets(&unit), params)
}

/// The region between two polynomial graphs with common value at 0, against
/// a line through (0, c). With `z_slope` None the graphs must also share
/// their slope at 0 and the line uses it; passing an explicit slope skips
/// that requirement, which is how a band of positive angular width is run
/// against a line it cannot be tangent to.
pub fn scenario_between_graphs(
    f1: &[f64],
    f2: &[f64],
    z_slope: Option<f64>,
    params: &ScenarioParams,
) -> Result<ScenarioResult> {
    let (c1, b1) = poly_value_slope(f1);
    let (c2, b2) = poly_value_slope(f2);
    if c1 != c2 {
        return Err(Error::InvalidArgument(format!(
            "graphs must share their value at 0: got {c1} and {c2}"
        )));
    }
    let b = match z_slope {
        Some(b) => b,
        None => {
            if b1 != b2 {
                return Err(Error::InvalidArgument(format!(
                    "graphs must share their slope at 0 (got {b1} and {b2}); pass an explicit \
                     line slope to probe a band of positive width"
                )));
            }
            b1
        }
    };
    let space = MetricSpace::euclidean(2)?;
    let y = Subspace::from_chart(
        space.clone(),
        Chart::between_graphs(f1.to_vec(), f2.to_vec(), -SCENARIO_SPAN, SCENARIO_SPAN)?,
    )?;
    let unit = normalize(&[1.0, b])?;
    let z = Subspace::from_chart(
        space.clone(),
        Chart::line(vec![0.0, c1], unit.clone(), MODEL_SPAN)?,
    )?;
    let a = Point::coords([0.0, c1]);
    run_pipeline("between", &space, &a, &z, &y, &ratio_offsets(&unit), params)
}

/// The solid of revolution with profile x^(1+alpha) against its axis ray at
/// the apex. The shell-to-axis distance is t^(1+alpha) to leading order, so
/// the fitted slope tracks 1 + alpha and the quotient embeds into a
/// half-line with the base class at the end.
pub fn scenario_rotation_body(alpha: f64, params: &ScenarioParams) -> Result<ScenarioResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "profile exponent must be a positive real, got {alpha}"
        )));
    }
    let space = MetricSpace::euclidean(3)?;
    let y = Subspace::from_chart(space.clone(), Chart::rotation_body(alpha, 1.0)?)?;
    let z = Subspace::from_chart(
        space.clone(),
        Chart::ray(vec![0.0; 3], vec![1.0, 0.0, 0.0], 1.0)?,
    )?;
    let a = Point::coords([0.0; 3]);
    let mut params = params.clone();
    params.profile.n_sphere = params.profile.n_sphere.max(SOLID_MIN_SPHERE);
    run_pipeline(
        "rotation",
        &space,
        &a,
        &z,
        &y,
        &ratio_offsets(&[1.0, 0.0, 0.0]),
        &params,
    )
}

fn gram_rank2_ok(j1: &[f64], j2: &[f64]) -> bool {
    let g11: f64 = j1.iter().map(|x| x * x).sum();
    let g22: f64 = j2.iter().map(|x| x * x).sum();
    let g12: f64 = j1.iter().zip(j2).map(|(x, y)| x * y).sum();
    let tr = g11 + g22;
    let disc = ((g11 - g22).powi(2) + 4.0 * g12 * g12).sqrt();
    let l_max = 0.5 * (tr + disc);
    let l_min = 0.5 * (tr - disc);
    // singular values are sqrt of the Gram eigenvalues
    l_min > RANK_RTOL * RANK_RTOL * l_max && l_max > 0.0
}

/// A parametrized surface against the affine plane spanned by the supplied
/// Jacobian columns at the base parameter. The Jacobian must have rank 2,
/// checked through its 2x2 Gram eigenvalues.
pub fn scenario_surface(
    surface: Chart,
    base_param: &[f64],
    jacobian: &[Vec<f64>],
    params: &ScenarioParams,
) -> Result<ScenarioResult> {
    if surface.param_dim() != 2 || base_param.len() != 2 {
        return Err(Error::InvalidArgument(
            "surface scenario needs a two-parameter chart and base parameter".into(),
        ));
    }
    for (axis, (&u, &(lo, hi))) in base_param.iter().zip(surface.domain()).enumerate() {
        if !(u >= lo && u <= hi) {
            return Err(Error::InvalidArgument(format!(
                "base parameter axis {axis} value {u} outside [{lo}, {hi}]"
            )));
        }
    }
    let [j1, j2] = match jacobian {
        [j1, j2] => [j1, j2],
        _ => {
            return Err(Error::InvalidArgument(
                "surface scenario needs exactly two Jacobian columns".into(),
            ))
        }
    };
    let ac = surface.eval(base_param);
    if j1.len() != ac.len() || j2.len() != ac.len() {
        return Err(Error::InvalidArgument(
            "Jacobian columns do not match the surface ambient dimension".into(),
        ));
    }
    if !gram_rank2_ok(j1, j2) {
        return Err(Error::InvalidArgument(
            "surface Jacobian is rank-deficient at the base parameter; no tangent plane exists"
                .into(),
        ));
    }
    let d1 = normalize(j1)?;
    let d2 = normalize(j2)?;
    let space = MetricSpace::euclidean(ac.len())?;
    let y = Subspace::from_chart(space.clone(), surface)?;
    let z = Subspace::from_chart(
        space.clone(),
        Chart::plane(ac.clone(), d1.clone(), d2.clone(), MODEL_SPAN)?,
    )?;
    let a = Point::coords(ac);
    // two independent directions: the quotient is planar but not linear
    let offsets = vec![
        ("dir-1".to_string(), d1.clone()),
        ("dir-2".to_string(), d2),
        ("dir-1-x2".to_string(), d1.iter().map(|x| 2.0 * x).collect()),
    ];
    run_pipeline("surface", &space, &a, &z, &y, &offsets, params)
}

/// The cone probed against the plane z = 0 it fails to be tangent to: the
/// surface has no tangent plane at the apex, and the deviation ratio settles
/// at 1/sqrt(2) in both directions. The transfer leg fails by construction
/// and is reported, not raised.
pub fn scenario_cone_vs_plane(params: &ScenarioParams) -> Result<ScenarioResult> {
    let space = MetricSpace::euclidean(3)?;
    let y = Subspace::from_chart(space.clone(), Chart::cone(SCENARIO_SPAN)?)?;
    let z = Subspace::from_chart(
        space.clone(),
        Chart::plane(
            vec![0.0; 3],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            MODEL_SPAN,
        )?,
    )?;
    let a = Point::coords([0.0; 3]);
    let offsets = vec![
        ("dir-1".to_string(), vec![1.0, 0.0, 0.0]),
        ("dir-2".to_string(), vec![0.0, 1.0, 0.0]),
        ("dir-1-x2".to_string(), vec![2.0, 0.0, 0.0]),
    ];
    run_pipeline("cone", &space, &a, &z, &y, &offsets, params)
}

/// Runs a named scenario with its canonical inputs. `alpha` feeds the
/// rotation scenario and is ignored elsewhere.
pub fn run_scenario(id: &str, alpha: f64, params: &ScenarioParams) -> Result<ScenarioResult> {
    match id {
        "curve" => {
            scenario_simple_curve(Chart::circle([0.0, 0.0], 1.0)?, 0.0, vec![0.0, 1.0], params)
        }
        "graphs" => scenario_graph_union(&[vec![0.0, 1.0], vec![0.0, 1.0, 1.0]], params),
        "between" => scenario_between_graphs(&[0.0, 1.0, 1.0], &[0.0, 1.0, -1.0], None, params),
        "rotation" => scenario_rotation_body(alpha, params),
        "surface" => scenario_surface(
            Chart::paraboloid(0.7)?,
            &[0.0, 0.0],
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            params,
        ),
        "cone" => scenario_cone_vs_plane(params),
        other => Err(Error::InvalidArgument(format!(
            "unknown scenario '{other}'; expected one of {SCENARIO_IDS:?}"
        ))),
    }
}

/// Runs every canonical scenario as an independent parallel job with an
/// isolated seed per scenario.
pub fn run_all(alpha: f64, params: &ScenarioParams) -> Result<Vec<ScenarioResult>> {
    SCENARIO_IDS
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut p = params.clone();
            p.profile.seed = derive_seed(params.profile.seed, "gallery", i as u64);
            run_scenario(id, alpha, &p)
        })
        .collect()
}
