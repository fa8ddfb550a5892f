//! Subspaces of a metric space: chart images, chart unions, explicit point
//! sets, or the whole space.
//!
//! The sampling interface is what the sup-inf machinery needs: points of the
//! subspace on a metric sphere shell around a base point, points filling a
//! ball, and nearest-point refinement for distance queries. Chart-backed
//! subspaces get exact-to-bisection shell points by walking outward from a
//! preimage of the center; point sets are filtered directly.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{bisect_root, derive_seed, golden_section_min};
use crate::space::{euclid, MetricSpace, Point};

/// Horner evaluation of a polynomial given coefficients [c0, c1, ...] for
/// c0 + c1 x + c2 x^2 + ...
pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Derivative value of the polynomial at x.
pub fn polyder(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
}

type ChartMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A smooth map from a parameter box into ambient coordinates.
#[derive(Clone)]
pub struct Chart {
    map: ChartMap,
    domain: Vec<(f64, f64)>,
    label: String,
}

impl std::fmt::Debug for Chart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Chart({}, dim {})", self.label, self.domain.len())
    }
}

impl Chart {
    pub fn new(
        label: impl Into<String>,
        domain: Vec<(f64, f64)>,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if domain.is_empty()
            || domain
                .iter()
                .any(|&(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "chart domain must be a nonempty box with lo < hi per axis".into(),
            ));
        }
        Ok(Chart {
            map: Arc::new(map),
            domain,
            label: label.into(),
        })
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        (self.map)(u)
    }

    pub fn param_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn center(&self) -> Vec<f64> {
        self.domain
            .iter()
            .map(|&(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    fn clamp(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.domain)
            .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
            .collect()
    }

    fn box_diag(&self) -> f64 {
        self.domain
            .iter()
            .map(|&(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Coarse-grid plus coordinate-descent search for the parameter whose
    /// image is nearest to `target`. Returns (param, distance).
    pub fn nearest_param(&self, target: &[f64]) -> (Vec<f64>, f64) {
        let k = self.param_dim();
        let per_axis = match k {
            1 => 1024,
            2 => 33,
            _ => 11,
        };
        let mut best_u = self.center();
        let mut best_d = euclid(&self.eval(&best_u), target);
        let mut idx = vec![0usize; k];
        loop {
            let u: Vec<f64> = idx
                .iter()
                .zip(&self.domain)
                .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
                .collect();
            let d = euclid(&self.eval(&u), target);
            if d < best_d {
                best_d = d;
                best_u = u;
            }
            let mut axis = 0;
            loop {
                if axis == k {
                    break;
                }
                idx[axis] += 1;
                if idx[axis] < per_axis {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if axis == k {
                break;
            }
        }
        let mut window: Vec<f64> = self
            .domain
            .iter()
            .map(|&(lo, hi)| 2.0 * (hi - lo) / (per_axis - 1) as f64)
            .collect();
        for _round in 0..6 {
            for axis in 0..k {
                let (lo_dom, hi_dom) = self.domain[axis];
                let lo = (best_u[axis] - window[axis]).max(lo_dom);
                let hi = (best_u[axis] + window[axis]).min(hi_dom);
                if hi <= lo {
                    continue;
                }
                let u_base = best_u.clone();
                let f = |x: f64| {
                    let mut u = u_base.clone();
                    u[axis] = x;
                    euclid(&self.eval(&u), target)
                };
                let (x, d) = golden_section_min(f, lo, hi, 1e-14 * (hi - lo).max(1.0), 80);
                if d < best_d {
                    best_d = d;
                    best_u[axis] = x;
                }
                window[axis] *= 0.25;
            }
        }
        (best_u, best_d)
    }

    /// Walks from `u0` along `dir` (clamped to the domain box) until the
    /// ambient distance to `center` crosses `target_r`, then bisects.
    /// Returns the crossing parameter and point, or None when the clamped
    /// path never reaches that distance.
    fn walk_to_distance(
        &self,
        u0: &[f64],
        center: &[f64],
        target_r: f64,
        dir: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let g = |s: f64| {
            let u = self.clamp(
                &u0.iter()
                    .zip(dir)
                    .map(|(a, d)| a + s * d)
                    .collect::<Vec<_>>(),
            );
            euclid(&self.eval(&u), center) - target_r
        };
        if g(0.0) >= 0.0 {
            return None;
        }
        // local speed estimate to pick the initial step
        let diag = self.box_diag();
        let probe = 1e-4 * diag;
        let u_probe = self.clamp(
            &u0.iter()
                .zip(dir)
                .map(|(a, d)| a + probe * d)
                .collect::<Vec<_>>(),
        );
        let speed = euclid(&self.eval(&u_probe), &self.eval(&self.clamp(u0))) / probe;
        let mut s = if speed > 1e-12 {
            (0.5 * target_r / speed).min(diag)
        } else {
            1e-3 * diag
        };
        let mut s_lo = 0.0;
        let s_max = 8.0 * diag;
        loop {
            let gs = g(s);
            if gs >= 0.0 {
                break;
            }
            // saturation: the clamped path has stopped moving
            let u_here = self.clamp(
                &u0.iter()
                    .zip(dir)
                    .map(|(a, d)| a + s * d)
                    .collect::<Vec<_>>(),
            );
            let u_twice = self.clamp(
                &u0.iter()
                    .zip(dir)
                    .map(|(a, d)| a + 2.0 * s * d)
                    .collect::<Vec<_>>(),
            );
            if s > s_max || u_here == u_twice {
                return None;
            }
            s_lo = s;
            s *= 2.0;
        }
        let s_star = bisect_root(g, s_lo, s, 1e-12 * target_r.max(1e-300), 0.0);
        let u = self.clamp(
            &u0.iter()
                .zip(dir)
                .map(|(a, d)| a + s_star * d)
                .collect::<Vec<_>>(),
        );
        let p = self.eval(&u);
        Some((u, p))
    }
}

fn random_unit(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0f64..=1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// A subspace sample point: ambient coordinates plus, for chart-backed
/// subspaces, which chart produced it and at what parameter.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub ambient: Vec<f64>,
    pub part: usize,
    pub param: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum SubspaceSet {
    /// The whole parent space.
    Whole,
    /// Image of a single chart.
    Chart(Chart),
    /// Finite union of chart images.
    Union(Vec<Chart>),
    /// Explicit finite point set (coordinates in the parent space).
    Points(Vec<Vec<f64>>),
}

/// A subset of a metric space equipped with samplers.
#[derive(Debug, Clone)]
pub struct Subspace {
    parent: MetricSpace,
    set: SubspaceSet,
    label: String,
}

impl Subspace {
    pub fn whole(parent: MetricSpace) -> Self {
        let label = format!("all({})", parent.label());
        Subspace {
            parent,
            set: SubspaceSet::Whole,
            label,
        }
    }

    /// Subspace given by a chart image. Checks ambient dimension agreement
    /// by evaluating at the box center.
    pub fn from_chart(parent: MetricSpace, chart: Chart) -> Result<Self> {
        let dim = parent.dim().ok_or_else(|| {
            Error::InvalidArgument("chart subspaces need a coordinate parent space".into())
        })?;
        let probe = chart.eval(&chart.center());
        if probe.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "chart {} maps into R^{}, parent is R^{dim}",
                chart.label(),
                probe.len()
            )));
        }
        if probe.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "chart {} produces non-finite coordinates",
                chart.label()
            )));
        }
        let label = chart.label().to_string();
        Ok(Subspace {
            parent,
            set: SubspaceSet::Chart(chart),
            label,
        })
    }

    pub fn from_charts(parent: MetricSpace, charts: Vec<Chart>) -> Result<Self> {
        if charts.is_empty() {
            return Err(Error::InvalidArgument("empty chart union".into()));
        }
        let labels: Vec<&str> = charts.iter().map(|c| c.label()).collect();
        let label = format!("union({})", labels.join(", "));
        for c in &charts {
            Subspace::from_chart(parent.clone(), c.clone())?;
        }
        Ok(Subspace {
            parent,
            set: SubspaceSet::Union(charts),
            label,
        })
    }

    pub fn from_points(parent: MetricSpace, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = parent.dim().ok_or_else(|| {
            Error::InvalidArgument("point-set subspaces need a coordinate parent space".into())
        })?;
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty point set".into()));
        }
        if points
            .iter()
            .any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "point set entries must be finite and match the parent dimension".into(),
            ));
        }
        let label = format!("points({})", points.len());
        Ok(Subspace {
            parent,
            set: SubspaceSet::Points(points),
            label,
        })
    }

    /// Uniform 1-D grid on the segment [lo, hi] of the real line with mesh h.
    pub fn grid1d(parent: MetricSpace, lo: f64, hi: f64, mesh: f64) -> Result<Self> {
        if !(mesh > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(
                "grid needs hi > lo and mesh > 0".into(),
            ));
        }
        let n = ((hi - lo) / mesh).round() as usize;
        if n > 50_000_000 {
            return Err(Error::SizeLimit(format!("grid would have {n} points")));
        }
        let points = (0..=n).map(|i| vec![lo + mesh * i as f64]).collect();
        let mut s = Subspace::from_points(parent, points)?;
        s.label = format!("grid[{lo},{hi}]@{mesh}");
        Ok(s)
    }

    pub fn parent(&self) -> &MetricSpace {
        &self.parent
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set(&self) -> &SubspaceSet {
        &self.set
    }

    /// Resolves a point to ambient form: chart params are pushed through the
    /// chart, coordinates and indices pass unchanged.
    pub fn to_ambient(&self, p: &Point) -> Result<Point> {
        match (p, &self.set) {
            (Point::Param(u), SubspaceSet::Chart(c)) => {
                if u.len() != c.param_dim() {
                    return Err(Error::InvalidArgument(format!(
                        "param rank {} does not match chart {}",
                        u.len(),
                        c.label()
                    )));
                }
                Ok(Point::Coords(c.eval(u)))
            }
            (Point::Param(_), _) => Err(Error::InvalidArgument(format!(
                "subspace {} cannot resolve bare chart params",
                self.label
            ))),
            (other, _) => Ok(other.clone()),
        }
    }

    /// Distance from an ambient point to the subspace, with the nearest
    /// subspace point. Chart-backed sets use coarse search plus descent.
    pub fn project(&self, target: &[f64]) -> Result<(f64, Vec<f64>)> {
        match &self.set {
            SubspaceSet::Whole => Ok((0.0, target.to_vec())),
            SubspaceSet::Chart(c) => {
                let (u, d) = c.nearest_param(target);
                Ok((d, c.eval(&u)))
            }
            SubspaceSet::Union(parts) => {
                let mut best = (f64::INFINITY, Vec::new());
                for c in parts {
                    let (u, d) = c.nearest_param(target);
                    if d < best.0 {
                        best = (d, c.eval(&u));
                    }
                }
                Ok(best)
            }
            SubspaceSet::Points(pts) => {
                let mut best = (f64::INFINITY, Vec::new());
                for p in pts {
                    let d = euclid(p, target);
                    if d < best.0 {
                        best = (d, p.clone());
                    }
                }
                Ok(best)
            }
        }
    }

    /// Whether the point lies in the subspace within `tol`.
    pub fn membership(&self, p: &Point, tol: f64) -> Result<bool> {
        match (&self.set, p) {
            (SubspaceSet::Whole, _) => Ok(true),
            (_, Point::Index(_)) => Err(Error::InvalidArgument(
                "index points only live in whole finite spaces".into(),
            )),
            (_, _) => {
                let amb = self.to_ambient(p)?;
                let coords = amb.as_coords()?;
                Ok(self.project(coords)?.0 <= tol)
            }
        }
    }

    /// Rough diameter of the subspace, used to scale default grids.
    pub fn scale_estimate(&self) -> f64 {
        match &self.set {
            SubspaceSet::Whole => match self.parent.cardinality() {
                Some(_) => 1.0,
                None => {
                    let b = self.parent.default_box();
                    b.iter()
                        .map(|&(lo, hi)| (hi - lo) * (hi - lo))
                        .sum::<f64>()
                        .sqrt()
                }
            },
            SubspaceSet::Chart(c) => chart_diameter(std::slice::from_ref(c)),
            SubspaceSet::Union(parts) => chart_diameter(parts),
            SubspaceSet::Points(pts) => {
                let dim = pts[0].len();
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for p in pts {
                    for i in 0..dim {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                lo.iter()
                    .zip(&hi)
                    .map(|(l, h)| (h - l) * (h - l))
                    .sum::<f64>()
                    .sqrt()
                    .max(1e-300)
            }
        }
    }

    /// Points of the subspace on the metric shell |d(a, z) - t| <= eta * t.
    ///
    /// Chart sets walk outward from a preimage of `a` in up to `count`
    /// directions and bisect the crossing of d(a, .) = t, so returned points
    /// satisfy the shell constraint to bisection accuracy; a coarse-grid
    /// filter adds shell points far from `a`. Point sets are filtered
    /// directly. The result may be empty (t beyond the subspace extent);
    /// callers flag that case.
    pub fn shell_sample(
        &self,
        a: &Point,
        t: f64,
        eta: f64,
        count: usize,
        seed: u64,
    ) -> Result<Vec<SamplePoint>> {
        if !(t > 0.0 && eta > 0.0) {
            return Err(Error::InvalidArgument(
                "shell needs t > 0 and eta > 0".into(),
            ));
        }
        let out = match &self.set {
            SubspaceSet::Whole => {
                if self.parent.is_finite_space() {
                    let n = self.parent.cardinality().unwrap();
                    let mut keep = Vec::new();
                    for i in 0..n {
                        let d = self.parent.dist(a, &Point::Index(i))?;
                        if (d - t).abs() <= eta * t {
                            keep.push(SamplePoint {
                                ambient: vec![i as f64],
                                part: 0,
                                param: None,
                            });
                        }
                    }
                    keep
                } else {
                    let c = a.as_coords()?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..count)
                        .map(|_| {
                            let dir = random_unit(&mut rng, c.len());
                            SamplePoint {
                                ambient: c.iter().zip(&dir).map(|(x, d)| x + t * d).collect(),
                                part: 0,
                                param: None,
                            }
                        })
                        .collect()
                }
            }
            SubspaceSet::Points(pts) => {
                let c = a.as_coords()?;
                let mut keep: Vec<SamplePoint> = pts
                    .iter()
                    .filter(|p| (euclid(p, c) - t).abs() <= eta * t)
                    .map(|p| SamplePoint {
                        ambient: p.clone(),
                        part: 0,
                        param: None,
                    })
                    .collect();
                subsample(&mut keep, count, seed);
                keep
            }
            SubspaceSet::Chart(c) => {
                chart_shell(std::slice::from_ref(c), a.as_coords()?, t, eta, count, seed)?
            }
            SubspaceSet::Union(parts) => chart_shell(parts, a.as_coords()?, t, eta, count, seed)?,
        };
        for sp in &out {
            if let Point::Coords(_) = a {
                let d = euclid(&sp.ambient, a.as_coords()?);
                if (d - t).abs() > eta * t * (1.0 + 1e-9) {
                    return Err(Error::NumericalAnomaly(format!(
                        "shell point at distance {d} violates |d - {t}| <= {eta} * t"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Points of the subspace inside the ball of radius `radius` around `a`,
    /// radially stratified for chart sets. Always includes a preimage of `a`
    /// itself when one exists.
    pub fn ball_sample(
        &self,
        a: &Point,
        radius: f64,
        count: usize,
        seed: u64,
    ) -> Result<Vec<SamplePoint>> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument("ball needs radius > 0".into()));
        }
        match &self.set {
            SubspaceSet::Whole => {
                if self.parent.is_finite_space() {
                    let n = self.parent.cardinality().unwrap();
                    let mut keep = Vec::new();
                    for i in 0..n {
                        if self.parent.dist(a, &Point::Index(i))? <= radius {
                            keep.push(SamplePoint {
                                ambient: vec![i as f64],
                                part: 0,
                                param: None,
                            });
                        }
                    }
                    Ok(keep)
                } else {
                    let c = a.as_coords()?;
                    let dim = c.len();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    Ok((0..count)
                        .map(|i| {
                            let dir = random_unit(&mut rng, dim);
                            let r =
                                radius * ((i as f64 + 1.0) / count as f64).powf(1.0 / dim as f64);
                            SamplePoint {
                                ambient: c.iter().zip(&dir).map(|(x, d)| x + r * d).collect(),
                                part: 0,
                                param: None,
                            }
                        })
                        .collect())
                }
            }
            SubspaceSet::Points(pts) => {
                let c = a.as_coords()?;
                let mut keep: Vec<SamplePoint> = pts
                    .iter()
                    .filter(|p| euclid(p, c) <= radius)
                    .map(|p| SamplePoint {
                        ambient: p.clone(),
                        part: 0,
                        param: None,
                    })
                    .collect();
                subsample(&mut keep, count, seed);
                Ok(keep)
            }
            SubspaceSet::Chart(c) => {
                chart_ball(std::slice::from_ref(c), a.as_coords()?, radius, count, seed)
            }
            SubspaceSet::Union(parts) => chart_ball(parts, a.as_coords()?, radius, count, seed),
        }
    }

    /// Nearest distance from `z` to the subspace using precomputed target
    /// samples, refined by local parameter descent on chart sets. The
    /// refinement stops once an improvement round gains less than
    /// `stop_tol`.
    pub fn nearest_among(
        &self,
        z: &[f64],
        targets: &[SamplePoint],
        stop_tol: f64,
    ) -> Option<(f64, Vec<f64>)> {
        if let SubspaceSet::Whole = &self.set {
            if !self.parent.is_finite_space() {
                return Some((0.0, z.to_vec()));
            }
        }
        let mut best: Option<(f64, &SamplePoint)> = None;
        for sp in targets {
            let d = euclid(&sp.ambient, z);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, sp));
            }
        }
        let (d0, sp) = best?;
        let charts: &[Chart] = match &self.set {
            SubspaceSet::Chart(c) => std::slice::from_ref(c),
            SubspaceSet::Union(parts) => parts,
            _ => return Some((d0, sp.ambient.clone())),
        };
        let Some(param) = &sp.param else {
            return Some((d0, sp.ambient.clone()));
        };
        let chart = &charts[sp.part];
        let (d, p) = descend(chart, param, z, d0, stop_tol);
        Some((d.min(d0), if d < d0 { p } else { sp.ambient.clone() }))
    }
}

/// Local coordinate descent of u -> |chart(u) - z| from a starting
/// parameter. Window sizes derive from per-axis speeds so the search stays
/// in the starting basin.
fn descend(
    chart: &Chart,
    start: &[f64],
    z: &[f64],
    d_start: f64,
    stop_tol: f64,
) -> (f64, Vec<f64>) {
    let k = chart.param_dim();
    let mut u = start.to_vec();
    let mut d = d_start;
    let diag = chart.box_diag();
    // per-axis speeds at the start
    let mut window = vec![0.0; k];
    for axis in 0..k {
        let mut probe = u.clone();
        let h = 1e-5 * diag;
        probe[axis] += h;
        let probe = chart.clamp(&probe);
        let speed = euclid(&chart.eval(&probe), &chart.eval(&u)) / h;
        window[axis] = if speed > 1e-12 {
            (4.0 * d_start.max(stop_tol) / speed).min(diag)
        } else {
            0.25 * diag
        };
    }
    for _round in 0..8 {
        let d_before = d;
        for axis in 0..k {
            let (lo_dom, hi_dom) = chart.domain()[axis];
            let lo = (u[axis] - window[axis]).max(lo_dom);
            let hi = (u[axis] + window[axis]).min(hi_dom);
            if hi <= lo {
                continue;
            }
            let u_base = u.clone();
            let f = |x: f64| {
                let mut v = u_base.clone();
                v[axis] = x;
                euclid(&chart.eval(&v), z)
            };
            let (x, dx) = golden_section_min(f, lo, hi, 0.0, 60);
            if dx < d {
                d = dx;
                u[axis] = x;
            }
            window[axis] *= 0.3;
        }
        if d_before - d < stop_tol {
            break;
        }
    }
    (d, chart.eval(&u))
}

fn chart_diameter(charts: &[Chart]) -> f64 {
    let mut pts = Vec::new();
    for (ci, c) in charts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xd1a0, "diameter", ci as u64));
        for _ in 0..24 {
            let u: Vec<f64> = c
                .domain()
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect();
            pts.push(c.eval(&u));
        }
        pts.push(c.eval(&c.center()));
        let corners = 1usize << c.param_dim().min(6);
        for mask in 0..corners {
            let u: Vec<f64> = c
                .domain()
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| if mask >> i & 1 == 1 { hi } else { lo })
                .collect();
            pts.push(c.eval(&u));
        }
    }
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in 0..i {
            best = best.max(euclid(&pts[i], &pts[j]));
        }
    }
    best.max(1e-300)
}

fn subsample(points: &mut Vec<SamplePoint>, count: usize, seed: u64) {
    if points.len() <= count {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates: choose `count` without replacement
    let n = points.len();
    for i in 0..count {
        let j = rng.random_range(i..n);
        points.swap(i, j);
    }
    points.truncate(count);
}

/// Start for the i-th walk: the base preimage, with a random subset of
/// coordinates pinned to box endpoints on odd walks. Pinned starts whose
/// image already left the ball are discarded by the walk itself.
fn pinned_start(chart: &Chart, u0: &[f64], k: usize, i: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut start = u0.to_vec();
    if k >= 2 && i % 2 == 1 {
        for (axis, coord) in start.iter_mut().enumerate() {
            if rng.random_bool(0.5) {
                let (lo, hi) = chart.domain()[axis];
                *coord = if rng.random_bool(0.5) { hi } else { lo };
            }
        }
    }
    start
}

/// 1-D walk that retries from the far domain end when the first attempt
/// fails: on a closed chart a walk that clamps at the seam re-enters from
/// the other side, while on an open chart the retry starts beyond the target
/// distance and stays a miss.
fn walk_1d_with_seam_retry(
    chart: &Chart,
    start: &[f64],
    a: &[f64],
    r: f64,
    dir: &[f64],
    k: usize,
) -> Option<(Vec<f64>, Vec<f64>)> {
    if let Some(hit) = chart.walk_to_distance(start, a, r, dir) {
        return Some(hit);
    }
    if k != 1 {
        return None;
    }
    let (lo, hi) = chart.domain()[0];
    let far = if dir[0] > 0.0 { vec![lo] } else { vec![hi] };
    chart.walk_to_distance(&far, a, r, dir)
}

fn chart_shell(
    parts: &[Chart],
    a: &[f64],
    t: f64,
    eta: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<SamplePoint>> {
    let per_part = (count / parts.len()).max(2);
    let mut out = Vec::new();
    for (pi, chart) in parts.iter().enumerate() {
        let (u0, d0) = chart.nearest_param(a);
        let k = chart.param_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shell-dirs", pi as u64));
        if d0 < t {
            // Walk outward from the preimage of a. Every other walk starts
            // with a random coordinate subset pinned to box faces: suprema
            // often sit on the parameter boundary (a surface rim reached by
            // the clamped path), which interior-start walks hit only when
            // the direction ratio is extreme.
            for i in 0..per_part {
                let dir = if k == 1 {
                    vec![if i % 2 == 0 { 1.0 } else { -1.0 }]
                } else {
                    random_unit(&mut rng, k)
                };
                let start = pinned_start(chart, &u0, k, i, &mut rng);
                if let Some((u, p)) = walk_1d_with_seam_retry(chart, &start, a, t, &dir, k) {
                    out.push(SamplePoint {
                        ambient: p,
                        part: pi,
                        param: Some(u),
                    });
                }
            }
        }
        // coarse scan: shell points far from the preimage (closed curves,
        // distant lobes). 1-D charts also bisect grid sign changes.
        if k == 1 {
            let (lo, hi) = chart.domain()[0];
            let n_grid = 1024;
            let mut prev_u = lo;
            let mut prev_g = euclid(&chart.eval(&[lo]), a) - t;
            for i in 1..=n_grid {
                let x = lo + (hi - lo) * i as f64 / n_grid as f64;
                let g = euclid(&chart.eval(&[x]), a) - t;
                if prev_g * g < 0.0 {
                    let gg = |s: f64| euclid(&chart.eval(&[s]), a) - t;
                    let root = if prev_g < 0.0 {
                        bisect_root(gg, prev_u, x, 1e-12 * t, 0.0)
                    } else {
                        bisect_root(|s| -gg(s), prev_u, x, 1e-12 * t, 0.0)
                    };
                    out.push(SamplePoint {
                        ambient: chart.eval(&[root]),
                        part: pi,
                        param: Some(vec![root]),
                    });
                }
                prev_u = x;
                prev_g = g;
            }
        } else {
            let per_axis = if k == 2 { 48 } else { 13 };
            let mut idx = vec![0usize; k];
            loop {
                let u: Vec<f64> = idx
                    .iter()
                    .zip(chart.domain())
                    .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
                    .collect();
                let p = chart.eval(&u);
                if (euclid(&p, a) - t).abs() <= eta * t {
                    out.push(SamplePoint {
                        ambient: p,
                        part: pi,
                        param: Some(u),
                    });
                }
                let mut axis = 0;
                loop {
                    if axis == k {
                        break;
                    }
                    idx[axis] += 1;
                    if idx[axis] < per_axis {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
                if axis == k {
                    break;
                }
            }
        }
    }
    // drop exact duplicates from repeated directions
    out.sort_by(|x, y| {
        x.ambient
            .partial_cmp(&y.ambient)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.dedup_by(|x, y| x.ambient == y.ambient);
    subsample(&mut out, count, derive_seed(seed, "shell-thin", 0));
    Ok(out)
}

fn chart_ball(
    parts: &[Chart],
    a: &[f64],
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<SamplePoint>> {
    let per_part = (count / parts.len()).max(2);
    let mut out = Vec::new();
    for (pi, chart) in parts.iter().enumerate() {
        let (u0, d0) = chart.nearest_param(a);
        if d0 <= radius {
            out.push(SamplePoint {
                ambient: chart.eval(&u0),
                part: pi,
                param: Some(u0.clone()),
            });
        }
        if d0 >= radius {
            continue;
        }
        let k = chart.param_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "ball-dirs", pi as u64));
        for i in 0..per_part {
            let dir = if k == 1 {
                vec![if i % 2 == 0 { 1.0 } else { -1.0 }]
            } else {
                random_unit(&mut rng, k)
            };
            let r = radius * (i as f64 + 1.0) / per_part as f64;
            if r <= d0 {
                continue;
            }
            let start = pinned_start(chart, &u0, k, i, &mut rng);
            if let Some((u, p)) = walk_1d_with_seam_retry(chart, &start, a, r, &dir, k) {
                out.push(SamplePoint {
                    ambient: p,
                    part: pi,
                    param: Some(u),
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Built-in charts
// ---------------------------------------------------------------------------

impl Chart {
    /// Circle of given center and radius, parametrized by angle.
    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument("circle needs radius > 0".into()));
        }
        Chart::new(
            format!("circle(r={radius})"),
            vec![(0.0, 2.0 * std::f64::consts::PI)],
            move |u| {
                vec![
                    center[0] + radius * u[0].cos(),
                    center[1] + radius * u[0].sin(),
                ]
            },
        )
    }

    /// Line point + u * dir for u in [-span, span].
    pub fn line(point: Vec<f64>, dir: Vec<f64>, span: f64) -> Result<Self> {
        if dir.iter().all(|&d| d == 0.0) {
            return Err(Error::InvalidArgument("line direction is zero".into()));
        }
        if !(span > 0.0) {
            return Err(Error::InvalidArgument("line needs span > 0".into()));
        }
        Chart::new("line".to_string(), vec![(-span, span)], move |u| {
            point.iter().zip(&dir).map(|(p, d)| p + u[0] * d).collect()
        })
    }

    /// Ray point + u * dir for u in [0, span].
    pub fn ray(point: Vec<f64>, dir: Vec<f64>, span: f64) -> Result<Self> {
        if dir.iter().all(|&d| d == 0.0) {
            return Err(Error::InvalidArgument("ray direction is zero".into()));
        }
        Chart::new("ray".to_string(), vec![(0.0, span)], move |u| {
            point.iter().zip(&dir).map(|(p, d)| p + u[0] * d).collect()
        })
    }

    /// Segment from a to b, u in [0, 1].
    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a == b {
            return Err(Error::InvalidArgument(
                "segment needs distinct endpoints of equal dimension".into(),
            ));
        }
        Chart::new("segment".to_string(), vec![(0.0, 1.0)], move |u| {
            a.iter().zip(&b).map(|(x, y)| x + u[0] * (y - x)).collect()
        })
    }

    /// Affine plane point + u * d1 + v * d2, both params in [-span, span].
    pub fn plane(point: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>, span: f64) -> Result<Self> {
        Chart::new(
            "plane".to_string(),
            vec![(-span, span), (-span, span)],
            move |u| {
                point
                    .iter()
                    .zip(&d1)
                    .zip(&d2)
                    .map(|((p, x), y)| p + u[0] * x + u[1] * y)
                    .collect()
            },
        )
    }

    /// Graph x -> (x, poly(x)) over [lo, hi].
    pub fn graph(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        Chart::new(format!("graph{coeffs:?}"), vec![(lo, hi)], move |u| {
            vec![u[0], polyval(&coeffs, u[0])]
        })
    }

    /// Region between two polynomial graphs, as the 2-parameter chart
    /// (x, s) -> (x, (1-s) f1(x) + s f2(x)).
    pub fn between_graphs(f1: Vec<f64>, f2: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        Chart::new(
            format!("between({f1:?}, {f2:?})"),
            vec![(lo, hi), (0.0, 1.0)],
            move |u| {
                let y1 = polyval(&f1, u[0]);
                let y2 = polyval(&f2, u[0]);
                vec![u[0], (1.0 - u[1]) * y1 + u[1] * y2]
            },
        )
    }

    /// Solid of rotation around the x-axis with profile x^(1+alpha):
    /// (x, s, phi) -> (x, s x^(1+alpha) cos phi, s x^(1+alpha) sin phi).
    pub fn rotation_body(alpha: f64, x_max: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rotation body needs alpha > 0, got {alpha}"
            )));
        }
        if !(x_max > 0.0) {
            return Err(Error::InvalidArgument(
                "rotation body needs x_max > 0".into(),
            ));
        }
        Chart::new(
            format!("rotation-body(alpha={alpha})"),
            vec![(0.0, x_max), (0.0, 1.0), (0.0, 2.0 * std::f64::consts::PI)],
            move |u| {
                let rho = u[1] * u[0].powf(1.0 + alpha);
                vec![u[0], rho * u[2].cos(), rho * u[2].sin()]
            },
        )
    }

    /// Paraboloid patch (u, v) -> (u, v, u^2 + v^2) over a square of
    /// half-width span.
    pub fn paraboloid(span: f64) -> Result<Self> {
        Chart::new(
            "paraboloid".to_string(),
            vec![(-span, span), (-span, span)],
            |u| vec![u[0], u[1], u[0] * u[0] + u[1] * u[1]],
        )
    }

    /// Patch of the unit sphere around the north pole:
    /// (u, v) -> (u, v, sqrt(1 - u^2 - v^2)). Requires span < 1/sqrt(2).
    pub fn sphere_patch(span: f64) -> Result<Self> {
        if !(span > 0.0 && span < std::f64::consts::FRAC_1_SQRT_2) {
            return Err(Error::InvalidArgument(
                "sphere patch needs 0 < span < 1/sqrt(2)".into(),
            ));
        }
        Chart::new(
            "sphere-patch".to_string(),
            vec![(-span, span), (-span, span)],
            |u| vec![u[0], u[1], (1.0 - u[0] * u[0] - u[1] * u[1]).sqrt()],
        )
    }

    /// Cone (u, v) -> (u, v, sqrt(u^2 + v^2)).
    pub fn cone(span: f64) -> Result<Self> {
        Chart::new(
            "cone".to_string(),
            vec![(-span, span), (-span, span)],
            |u| vec![u[0], u[1], (u[0] * u[0] + u[1] * u[1]).sqrt()],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e2() -> MetricSpace {
        MetricSpace::euclidean(2).unwrap()
    }

    fn e3() -> MetricSpace {
        MetricSpace::euclidean(3).unwrap()
    }

    #[test]
    fn polyval_and_polyder_agree_with_hand_values() {
        // 1 + 2x + 3x^2
        assert_eq!(polyval(&[1.0, 2.0, 3.0], 2.0), 17.0);
        assert_eq!(polyder(&[1.0, 2.0, 3.0], 2.0), 14.0);
        assert_eq!(polyder(&[5.0], 1.0), 0.0);
    }

    #[test]
    fn circle_shell_points_sit_on_circle_and_shell() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        let a = Point::coords([1.0, 0.0]);
        let pts = circle.shell_sample(&a, 0.1, 0.01, 64, 3).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            let r = (p.ambient[0] * p.ambient[0] + p.ambient[1] * p.ambient[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-9, "point off the circle: {r}");
            let d = euclid(&p.ambient, &[1.0, 0.0]);
            assert!((d - 0.1).abs() <= 0.001);
        }
    }

    #[test]
    fn diagonal_line_sphere_hits_expected_points() {
        let line = Subspace::from_chart(
            e2(),
            Chart::line(vec![0.0, 0.0], vec![1.0, 1.0], 4.0).unwrap(),
        )
        .unwrap();
        let a = Point::coords([0.0, 0.0]);
        let pts = line.shell_sample(&a, 1.0, 0.01, 16, 0).unwrap();
        let c = 0.5f64.sqrt();
        assert!(pts.len() >= 2);
        for p in &pts {
            assert!(
                (p.ambient[0].abs() - c).abs() < 1e-9,
                "unexpected {:?}",
                p.ambient
            );
            assert!((p.ambient[0] - p.ambient[1]).abs() < 1e-12);
        }
        // both signs present
        assert!(pts.iter().any(|p| p.ambient[0] > 0.0));
        assert!(pts.iter().any(|p| p.ambient[0] < 0.0));
    }

    #[test]
    fn oversized_radius_gives_empty_shell() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        let a = Point::coords([1.0, 0.0]);
        let pts = circle.shell_sample(&a, 5.0, 0.05, 64, 1).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn grid_shell_respects_width() {
        let e1 = MetricSpace::euclidean(1).unwrap();
        let grid = Subspace::grid1d(e1, 0.0, 1.0, 1e-3).unwrap();
        let a = Point::coords([0.5]);
        let pts = grid.shell_sample(&a, 0.1, 0.05, 1000, 5).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert!(((p.ambient[0] - 0.5).abs() - 0.1).abs() <= 0.005 + 1e-12);
        }
    }

    #[test]
    fn rotation_body_shell_reaches_surface() {
        let body = Subspace::from_chart(e3(), Chart::rotation_body(0.5, 1.0).unwrap()).unwrap();
        let a = Point::coords([0.0, 0.0, 0.0]);
        let t = 0.01;
        let pts = body.shell_sample(&a, t, 0.05, 256, 9).unwrap();
        assert!(pts.len() > 10);
        // the farthest point from the axis should approach x^(3/2)
        let max_rho = pts
            .iter()
            .map(|p| (p.ambient[1] * p.ambient[1] + p.ambient[2] * p.ambient[2]).sqrt())
            .fold(0.0f64, f64::max);
        let expected = t.powf(1.5);
        assert!(
            max_rho > 0.7 * expected && max_rho < 1.3 * expected,
            "max rho {max_rho} vs t^1.5 {expected}"
        );
    }

    #[test]
    fn project_finds_circle_nearest_point() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        let (d, p) = circle.project(&[2.0, 0.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        assert!(euclid(&p, &[1.0, 0.0]) < 1e-6);
    }

    #[test]
    fn membership_tolerates_only_near_points() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        assert!(circle.membership(&Point::coords([0.0, 1.0]), 1e-9).unwrap());
        assert!(!circle.membership(&Point::coords([0.0, 1.5]), 1e-3).unwrap());
    }

    #[test]
    fn nearest_among_refines_to_true_line_distance() {
        let line = Subspace::from_chart(
            e2(),
            Chart::line(vec![1.0, 0.0], vec![0.0, 1.0], 4.0).unwrap(),
        )
        .unwrap();
        let a = Point::coords([1.0, 0.0]);
        let targets = line.ball_sample(&a, 0.3, 512, 11).unwrap();
        // z on the unit circle at angle whose chord distance from (1,0) is 0.1
        let theta = 2.0 * (0.05f64).asin();
        let z = vec![theta.cos(), theta.sin()];
        let (d, _) = line.nearest_among(&z, &targets, 1e-16).unwrap();
        let exact = 1.0 - theta.cos();
        assert!((d - exact).abs() < 1e-10, "refined {d} vs exact {exact}");
    }

    #[test]
    fn ball_sample_includes_center_preimage() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        let a = Point::coords([1.0, 0.0]);
        let pts = circle.ball_sample(&a, 0.2, 64, 2).unwrap();
        assert!(pts.iter().any(|p| euclid(&p.ambient, &[1.0, 0.0]) < 1e-9));
        for p in &pts {
            assert!(euclid(&p.ambient, &[1.0, 0.0]) <= 0.2 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn chart_dimension_mismatch_rejected() {
        let err = Subspace::from_chart(e3(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn zero_direction_line_rejected() {
        assert!(Chart::line(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn scale_estimate_tracks_diameter() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        let s = circle.scale_estimate();
        assert!(s > 1.6 && s <= 2.0 + 1e-9, "circle diameter estimate {s}");
    }

    #[test]
    fn param_points_resolve_through_chart() {
        let circle = Subspace::from_chart(e2(), Chart::circle([0.0, 0.0], 1.0).unwrap()).unwrap();
        let p = circle.to_ambient(&Point::Param(vec![0.0])).unwrap();
        assert_eq!(p, Point::coords([1.0, 0.0]));
    }
}
