//! Metric space handles and points.
//!
//! Two concrete distance backends are provided: Euclidean coordinate space
//! and finite spaces given by an explicit distance matrix. Parametrized
//! subsets (curves, surfaces, solids) live in [`crate::chart`] and defer to
//! the ambient Euclidean handle for distances.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in one of the supported space backends.
///
/// `Param` points carry chart parameters and are only meaningful relative to
/// a subspace; they must be resolved to ambient coordinates (see
/// [`crate::chart::Subspace::to_ambient`]) before distancing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Coords(Vec<f64>),
    Index(usize),
    Param(Vec<f64>),
}

impl Point {
    pub fn coords(v: impl Into<Vec<f64>>) -> Self {
        Point::Coords(v.into())
    }

    pub fn as_coords(&self) -> Result<&[f64]> {
        match self {
            Point::Coords(c) => Ok(c),
            other => Err(Error::InvalidArgument(format!(
                "expected coordinate point, got {other}"
            ))),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Point::Coords(c) | Point::Param(c) => c.iter().all(|x| x.is_finite()),
            Point::Index(_) => true,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Coords(c) => {
                write!(f, "(")?;
                for (i, x) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Point::Index(i) => write!(f, "#{i}"),
            Point::Param(u) => {
                write!(f, "param(")?;
                for (i, x) in u.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Euclidean { dim: usize },
    Finite { matrix: Arc<Vec<Vec<f64>>> },
}

/// Handle to a metric space: a distance oracle plus an optional sampler.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    backend: Backend,
    has_sampler: bool,
    label: String,
}

/// Relative tolerance for the triangle inequality on exact backends.
pub const TRIANGLE_REL_TOL: f64 = 1e-12;

impl MetricSpace {
    /// Euclidean R^dim with the standard norm distance.
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "euclidean space needs dimension >= 1".into(),
            ));
        }
        Ok(MetricSpace {
            backend: Backend::Euclidean { dim },
            has_sampler: true,
            label: format!("R^{dim}"),
        })
    }

    /// Finite space from an explicit distance matrix. Checks all metric
    /// axioms eagerly and names the offending pair or triple on failure.
    pub fn finite(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty distance matrix".into()));
        }
        let mut scale: f64 = 0.0;
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "distance matrix row {i} has length {} (want {n})",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::MetricAxiomViolation(format!(
                        "d({i},{j}) = {v} is not a nonnegative finite real"
                    )));
                }
                scale = scale.max(v);
            }
        }
        for i in 0..n {
            if matrix[i][i] != 0.0 {
                return Err(Error::MetricAxiomViolation(format!(
                    "d({i},{i}) = {} on the diagonal",
                    matrix[i][i]
                )));
            }
            for j in 0..i {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::MetricAxiomViolation(format!(
                        "asymmetry: d({i},{j}) = {} but d({j},{i}) = {}",
                        matrix[i][j], matrix[j][i]
                    )));
                }
                if i != j && matrix[i][j] == 0.0 {
                    return Err(Error::MetricAxiomViolation(format!(
                        "d({i},{j}) = 0 for distinct points"
                    )));
                }
            }
        }
        let tol = TRIANGLE_REL_TOL * scale;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if matrix[i][k] > matrix[i][j] + matrix[j][k] + tol {
                        return Err(Error::MetricAxiomViolation(format!(
                            "triangle inequality fails on ({i},{j},{k}): \
                             d({i},{k}) = {} > {} + {}",
                            matrix[i][k], matrix[i][j], matrix[j][k]
                        )));
                    }
                }
            }
        }
        Ok(MetricSpace {
            backend: Backend::Finite {
                matrix: Arc::new(matrix),
            },
            has_sampler: true,
            label: format!("finite({n})"),
        })
    }

    /// Finite space without axiom checks. Exists so `validate_metric` has
    /// something to catch; ordinary construction goes through [`finite`].
    ///
    /// [`finite`]: MetricSpace::finite
    pub fn finite_unchecked(matrix: Vec<Vec<f64>>) -> Self {
        let n = matrix.len();
        MetricSpace {
            backend: Backend::Finite {
                matrix: Arc::new(matrix),
            },
            has_sampler: true,
            label: format!("finite({n})"),
        }
    }

    /// Same space with the sampler capability removed.
    pub fn without_sampler(mut self) -> Self {
        self.has_sampler = false;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.backend {
            Backend::Euclidean { dim } => Some(*dim),
            Backend::Finite { .. } => None,
        }
    }

    pub fn is_finite_space(&self) -> bool {
        matches!(self.backend, Backend::Finite { .. })
    }

    /// Number of points for finite backends.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.backend {
            Backend::Finite { matrix } => Some(matrix.len()),
            Backend::Euclidean { .. } => None,
        }
    }

    /// Distance between two points. `Param` points are rejected here; they
    /// must be resolved through their subspace chart first.
    pub fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        match (&self.backend, p, q) {
            (Backend::Euclidean { dim }, Point::Coords(a), Point::Coords(b)) => {
                if a.len() != *dim || b.len() != *dim {
                    return Err(Error::InvalidArgument(format!(
                        "dimension mismatch: {} and {} in R^{dim}",
                        a.len(),
                        b.len()
                    )));
                }
                Ok(euclid(a, b))
            }
            (Backend::Finite { matrix }, Point::Index(i), Point::Index(j)) => {
                let n = matrix.len();
                if *i >= n || *j >= n {
                    return Err(Error::InvalidArgument(format!(
                        "index out of range: {i}, {j} in finite({n})"
                    )));
                }
                Ok(matrix[*i][*j])
            }
            (_, Point::Param(_), _) | (_, _, Point::Param(_)) => Err(Error::CapabilityMissing(
                "param point needs a subspace chart to resolve".into(),
            )),
            _ => Err(Error::InvalidArgument(format!(
                "point kind does not match space {}: {p}, {q}",
                self.label
            ))),
        }
    }

    /// Uniform samples from a coordinate box (Euclidean) or the full point
    /// roster (finite). Deterministic given the seed.
    pub fn sample(&self, sample_box: &[(f64, f64)], count: usize, seed: u64) -> Result<Vec<Point>> {
        if !self.has_sampler {
            return Err(Error::CapabilityMissing(format!(
                "space {} has no sampler",
                self.label
            )));
        }
        match &self.backend {
            Backend::Euclidean { dim } => {
                if sample_box.len() != *dim {
                    return Err(Error::InvalidArgument(format!(
                        "sample box rank {} does not match dimension {dim}",
                        sample_box.len()
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count)
                    .map(|_| {
                        Point::Coords(
                            sample_box
                                .iter()
                                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                                .collect(),
                        )
                    })
                    .collect())
            }
            Backend::Finite { matrix } => {
                let n = matrix.len();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count)
                    .map(|_| Point::Index(rng.random_range(0..n)))
                    .collect())
            }
        }
    }

    /// Default sampling box used when the caller has no better region.
    pub fn default_box(&self) -> Vec<(f64, f64)> {
        match &self.backend {
            Backend::Euclidean { dim } => vec![(-1.0, 1.0); *dim],
            Backend::Finite { .. } => Vec::new(),
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Outcome of randomized metric-axiom checks on a space handle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples_checked: usize,
    pub worst_symmetry_defect: f64,
    /// max over sampled triples of d(x,z) - d(x,y) - d(y,z), normalized by
    /// the largest sampled distance.
    pub worst_triangle_defect: f64,
    pub pass: bool,
    pub witness: Option<String>,
}

/// Randomized check of symmetry and the triangle inequality on sampled
/// triples. Finite spaces are checked exhaustively when small enough.
pub fn validate_metric(space: &MetricSpace, samples: usize, seed: u64) -> Result<ValidationReport> {
    let pts: Vec<Point> = match space.cardinality() {
        Some(n) if n * n * n <= samples.max(1) * 3 => (0..n).map(Point::Index).collect(),
        _ => space.sample(&space.default_box(), samples.max(3), seed)?,
    };
    let n = pts.len();
    if n == 0 {
        return Err(Error::InsufficientData("no sample points".into()));
    }
    let mut scale: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    let mut worst_tri = f64::NEG_INFINITY;
    let mut witness = None;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::numerics::derive_seed(seed, "triples", 0));
    let triples: Vec<(usize, usize, usize)> = if space.cardinality().is_some_and(|c| pts.len() == c)
    {
        let mut all = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    all.push((i, j, k));
                }
            }
        }
        all
    } else {
        (0..samples)
            .map(|_| {
                (
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                )
            })
            .collect()
    };
    for &(i, j, k) in &triples {
        let dij = space.dist(&pts[i], &pts[j])?;
        let dji = space.dist(&pts[j], &pts[i])?;
        let djk = space.dist(&pts[j], &pts[k])?;
        let dik = space.dist(&pts[i], &pts[k])?;
        scale = scale.max(dij).max(djk).max(dik);
        worst_sym = worst_sym.max((dij - dji).abs());
        let defect = dik - dij - djk;
        if defect > worst_tri {
            worst_tri = defect;
            if defect > 0.0 {
                witness = Some(format!(
                    "triple ({}, {}, {}): d = {dik} > {dij} + {djk}",
                    pts[i], pts[j], pts[k]
                ));
            }
        }
    }
    let tol = TRIANGLE_REL_TOL * scale.max(1e-300);
    let normalized_tri = if scale > 0.0 { worst_tri / scale } else { 0.0 };
    let pass = worst_sym <= tol && worst_tri <= tol;
    Ok(ValidationReport {
        samples_checked: triples.len(),
        worst_symmetry_defect: worst_sym,
        worst_triangle_defect: normalized_tri.max(0.0),
        pass,
        witness: if pass { None } else { witness },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_distances_match_hand_values() {
        let e2 = MetricSpace::euclidean(2).unwrap();
        let d = e2
            .dist(&Point::coords([0.0, 0.0]), &Point::coords([3.0, 4.0]))
            .unwrap();
        assert_eq!(d, 5.0);
        let p = Point::coords([0.3, -0.7]);
        assert_eq!(e2.dist(&p, &p).unwrap(), 0.0);
        let d2 = e2
            .dist(&Point::coords([1.0, 0.0]), &Point::coords([0.0, 1.0]))
            .unwrap();
        assert!((d2 - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            MetricSpace::euclidean(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn finite_space_reads_matrix() {
        let m = MetricSpace::finite(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.dist(&Point::Index(0), &Point::Index(1)).unwrap(), 1.0);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let err = MetricSpace::finite(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::MetricAxiomViolation(_)));
        assert!(err.to_string().contains("asymmetry"));
    }

    #[test]
    fn triangle_violation_names_triple() {
        let err = MetricSpace::finite(vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ])
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("triangle"));
        assert!(msg.contains("(0,1,2)"));
    }

    #[test]
    fn mixed_point_kinds_rejected() {
        let e1 = MetricSpace::euclidean(1).unwrap();
        assert!(e1.dist(&Point::coords([0.0]), &Point::Index(1)).is_err());
    }

    #[test]
    fn param_points_need_chart_context() {
        let e1 = MetricSpace::euclidean(1).unwrap();
        let err = e1
            .dist(&Point::Param(vec![0.0]), &Point::coords([0.0]))
            .unwrap_err();
        assert!(matches!(err, Error::CapabilityMissing(_)));
    }

    #[test]
    fn validate_passes_euclidean_samples() {
        let e3 = MetricSpace::euclidean(3).unwrap();
        let report = validate_metric(&e3, 1000, 7).unwrap();
        assert!(report.pass);
        assert!(report.worst_triangle_defect <= TRIANGLE_REL_TOL);
    }

    #[test]
    fn validate_catches_bad_matrix() {
        let bad = MetricSpace::finite_unchecked(vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ]);
        let report = validate_metric(&bad, 1000, 0).unwrap();
        assert!(!report.pass);
        assert!(report.witness.is_some());
    }

    #[test]
    fn one_point_space_passes_vacuously() {
        let one = MetricSpace::finite(vec![vec![0.0]]).unwrap();
        let report = validate_metric(&one, 100, 0).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn sampler_capability_can_be_absent() {
        let e2 = MetricSpace::euclidean(2).unwrap().without_sampler();
        let err = e2.sample(&e2.default_box(), 10, 0).unwrap_err();
        assert!(matches!(err, Error::CapabilityMissing(_)));
    }
}
