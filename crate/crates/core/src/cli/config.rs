//! JSON configuration schemas for the command-line front end.
//!
//! Every schema rejects unknown keys, so a typo in a config file fails with
//! a pointed message instead of silently falling back to a default.

use serde::{Deserialize, Serialize};

use crate::chart::{Chart, Subspace};
use crate::derivative::LiftedMap;
use crate::error::{Error, Result};
use crate::limits::{IndexSchedule, Tolerances};
use crate::pretangent::{build_family, Rejection, StableFamily};
use crate::sequences::{NormalizingSequence, PointSequence};
use crate::space::{MetricSpace, Point};

/// Reads and parses a JSON config file, naming the path in every failure.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_string(),
        detail: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        path: path.to_string(),
        detail: e.to_string(),
    })
}

/// Metric space description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Euclidean { dim: usize },
    Finite { matrix: Vec<Vec<f64>> },
}

impl SpaceConfig {
    pub fn build(&self) -> Result<MetricSpace> {
        match self {
            SpaceConfig::Euclidean { dim } => MetricSpace::euclidean(*dim),
            SpaceConfig::Finite { matrix } => MetricSpace::finite(matrix.clone()),
        }
    }
}

/// A point: coordinate array for Euclidean spaces, index for finite ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Coords(Vec<f64>),
    Index(usize),
}

impl PointSpec {
    pub fn build(&self) -> Point {
        match self {
            PointSpec::Coords(v) => Point::Coords(v.clone()),
            PointSpec::Index(i) => Point::Index(*i),
        }
    }

    fn coords(&self, what: &str) -> Result<&[f64]> {
        match self {
            PointSpec::Coords(v) => Ok(v),
            PointSpec::Index(_) => Err(Error::InvalidArgument(format!(
                "{what} needs a coordinate point, got a finite-space index"
            ))),
        }
    }
}

/// Named sequence built-ins. Radial kinds move toward the family base along
/// a fixed direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceKind {
    /// base + (c / n^p) dir
    Power {
        dir: Vec<f64>,
        c: f64,
        p: f64,
    },
    /// base + c q^n dir
    Geometric {
        dir: Vec<f64>,
        c: f64,
        q: f64,
    },
    Constant {
        point: PointSpec,
    },
    Interleave {
        odd: Box<SequenceKind>,
        even: Box<SequenceKind>,
    },
    /// Explicit values; indices past the table repeat the last entry.
    Table {
        points: Vec<PointSpec>,
    },
}

impl SequenceKind {
    fn build(&self, base: &PointSpec) -> Result<PointSequence> {
        match self {
            SequenceKind::Power { dir, c, p } => {
                let b = base.coords("a radial sequence")?;
                check_dir(b, dir)?;
                Ok(PointSequence::radial_power(b.to_vec(), dir.clone(), *c, *p))
            }
            SequenceKind::Geometric { dir, c, q } => {
                let b = base.coords("a radial sequence")?;
                check_dir(b, dir)?;
                Ok(PointSequence::radial_geometric(
                    b.to_vec(),
                    dir.clone(),
                    *c,
                    *q,
                ))
            }
            SequenceKind::Constant { point } => {
                Ok(PointSequence::constant(point.build(), "constant"))
            }
            SequenceKind::Interleave { odd, even } => Ok(PointSequence::interleave(
                odd.build(base)?,
                even.build(base)?,
            )),
            SequenceKind::Table { points } => {
                PointSequence::tabulated(points.iter().map(PointSpec::build).collect(), "table")
            }
        }
    }
}

fn check_dir(base: &[f64], dir: &[f64]) -> Result<()> {
    if dir.len() != base.len() {
        return Err(Error::InvalidArgument(format!(
            "sequence direction has {} coordinates, base has {}",
            dir.len(),
            base.len()
        )));
    }
    Ok(())
}

/// One candidate sequence with an optional display label.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub seq: SequenceKind,
}

impl SequenceSpec {
    pub fn build(&self, base: &PointSpec) -> Result<PointSequence> {
        let s = self.seq.build(base)?;
        Ok(match &self.label {
            Some(l) => s.with_label(l.clone()),
            None => s,
        })
    }
}

/// Candidate pool for `analyze`: a base point plus named sequences.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequencesConfig {
    pub base: PointSpec,
    pub sequences: Vec<SequenceSpec>,
}

/// Normalizing sequence built-ins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormConfig {
    /// r_n = c / n^p
    Power { c: f64, p: f64 },
    /// r_n = c q^n
    Geometric { c: f64, q: f64 },
}

impl NormConfig {
    pub fn build(&self) -> NormalizingSequence {
        match self {
            NormConfig::Power { c, p } => NormalizingSequence::power(*c, *p),
            NormConfig::Geometric { c, q } => NormalizingSequence::geometric(*c, *q),
        }
    }
}

/// A full stable-family description: space, base point, normalization, and
/// candidate pool. Used by `derivative` for its source and target families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub space: SpaceConfig,
    pub base: PointSpec,
    pub norm: NormConfig,
    pub sequences: Vec<SequenceSpec>,
}

impl FamilyConfig {
    pub fn build(
        &self,
        schedule: &IndexSchedule,
        tol: Tolerances,
    ) -> Result<(StableFamily, Vec<Rejection>)> {
        let space = self.space.build()?;
        let base = self.base.build();
        let candidates = self
            .sequences
            .iter()
            .map(|s| s.build(&self.base))
            .collect::<Result<Vec<_>>>()?;
        build_family(
            &space,
            &base,
            &candidates,
            &self.norm.build(),
            schedule,
            tol,
        )
    }
}

/// Pointed map built-ins for `derivative`. All are maps of the real line
/// fixing 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    /// x -> c x
    Linear { c: f64 },
    /// x -> x^k
    Power { k: i32 },
    /// x -> 1 at 0, else 0
    Indicator,
    /// x -> x sin(1/x)
    XSinInverse,
    Composition {
        outer: Box<MapConfig>,
        inner: Box<MapConfig>,
    },
}

impl MapConfig {
    pub fn build(&self) -> Result<LiftedMap> {
        match self {
            MapConfig::Linear { c } => LiftedMap::linear(*c),
            MapConfig::Power { k } => LiftedMap::monomial(*k),
            MapConfig::Indicator => LiftedMap::indicator_at_zero(),
            MapConfig::XSinInverse => LiftedMap::x_sin_inverse(),
            MapConfig::Composition { outer, inner } => {
                LiftedMap::compose(&outer.build()?, &inner.build()?)
            }
        }
    }
}

/// Subspace description for `tangency`, built inside a Euclidean parent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubspaceConfig {
    /// The parent space itself.
    Whole,
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Line {
        point: Vec<f64>,
        dir: Vec<f64>,
        span: f64,
    },
    Ray {
        point: Vec<f64>,
        dir: Vec<f64>,
        span: f64,
    },
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Plane {
        point: Vec<f64>,
        d1: Vec<f64>,
        d2: Vec<f64>,
        span: f64,
    },
    /// Polynomial graph (x, f(x)) over [lo, hi], coefficients low order
    /// first.
    Graph {
        coeffs: Vec<f64>,
        lo: f64,
        hi: f64,
    },
    /// Region between two polynomial graphs over [lo, hi].
    BetweenGraphs {
        f1: Vec<f64>,
        f2: Vec<f64>,
        lo: f64,
        hi: f64,
    },
    /// Solid of revolution of x^alpha around the x axis, 0 <= x <= x_max.
    RotationBody {
        alpha: f64,
        x_max: f64,
    },
    Paraboloid {
        span: f64,
    },
    SpherePatch {
        span: f64,
    },
    Cone {
        span: f64,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
    /// Regular 1-D grid with the given mesh, embedded on the first axis.
    Grid {
        lo: f64,
        hi: f64,
        mesh: f64,
    },
}

impl SubspaceConfig {
    pub fn build(&self, parent: &MetricSpace) -> Result<Subspace> {
        let p = parent.clone();
        match self {
            SubspaceConfig::Whole => Ok(Subspace::whole(p)),
            SubspaceConfig::Circle { center, radius } => {
                Subspace::from_chart(p, Chart::circle(*center, *radius)?)
            }
            SubspaceConfig::Line { point, dir, span } => {
                Subspace::from_chart(p, Chart::line(point.clone(), dir.clone(), *span)?)
            }
            SubspaceConfig::Ray { point, dir, span } => {
                Subspace::from_chart(p, Chart::ray(point.clone(), dir.clone(), *span)?)
            }
            SubspaceConfig::Segment { a, b } => {
                Subspace::from_chart(p, Chart::segment(a.clone(), b.clone())?)
            }
            SubspaceConfig::Plane {
                point,
                d1,
                d2,
                span,
            } => Subspace::from_chart(
                p,
                Chart::plane(point.clone(), d1.clone(), d2.clone(), *span)?,
            ),
            SubspaceConfig::Graph { coeffs, lo, hi } => {
                Subspace::from_chart(p, Chart::graph(coeffs.clone(), *lo, *hi)?)
            }
            SubspaceConfig::BetweenGraphs { f1, f2, lo, hi } => {
                Subspace::from_chart(p, Chart::between_graphs(f1.clone(), f2.clone(), *lo, *hi)?)
            }
            SubspaceConfig::RotationBody { alpha, x_max } => {
                Subspace::from_chart(p, Chart::rotation_body(*alpha, *x_max)?)
            }
            SubspaceConfig::Paraboloid { span } => {
                Subspace::from_chart(p, Chart::paraboloid(*span)?)
            }
            SubspaceConfig::SpherePatch { span } => {
                Subspace::from_chart(p, Chart::sphere_patch(*span)?)
            }
            SubspaceConfig::Cone { span } => Subspace::from_chart(p, Chart::cone(*span)?),
            SubspaceConfig::Points { points } => Subspace::from_points(p, points.clone()),
            SubspaceConfig::Grid { lo, hi, mesh } => Subspace::grid1d(p, *lo, *hi, *mesh),
        }
    }
}
