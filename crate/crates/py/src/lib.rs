//! Python bindings. The pipeline functions mirror the command line one to
//! one: they take the same JSON config files, run the same deterministic
//! code paths, and return the same report documents, so results are
//! byte-identical between the binary and the Python module for equal
//! parameters.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pretangent::cli::{
    self, AnalyzeArgs, DerivativeArgs, GalleryRunArgs, OutputOpts, ScheduleOpts, TangencyArgs,
    ValidateArgs,
};
use pretangent::limits::{self, Tolerances};
use pretangent::space::{MetricSpace, Point};
use pretangent::tangency::{
    DEFAULT_GRID_LEN, DEFAULT_N_SPHERE, DEFAULT_N_TARGET, DEFAULT_RATIO_FLOOR, DEFAULT_SHELL_WIDTH,
    DEFAULT_SLOPE_MARGIN,
};
use pretangent::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_)
        | Error::Config { .. }
        | Error::MetricAxiomViolation(_)
        | Error::InvalidNormalizingSequence(_)
        | Error::SizeLimit(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn output_opts(seed: u64) -> OutputOpts {
    OutputOpts {
        seed,
        ..OutputOpts::default()
    }
}

/// A point argument is either a coordinate list (Euclidean spaces) or an
/// integer index (finite spaces).
#[derive(FromPyObject)]
enum PointArg {
    Index(usize),
    Coords(Vec<f64>),
}

impl PointArg {
    fn build(self) -> Point {
        match self {
            PointArg::Index(i) => Point::Index(i),
            PointArg::Coords(v) => Point::coords(v),
        }
    }
}

/// Handle to a metric space: Euclidean of a given dimension, or a finite
/// space given by its distance matrix.
#[pyclass(frozen)]
struct Space {
    inner: MetricSpace,
}

#[pymethods]
impl Space {
    #[staticmethod]
    fn euclidean(dim: usize) -> PyResult<Self> {
        Ok(Space {
            inner: MetricSpace::euclidean(dim).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn finite(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Space {
            inner: MetricSpace::finite(matrix).map_err(to_py_err)?,
        })
    }

    /// Distance between two points, given as coordinate lists or indices.
    fn dist(&self, a: PointArg, b: PointArg) -> PyResult<f64> {
        self.inner.dist(&a.build(), &b.build()).map_err(to_py_err)
    }

    /// Randomized symmetry and triangle checks; True when all sampled
    /// triples pass.
    #[pyo3(signature = (samples = 200, seed = 0))]
    fn validate(&self, samples: usize, seed: u64) -> PyResult<bool> {
        Ok(
            pretangent::space::validate_metric(&self.inner, samples, seed)
                .map_err(to_py_err)?
                .pass,
        )
    }

    fn __repr__(&self) -> String {
        match (self.inner.dim(), self.inner.cardinality()) {
            (Some(d), _) => format!("Space.euclidean({d})"),
            (None, Some(n)) => format!("Space.finite(<{n} points>)"),
            (None, None) => "Space(<oracle>)".into(),
        }
    }
}

/// Classifies the tail of a sample sequence. Returns a dict with keys
/// "status" ("Converged", "Diverged", "Oscillating" or "Inconclusive"),
/// "value" (the limit, or None), "error_estimate", "accelerated", and
/// "clusters" (accumulation values when oscillating).
#[pyfunction]
#[pyo3(signature = (samples, rel_tol = None, abs_tol = None))]
fn estimate_limit(
    py: Python<'_>,
    samples: Vec<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
) -> PyResult<Py<PyDict>> {
    let tol = Tolerances::default();
    let verdict = limits::estimate_limit(
        &samples,
        rel_tol.unwrap_or(tol.rel),
        abs_tol.unwrap_or(tol.abs),
    )
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("status", format!("{:?}", verdict.status))?;
    d.set_item("value", verdict.value)?;
    d.set_item("error_estimate", verdict.error_estimate)?;
    d.set_item("accelerated", verdict.accelerated)?;
    d.set_item("clusters", verdict.clusters)?;
    Ok(d.into())
}

/// Builds a stable family from config files and returns the full JSON
/// report: pairwise limit matrix, metric identification, and subsequence
/// probes. Arguments are paths to the same JSON configs the command line
/// takes.
#[pyfunction]
#[pyo3(signature = (space, sequences, norm, *, zero_tol = None, seed = 0))]
fn analyze(
    space: &str,
    sequences: &str,
    norm: &str,
    zero_tol: Option<f64>,
    seed: u64,
) -> PyResult<String> {
    let args = AnalyzeArgs {
        space: space.into(),
        sequences: sequences.into(),
        norm: norm.into(),
        zero_tol,
        schedule: ScheduleOpts::default(),
        output: output_opts(seed),
    };
    Ok(cli::run_analyze(&args).map_err(to_py_err)?.report.to_json())
}

/// Checks differentiability of a lifted map between two stable families and
/// constructs the quotient-level derivative. `g` and `mid` together add a
/// chain-rule verification for the composition. Returns the JSON report.
#[pyfunction]
#[pyo3(signature = (f, src, tgt, *, g = None, mid = None, zero_tol = None, seed = 0))]
fn derivative(
    f: &str,
    src: &str,
    tgt: &str,
    g: Option<&str>,
    mid: Option<&str>,
    zero_tol: Option<f64>,
    seed: u64,
) -> PyResult<String> {
    if g.is_some() != mid.is_some() {
        return Err(PyValueError::new_err(
            "g and mid must be given together: g maps the middle family on",
        ));
    }
    let args = DerivativeArgs {
        f: f.into(),
        src: src.into(),
        tgt: tgt.into(),
        g: g.map(Into::into),
        mid: mid.map(Into::into),
        zero_tol,
        schedule: ScheduleOpts::default(),
        output: output_opts(seed),
    };
    Ok(cli::run_derivative(&args)
        .map_err(to_py_err)?
        .report
        .to_json())
}

/// Runs the sup-inf deviation profile of subspace `sub_z` against `sub_y`
/// at `point` and decides strong tangency. Returns a pair: the JSON report
/// and the profile CSV.
#[pyfunction]
#[pyo3(signature = (
    space, sub_y, sub_z, point, *,
    t0 = None,
    grid_len = DEFAULT_GRID_LEN,
    shell_width = DEFAULT_SHELL_WIDTH,
    n_sphere = DEFAULT_N_SPHERE,
    n_target = DEFAULT_N_TARGET,
    slope_margin = DEFAULT_SLOPE_MARGIN,
    ratio_floor = DEFAULT_RATIO_FLOOR,
    seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn tangency(
    space: &str,
    sub_y: &str,
    sub_z: &str,
    point: &str,
    t0: Option<f64>,
    grid_len: usize,
    shell_width: f64,
    n_sphere: usize,
    n_target: usize,
    slope_margin: f64,
    ratio_floor: f64,
    seed: u64,
) -> PyResult<(String, String)> {
    let args = TangencyArgs {
        space: space.into(),
        sub_y: sub_y.into(),
        sub_z: sub_z.into(),
        point: point.into(),
        t0,
        grid_len,
        shell_width,
        n_sphere,
        n_target,
        slope_margin,
        ratio_floor,
        csv: None,
        output: output_opts(seed),
    };
    let out = cli::run_tangency(&args).map_err(to_py_err)?;
    Ok((out.report.to_json(), out.csv.unwrap_or_default()))
}

/// Runs one named scenario ("curve", "graphs", "between", "rotation",
/// "surface", "cone") or "all". Returns a pair: the JSON report and the
/// scenario summary CSV.
#[pyfunction]
#[pyo3(signature = (
    id, *,
    alpha = 0.5,
    t0 = None,
    grid_len = None,
    n_sphere = None,
    n_target = None,
    seed = 0,
))]
fn gallery(
    id: &str,
    alpha: f64,
    t0: Option<f64>,
    grid_len: Option<usize>,
    n_sphere: Option<usize>,
    n_target: Option<usize>,
    seed: u64,
) -> PyResult<(String, String)> {
    let args = GalleryRunArgs {
        id: id.into(),
        alpha,
        t0,
        grid_len,
        n_sphere,
        n_target,
        csv: None,
        output: output_opts(seed),
    };
    let out = cli::run_gallery(&args).map_err(to_py_err)?;
    Ok((out.report.to_json(), out.csv.unwrap_or_default()))
}

/// Randomized metric-axiom check of a space config file. Returns the JSON
/// report.
#[pyfunction]
#[pyo3(signature = (space, *, samples = 200, seed = 0))]
fn validate(space: &str, samples: usize, seed: u64) -> PyResult<String> {
    let args = ValidateArgs {
        space: space.into(),
        samples,
        output: output_opts(seed),
    };
    Ok(cli::run_validate(&args)
        .map_err(to_py_err)?
        .report
        .to_json())
}

#[pymodule]
fn pretangent_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Space>()?;
    m.add_function(wrap_pyfunction!(estimate_limit, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(derivative, m)?)?;
    m.add_function(wrap_pyfunction!(tangency, m)?)?;
    m.add_function(wrap_pyfunction!(gallery, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
