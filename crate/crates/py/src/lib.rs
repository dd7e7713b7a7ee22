use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use tomo_core::packing::{render as render_packing, validate_packing};
use tomo_core::reduction::{certificate_for_tile, lift_solution, project_solution, reduce as reduce_instance};
use tomo_core::tile::{catalog as tile_catalog, catalog_non_bar};
use tomo_core::{solver, verify};
use tomo_core::{
    Cell, ColorMatrix, GridDims, Mode, Packing, ProjectionPair, ReductionCertificate, SearchLimits,
    ThreeColorInstance, TptpInstance, Vector2,
};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn cells(positions: Vec<[i64; 2]>) -> Vec<Cell> {
    positions.into_iter().map(|[i, j]| Cell::new(i, j)).collect()
}

fn limits(max_nodes: Option<u64>, max_solutions: Option<u64>, timeout_secs: Option<f64>, jobs: usize) -> PyResult<SearchLimits> {
    let mut l = SearchLimits::default().with_jobs(jobs);
    if let Some(n) = max_nodes {
        l.max_nodes = n;
    }
    if let Some(n) = max_solutions {
        l.max_solutions = n;
    }
    l.timeout = timeout_secs
        .map(std::time::Duration::try_from_secs_f64)
        .transpose()
        .map_err(err)?;
    Ok(l)
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// A connected polyomino in canonical position.
#[pyclass(name = "Tile", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyTile {
    inner: tomo_core::Tile,
}

#[pymethods]
impl PyTile {
    #[new]
    fn new(cells: Vec<[i64; 2]>) -> PyResult<Self> {
        let inner = tomo_core::Tile::new(self::cells(cells)).map_err(err)?;
        Ok(PyTile { inner })
    }

    #[getter]
    fn cells(&self) -> Vec<(i64, i64)> {
        self.inner.cells().iter().map(|&c| c.into()).collect()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn is_bar(&self) -> bool {
        self.inner.is_bar()
    }

    fn is_conflicting(&self, di: i64, dj: i64) -> bool {
        self.inner.is_conflicting(Vector2::new(di, dj))
    }

    fn conflict_vectors(&self) -> Vec<(i64, i64)> {
        self.inner.conflict_profile().vectors().into_iter().map(Into::into).collect()
    }

    fn picture(&self) -> String {
        self.inner.picture()
    }

    fn __repr__(&self) -> String {
        format!("Tile({:?})", self.cells())
    }
}

#[pyfunction]
fn classify<'py>(py: Python<'py>, tile: &PyTile) -> PyResult<Bound<'py, PyAny>> {
    let c = tomo_core::reduction::classify(&tile.inner).map_err(err)?;
    let value = serde_json::json!({
        "case": c.case,
        "p": c.p,
        "q": c.q,
        "a": c.a,
        "b": c.b,
        "transform": c.transform,
        "normalized": c.normalized,
    });
    to_py(py, &value)
}

#[pyfunction]
fn gadget<'py>(py: Python<'py>, tile: &PyTile) -> PyResult<Bound<'py, PyAny>> {
    let cert = certificate_for_tile(&tile.inner).map_err(err)?;
    to_py(py, &cert.gadget)
}

#[pyfunction]
fn projections(m: usize, n: usize, positions: Vec<[i64; 2]>) -> PyResult<(Vec<u64>, Vec<u64>)> {
    let dims = GridDims::new(m, n).map_err(err)?;
    let p = tomo_core::packing::projections(dims, &cells(positions));
    Ok((p.r, p.s))
}

#[pyfunction]
fn validate<'py>(py: Python<'py>, tile: &PyTile, m: usize, n: usize, positions: Vec<[i64; 2]>) -> PyResult<Bound<'py, PyAny>> {
    let dims = GridDims::new(m, n).map_err(err)?;
    to_py(py, &validate_packing(&tile.inner, dims, &cells(positions)))
}

#[pyfunction]
fn render(tile: &PyTile, m: usize, n: usize, positions: Vec<[i64; 2]>) -> PyResult<String> {
    let dims = GridDims::new(m, n).map_err(err)?;
    Ok(render_packing(&tile.inner, dims, &cells(positions)))
}

#[pyfunction]
#[pyo3(signature = (tile, r, s, mode = "find", max_nodes = None, max_solutions = None, timeout_secs = None, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn solve_tptp<'py>(
    py: Python<'py>,
    tile: &PyTile,
    r: Vec<u64>,
    s: Vec<u64>,
    mode: &str,
    max_nodes: Option<u64>,
    max_solutions: Option<u64>,
    timeout_secs: Option<f64>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let dims = GridDims::new(r.len(), s.len()).map_err(err)?;
    let inst = TptpInstance::new(tile.inner.clone(), dims, ProjectionPair { r, s }).map_err(err)?;
    let mode = parse_mode(mode)?;
    let lim = limits(max_nodes, max_solutions, timeout_secs, jobs)?;
    let res = py.detach(|| solver::solve_tptp(&inst, mode, lim));
    to_py(py, &res)
}

/// `instance` is a dict with keys `m`, `n`, `rows` and `cols`, the latter
/// two mapping `R`, `G`, `B` to count lists.
#[pyfunction]
#[pyo3(signature = (instance, mode = "find", max_nodes = None, max_solutions = None, timeout_secs = None))]
fn solve_3ctp<'py>(
    py: Python<'py>,
    instance: &Bound<'py, PyAny>,
    mode: &str,
    max_nodes: Option<u64>,
    max_solutions: Option<u64>,
    timeout_secs: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let inst: ThreeColorInstance = from_py(instance)?;
    let mode = parse_mode(mode)?;
    let lim = limits(max_nodes, max_solutions, timeout_secs, 1)?;
    let res = py.detach(|| solver::solve_3ctp(&inst, mode, lim));
    to_py(py, &res)
}

/// Projections of a 3-color matrix given as strings such as `["RG", "GB"]`.
#[pyfunction]
fn color_projections<'py>(py: Python<'py>, matrix: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let mtx = ColorMatrix::try_from(matrix).map_err(err)?;
    to_py(py, &mtx.projections())
}

/// Returns the packing instance and the certificate, both as dicts.
#[pyfunction]
fn reduce<'py>(py: Python<'py>, instance: &Bound<'py, PyAny>, tile: &PyTile) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let inst: ThreeColorInstance = from_py(instance)?;
    let (out, cert) = reduce_instance(&inst, &tile.inner).map_err(err)?;
    Ok((to_py(py, &out)?, to_py(py, &cert)?))
}

#[pyfunction]
fn lift<'py>(py: Python<'py>, matrix: Vec<String>, certificate: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let mtx = ColorMatrix::try_from(matrix).map_err(err)?;
    let cert: ReductionCertificate = from_py(certificate)?;
    to_py(py, &lift_solution(&mtx, &cert).map_err(err)?)
}

#[pyfunction]
fn project(packing: &Bound<'_, PyAny>, certificate: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
    let packing: Packing = from_py(packing)?;
    let cert: ReductionCertificate = from_py(certificate)?;
    Ok(project_solution(&packing, &cert).map_err(err)?.into())
}

/// A 0/1 matrix with the given row and column sums, if one exists.
#[pyfunction]
fn ryser(r: Vec<u64>, s: Vec<u64>) -> Option<Vec<Vec<u8>>> {
    solver::ryser_single_cell(&r, &s)
}

#[pyfunction]
fn xi(tile: &PyTile, m: usize, n: usize, rows: Vec<usize>, cols: Vec<usize>) -> PyResult<u64> {
    let dims = GridDims::new(m, n).map_err(err)?;
    for &i in &rows {
        if i >= m {
            return Err(err(tomo_core::Error::IndexOutOfRange { index: i, len: m }));
        }
    }
    for &j in &cols {
        if j >= n {
            return Err(err(tomo_core::Error::IndexOutOfRange { index: j, len: n }));
        }
    }
    Ok(solver::xi(&tile.inner, dims, &rows, &cols))
}

#[pyfunction]
fn check_requirement1(tile: &PyTile) -> PyResult<bool> {
    let cert = certificate_for_tile(&tile.inner).map_err(err)?;
    Ok(verify::check_requirement1(&cert.gadget))
}

#[pyfunction]
#[pyo3(signature = (instance, tile, max_nodes = None))]
fn check_requirement2<'py>(
    py: Python<'py>,
    instance: &Bound<'py, PyAny>,
    tile: &PyTile,
    max_nodes: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let inst: ThreeColorInstance = from_py(instance)?;
    let (out, cert) = reduce_instance(&inst, &tile.inner).map_err(err)?;
    let lim = limits(max_nodes, None, None, 1)?;
    let report = py.detach(|| verify::check_requirement2(&out, &cert, lim)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (tile, r, s, rows, cols, max_nodes = None))]
fn check_ryser_lemma<'py>(
    py: Python<'py>,
    tile: &PyTile,
    r: Vec<u64>,
    s: Vec<u64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    max_nodes: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let dims = GridDims::new(r.len(), s.len()).map_err(err)?;
    let inst = TptpInstance::new(tile.inner.clone(), dims, ProjectionPair { r, s }).map_err(err)?;
    let lim = limits(max_nodes, None, None, 1)?;
    let report = py.detach(|| verify::check_ryser_lemma(&inst, &rows, &cols, lim)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (instance, tile, max_nodes = None))]
fn check_equisat<'py>(
    py: Python<'py>,
    instance: &Bound<'py, PyAny>,
    tile: &PyTile,
    max_nodes: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let inst: ThreeColorInstance = from_py(instance)?;
    let lim = limits(max_nodes, None, None, 1)?;
    let report = py.detach(|| verify::check_equisat(&inst, &tile.inner, lim)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (max_h = 3, max_w = 3, bars = false))]
fn catalog(max_h: usize, max_w: usize, bars: bool) -> Vec<PyTile> {
    let tiles = if bars { tile_catalog(max_h, max_w) } else { catalog_non_bar(max_h, max_w) };
    tiles.into_iter().map(|inner| PyTile { inner }).collect()
}

#[pymodule]
fn tomo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTile>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(gadget, m)?)?;
    m.add_function(wrap_pyfunction!(projections, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tptp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_3ctp, m)?)?;
    m.add_function(wrap_pyfunction!(color_projections, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(lift, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(ryser, m)?)?;
    m.add_function(wrap_pyfunction!(xi, m)?)?;
    m.add_function(wrap_pyfunction!(check_requirement1, m)?)?;
    m.add_function(wrap_pyfunction!(check_requirement2, m)?)?;
    m.add_function(wrap_pyfunction!(check_ryser_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(check_equisat, m)?)?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    Ok(())
}
