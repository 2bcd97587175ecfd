//! Python bindings: graph Laplacians, hierarchies and the adaptive solvers.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pcamg::adaptive::{self, AdaptiveConfig, SolveReport};
use pcamg::coarsening;
use pcamg::graph_io::{self, EdgeList, RhsKind};
use pcamg::multigrid::{self, CycleParams};
use pcamg::sparse::{self, SparseMatrix};

create_exception!(pcamg_py, PcamgError, PyException);

fn to_py(e: pcamg::Error) -> PyErr {
    PcamgError::new_err(e.to_string())
}

/// Weighted graph Laplacian in CSR form.
#[pyclass(name = "Laplacian", module = "pcamg_py", frozen)]
struct PyLaplacian {
    inner: Arc<SparseMatrix>,
}

#[pymethods]
impl PyLaplacian {
    /// Laplacian of an undirected edge list `[(u, v, w), ...]` on `n` vertices,
    /// restricted to its largest connected component.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let raw = EdgeList { n_vertices: n, edges };
        let l = graph_io::preprocess(&raw).map_err(to_py)?;
        Ok(PyLaplacian { inner: Arc::new(l) })
    }

    #[staticmethod]
    fn grid(nx: usize, ny: usize) -> PyResult<Self> {
        let l = graph_io::grid_laplacian(nx, ny).map_err(to_py)?;
        Ok(PyLaplacian { inner: Arc::new(l) })
    }

    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        let l = graph_io::ring_graph(n).map_err(to_py)?;
        Ok(PyLaplacian { inner: Arc::new(l) })
    }

    #[staticmethod]
    fn read_matrix_market(path: &str) -> PyResult<Self> {
        let raw = graph_io::read_matrix_market(path).map_err(to_py)?;
        let l = graph_io::preprocess(&raw).map_err(to_py)?;
        Ok(PyLaplacian { inner: Arc::new(l) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.spmv(&x).map_err(to_py)
    }

    /// `(row_offsets, col_indices, values)`
    fn csr(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        (
            self.inner.row_offsets().to_vec(),
            self.inner.col_indices().to_vec(),
            self.inner.values().to_vec(),
        )
    }

    fn __repr__(&self) -> String {
        format!("Laplacian(n={}, nnz={})", self.inner.n_rows(), self.inner.nnz())
    }
}

/// Multilevel hierarchy built from matching or from a smooth error vector.
#[pyclass(name = "Hierarchy", module = "pcamg_py", frozen)]
struct PyHierarchy {
    inner: multigrid::Hierarchy,
    params: CycleParams,
}

#[pymethods]
impl PyHierarchy {
    #[staticmethod]
    #[pyo3(signature = (laplacian, coarse_size = 100))]
    fn matching(laplacian: &PyLaplacian, coarse_size: usize) -> PyResult<Self> {
        let params = CycleParams {
            coarse_size,
            ..CycleParams::default()
        };
        let inner = multigrid::mwm_setup(Arc::clone(&laplacian.inner), &params).map_err(to_py)?;
        Ok(PyHierarchy { inner, params })
    }

    #[staticmethod]
    #[pyo3(signature = (laplacian, e, coarse_size = 100))]
    fn path_cover(laplacian: &PyLaplacian, e: Vec<f64>, coarse_size: usize) -> PyResult<Self> {
        let params = CycleParams {
            coarse_size,
            ..CycleParams::default()
        };
        let inner = multigrid::pc_setup(Arc::clone(&laplacian.inner), &e, &params).map_err(to_py)?;
        Ok(PyHierarchy { inner, params })
    }

    #[getter]
    fn level_sizes(&self) -> Vec<usize> {
        self.inner.level_sizes()
    }

    #[getter]
    fn operator_complexity(&self) -> f64 {
        self.inner.operator_complexity()
    }

    /// One V-cycle on `A x = b`; returns the updated iterate.
    fn v_cycle(&self, b: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut x = x;
        multigrid::v_cycle(&self.inner, &b, &mut x, &self.params).map_err(to_py)?;
        Ok(x)
    }

    fn w_cycle(&self, b: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut x = x;
        multigrid::w_cycle(&self.inner, &b, &mut x, &self.params).map_err(to_py)?;
        Ok(x)
    }
}

fn report_dict<'py>(py: Python<'py>, r: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iterations", r.iterations)?;
    d.set_item("resetups", r.resetups)?;
    let log: Vec<(usize, f64)> = r.resetup_log.iter().map(|e| (e.iteration, e.trigger)).collect();
    d.set_item("resetup_log", log)?;
    d.set_item("residual_history", r.residual_history.clone())?;
    d.set_item("convr_last10", r.convr_last10)?;
    d.set_item("oc_avg", r.oc_avg)?;
    d.set_item("wall_time", r.wall_time)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

fn config(solver: &str, tol: f64, max_iter: usize, threshold: Option<f64>) -> PyResult<AdaptiveConfig> {
    let mut cfg = match solver {
        "baseline" | "balanced" => AdaptiveConfig::balanced(),
        "every" => AdaptiveConfig::every_step(),
        "homogeneous" => AdaptiveConfig::homogeneous(),
        other => {
            return Err(PcamgError::new_err(format!(
                "unknown solver `{other}` (baseline, every, balanced, homogeneous)"
            )))
        }
    };
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    if let Some(t) = threshold {
        cfg.threshold = t;
    }
    Ok(cfg)
}

/// Solves `L x = b` (with `sum(b) == 0`). Returns `(x, report)`.
#[pyfunction]
#[pyo3(signature = (laplacian, b, solver = "balanced", tol = 1e-8, max_iter = 2500, threshold = None, x0 = None))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    laplacian: &PyLaplacian,
    b: Vec<f64>,
    solver: &str,
    tol: f64,
    max_iter: usize,
    threshold: Option<f64>,
    x0: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = config(solver, tol, max_iter, threshold)?;
    let a = &laplacian.inner;
    let x0 = x0.unwrap_or_else(|| vec![0.0; a.n_rows()]);
    let (x, report) = py
        .detach(|| match solver {
            "baseline" => adaptive::baseline_uaamg(a, &b, &x0, &cfg),
            "homogeneous" => Err(pcamg::Error::InvalidArgument("use solve_homogeneous for b = 0".into())),
            _ => adaptive::solve_general(a, &b, &x0, &cfg),
        })
        .map_err(to_py)?;
    Ok((x, report_dict(py, &report)?))
}

/// Drives `L x = 0` from `x0` towards zero, rebuilding hierarchies on the way.
#[pyfunction]
#[pyo3(signature = (laplacian, x0, tol = 1e-8, max_iter = 2500, threshold = 0.5))]
fn solve_homogeneous<'py>(
    py: Python<'py>,
    laplacian: &PyLaplacian,
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
    threshold: f64,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = config("homogeneous", tol, max_iter, Some(threshold))?;
    let a = &laplacian.inner;
    let (x, report) = py.detach(|| adaptive::solve_homogeneous(a, &x0, &cfg)).map_err(to_py)?;
    Ok((x, report_dict(py, &report)?))
}

/// `kind` is `"lowfreq"`, `"random"` (with `seed`) or `"zero"`.
#[pyfunction]
#[pyo3(signature = (kind, n, seed = 0))]
fn make_rhs(kind: &str, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let kind = match kind {
        "lowfreq" => RhsKind::LowFrequency,
        "random" => RhsKind::ZeroSumRandom(seed),
        "zero" => RhsKind::Zero,
        other => return Err(PcamgError::new_err(format!("unknown rhs kind `{other}`"))),
    };
    graph_io::make_rhs(kind, n).map_err(to_py)
}

/// Greedy path cover of a weighted graph given as `[(u, v, w), ...]`.
#[pyfunction]
fn path_cover(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Vec<Vec<usize>>> {
    let mut t = Vec::with_capacity(2 * edges.len());
    for &(u, v, w) in &edges {
        if u != v {
            t.push((u, v, w));
            t.push((v, u, w));
        }
    }
    let w = SparseMatrix::from_triplets(n, n, &t).map_err(to_py)?;
    Ok(coarsening::path_cover(&w).paths)
}

#[pyfunction]
fn project_out_constant(x: Vec<f64>) -> Vec<f64> {
    sparse::project_out_constant(&x)
}

#[pymodule]
fn pcamg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PcamgError", m.py().get_type::<PcamgError>())?;
    m.add_class::<PyLaplacian>()?;
    m.add_class::<PyHierarchy>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_homogeneous, m)?)?;
    m.add_function(wrap_pyfunction!(make_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(path_cover, m)?)?;
    m.add_function(wrap_pyfunction!(project_out_constant, m)?)?;
    Ok(())
}
