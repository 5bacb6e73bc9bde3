//! Python bindings for `nnl_core`. Fields go in and out as plain lists of
//! floats indexed like the grid's active cells.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nnl_core::analysis::{self, ConstantReport, EigenOptions};
use nnl_core::solve::{self, SolveResult};
use nnl_core::{build_grid, Aabb, Discretization, Domain, SolverOptions};

fn value_err(e: nnl_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Kernel", frozen)]
struct PyKernel {
    inner: nnl_core::Kernel,
}

#[pymethods]
impl PyKernel {
    /// Indicator kernel `amplitude · 1{|x−y| < delta}`.
    #[staticmethod]
    #[pyo3(signature = (dim, delta, amplitude = 1.0))]
    fn truncated(dim: usize, delta: f64, amplitude: f64) -> PyResult<Self> {
        nnl_core::Kernel::truncated(dim, delta, amplitude).map(|inner| Self { inner }).map_err(value_err)
    }

    /// Fractional kernel `amplitude / |x−y|^(d+2s)` with infinite horizon.
    #[staticmethod]
    #[pyo3(signature = (dim, s, amplitude = 1.0))]
    fn fractional(dim: usize, s: f64, amplitude: f64) -> PyResult<Self> {
        nnl_core::Kernel::fractional(dim, s, amplitude).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn constant(dim: usize, value: f64) -> PyResult<Self> {
        nnl_core::Kernel::constant(dim, value).map(|inner| Self { inner }).map_err(value_err)
    }

    fn __call__(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.inner.eval(x, y)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __repr__(&self) -> String {
        format!("Kernel({})", self.inner.label())
    }
}

fn solve_dict<'py>(py: Python<'py>, r: SolveResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("u", r.u)?;
    d.set_item("status", r.status.as_str())?;
    d.set_item("residual", r.residual)?;
    d.set_item("compatibility_defect", r.compatibility_defect)?;
    d.set_item("multiplier", r.multiplier)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("message", r.message)?;
    Ok(d)
}

fn constant_dict<'py>(py: Python<'py>, r: ConstantReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", r.name)?;
    d.set_item("value", r.value)?;
    d.set_item("bound", r.bound)?;
    d.set_item("method", r.method)?;
    for (k, v) in r.diagnostics {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Grid, pair table and operators for one kernel on one domain.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    disc: Discretization,
}

#[pymethods]
impl PyProblem {
    /// `boxes` is a list of `(lo, hi)` corner pairs; in 1D pass `([a, 0], [b, 0])`.
    #[new]
    #[pyo3(signature = (dim, boxes, kernel, h, radius = None))]
    fn new(dim: usize, boxes: Vec<([f64; 2], [f64; 2])>, kernel: &PyKernel, h: f64, radius: Option<f64>) -> PyResult<Self> {
        let boxes = boxes.into_iter().map(|(lo, hi)| Aabb { lo, hi }).collect();
        let domain = Domain::new(dim, boxes).map_err(value_err)?;
        let k = kernel.inner.clone();
        let radius = match radius.or(k.horizon()) {
            Some(r) => r,
            None => return Err(PyValueError::new_err("radius is required for kernels without a finite horizon")),
        };
        let grid = build_grid(&domain, &k, h, radius, None).map_err(value_err)?;
        let disc = Discretization::new(grid, k).map_err(value_err)?;
        Ok(Self { disc })
    }

    #[getter]
    fn n(&self) -> usize {
        self.disc.n()
    }

    #[getter]
    fn n_omega(&self) -> usize {
        self.disc.n_omega()
    }

    #[getter]
    fn n_gamma(&self) -> usize {
        self.disc.grid().n_gamma()
    }

    fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.disc.n()).map(|i| self.disc.grid().center(i)).collect()
    }

    fn tags(&self) -> Vec<&'static str> {
        (0..self.disc.n()).map(|i| self.disc.grid().tag(i).as_str()).collect()
    }

    fn volumes(&self) -> Vec<f64> {
        (0..self.disc.n()).map(|i| self.disc.volume(i)).collect()
    }

    /// Pair weight between active cells `a` and `b`.
    fn weight(&self, a: usize, b: usize) -> f64 {
        self.disc.table().weight(a, b)
    }

    /// Nonlocal operator on Ω cells (zero elsewhere).
    fn apply_l(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.disc.apply_l(&u).map_err(value_err)
    }

    /// Nonlocal flux on boundary-layer cells (zero elsewhere).
    fn apply_n(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.disc.apply_n(&u).map_err(value_err)
    }

    #[pyo3(signature = (f, g, tol = 1e-10))]
    fn solve_neumann<'py>(&self, py: Python<'py>, f: Vec<f64>, g: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let opts = SolverOptions { tol, ..Default::default() };
        solve_dict(py, solve::solve_neumann(&self.disc, &f, &g, &opts).map_err(value_err)?)
    }

    #[pyo3(signature = (f, kappa, tol = 1e-10))]
    fn solve_regularized<'py>(&self, py: Python<'py>, f: Vec<f64>, kappa: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let opts = SolverOptions { tol, ..Default::default() };
        solve_dict(py, solve::solve_regularized(&self.disc, &f, &kappa, &opts).map_err(value_err)?)
    }

    #[pyo3(signature = (f, alpha, tol = 1e-10))]
    fn solve_nonsymmetric<'py>(&self, py: Python<'py>, f: Vec<f64>, alpha: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let opts = SolverOptions { tol, ..Default::default() };
        solve_dict(py, solve::solve_nonsymmetric(&self.disc, &f, &alpha, &opts).map_err(value_err)?)
    }

    #[pyo3(signature = (f, g_ext = None, tol = 1e-10))]
    fn solve_dirichlet<'py>(
        &self,
        py: Python<'py>,
        f: Vec<f64>,
        g_ext: Option<Vec<f64>>,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let opts = SolverOptions { tol, ..Default::default() };
        solve_dict(py, solve::solve_dirichlet(&self.disc, &f, g_ext.as_deref(), &opts).map_err(value_err)?)
    }

    #[pyo3(signature = (f, alpha, g, tol = 1e-10, c_threshold = 1e-12))]
    fn solve_robin<'py>(
        &self,
        py: Python<'py>,
        f: Vec<f64>,
        alpha: Vec<f64>,
        g: Vec<f64>,
        tol: f64,
        c_threshold: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let set = solve::robin_transform(&self.disc, &alpha, &g, c_threshold).map_err(value_err)?;
        let opts = SolverOptions { tol, ..Default::default() };
        solve_dict(py, solve::solve_robin(&self.disc, &set, &f, &opts).map_err(value_err)?)
    }

    fn poincare<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = analysis::estimate_poincare(&self.disc, &EigenOptions::default()).map_err(value_err)?;
        constant_dict(py, r)
    }

    fn friedrichs<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = analysis::estimate_friedrichs(&self.disc, &EigenOptions::default()).map_err(value_err)?;
        constant_dict(py, r)
    }

    #[pyo3(signature = (c = 1.0))]
    fn trace_norm<'py>(&self, py: Python<'py>, c: f64) -> PyResult<Bound<'py, PyDict>> {
        if self.disc.grid().n_gamma() == 0 {
            return Err(PyRuntimeError::new_err("grid has no boundary-layer cells"));
        }
        let r = analysis::trace_operator_norm(&self.disc, c, &EigenOptions::default()).map_err(value_err)?;
        constant_dict(py, r)
    }

    /// Smallest per-cell coercivity margin for the nonsymmetric problem.
    fn coercivity_margin(&self, alpha: Vec<f64>) -> PyResult<f64> {
        Ok(analysis::coercivity_margin(&self.disc, &alpha).map_err(value_err)?.min_margin)
    }
}

#[pymodule]
fn nnl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyProblem>()?;
    Ok(())
}
