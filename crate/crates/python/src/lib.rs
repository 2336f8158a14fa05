//! Python module `fracmg`: problems, multigrid hierarchies, time stepping
//! and diagnostics from the Rust solver.

use fracmg::assembly::{make_example1_with_order, make_example2, ProblemSpec};
use fracmg::diagnostics;
use fracmg::fracquad::{gauss_jacobi, jacobi_gl, DEFAULT_DERIV_ORDER};
use fracmg::multigrid::{Hierarchy as CoreHierarchy, MgConfig as CoreConfig};
use fracmg::timestep;
use fracmg::toeplitz::SymToeplitz;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: fracmg::Error) -> PyErr {
    match e {
        fracmg::Error::InvalidParameter { .. }
        | fracmg::Error::DimensionMismatch { .. }
        | fracmg::Error::OutOfDomain { .. }
        | fracmg::Error::Empty
        | fracmg::Error::NonFinite { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Symmetric Toeplitz matrix given by its first column.
#[pyclass(name = "Toeplitz", frozen)]
struct Toeplitz(SymToeplitz);

#[pymethods]
impl Toeplitz {
    #[new]
    fn new(first_col: Vec<f64>) -> PyResult<Self> {
        SymToeplitz::new(first_col).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.matvec(&x).map_err(to_py)
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.0.to_dense();
        (0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect()
    }

    fn is_m_matrix(&self) -> bool {
        self.0.structure_report().is_m_matrix()
    }
}

/// Multigrid parameters.
#[pyclass(name = "MgConfig", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct MgConfig {
    m1: usize,
    m2: usize,
    eta_pre: f64,
    eta_post: f64,
    tol: f64,
    max_iter: usize,
    coarse_max: usize,
}

impl MgConfig {
    fn core(&self) -> PyResult<CoreConfig> {
        let c = CoreConfig {
            m1: self.m1,
            m2: self.m2,
            eta_pre: self.eta_pre,
            eta_post: self.eta_post,
            tol: self.tol,
            max_iter: self.max_iter,
            coarse_max: self.coarse_max,
        };
        c.validate().map_err(to_py)?;
        Ok(c)
    }
}

#[pymethods]
impl MgConfig {
    #[new]
    #[pyo3(signature = (m1=1, m2=2, eta_pre=0.5, eta_post=0.5, tol=1e-10, max_iter=200, coarse_max=7))]
    fn new(m1: usize, m2: usize, eta_pre: f64, eta_post: f64, tol: f64, max_iter: usize, coarse_max: usize) -> PyResult<Self> {
        let c = Self { m1, m2, eta_pre, eta_post, tol, max_iter, coarse_max };
        c.core()?;
        Ok(c)
    }

    fn __repr__(&self) -> String {
        format!(
            "MgConfig(m1={}, m2={}, eta_pre={}, eta_post={}, tol={:e}, max_iter={}, coarse_max={})",
            self.m1, self.m2, self.eta_pre, self.eta_post, self.tol, self.max_iter, self.coarse_max
        )
    }
}

fn config_or_default(cfg: Option<&MgConfig>) -> PyResult<CoreConfig> {
    match cfg {
        Some(c) => c.core(),
        None => Ok(CoreConfig::default()),
    }
}

/// Model problem with its coefficients and domain.
#[pyclass(name = "Problem", frozen)]
struct Problem(ProblemSpec);

#[pymethods]
impl Problem {
    /// Manufactured problem on (0, b) with a known exact solution.
    #[staticmethod]
    #[pyo3(signature = (alpha, lambda_=0.5, b=32.0, t_final=1.0, quad_order=DEFAULT_DERIV_ORDER))]
    fn example1(alpha: f64, lambda_: f64, b: f64, t_final: f64, quad_order: usize) -> PyResult<Self> {
        make_example1_with_order(alpha, lambda_, b, t_final, quad_order).map(Self).map_err(to_py)
    }

    /// Unforced problem on (0, 1) with u0 = x(1 - x).
    #[staticmethod]
    #[pyo3(signature = (alpha, lambda_=0.5, sigma=0.0))]
    fn example2(alpha: f64, lambda_: f64, sigma: f64) -> PyResult<Self> {
        let p = ProblemSpec { sigma, ..make_example2(alpha, lambda_).map_err(to_py)? };
        p.validate().map_err(to_py)?;
        Ok(Self(p))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        (self.0.a, self.0.b)
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.0.t_final
    }

    #[getter]
    fn has_exact(&self) -> bool {
        self.0.exact.is_some()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Nested levels for one mesh and time step.
#[pyclass(name = "Hierarchy", frozen)]
struct Hierarchy(CoreHierarchy);

#[pymethods]
impl Hierarchy {
    #[new]
    #[pyo3(signature = (problem, cells, tau, config=None))]
    fn new(problem: &Problem, cells: usize, tau: f64, config: Option<&MgConfig>) -> PyResult<Self> {
        let cfg = config_or_default(config)?;
        let mesh = problem.0.mesh(cells).map_err(to_py)?;
        CoreHierarchy::build(&problem.0, &mesh, tau, &cfg).map(Self).map_err(to_py)
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.0.sizes()
    }

    /// Finest-level product with the system matrix.
    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.finest().apply(&x).map_err(to_py)
    }

    /// Returns `(solution, iterations, converged, residual_history)`.
    #[pyo3(signature = (rhs, config=None))]
    fn solve(&self, rhs: Vec<f64>, config: Option<&MgConfig>) -> PyResult<(Vec<f64>, usize, bool, Vec<f64>)> {
        let cfg = config_or_default(config)?;
        let r = self.0.solve(&rhs, &cfg).map_err(to_py)?;
        Ok((r.solution, r.iters, r.converged, r.residual_history))
    }

    #[pyo3(signature = (config=None, trials=3, seed=0x5eed))]
    fn contraction_factor(&self, config: Option<&MgConfig>, trials: usize, seed: u64) -> PyResult<f64> {
        let cfg = config_or_default(config)?;
        self.0.contraction_factor(&cfg, trials, seed).map_err(to_py)
    }
}

/// Crank–Nicolson run with `steps` time steps; returns a dict.
#[pyfunction]
#[pyo3(signature = (problem, cells, steps, config=None))]
fn run_simulation<'py>(
    py: Python<'py>,
    problem: &Problem,
    cells: usize,
    steps: usize,
    config: Option<&MgConfig>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_or_default(config)?;
    let r = py.detach(|| timestep::run_simulation(&problem.0, cells, steps, &cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("nodes", r.mesh.nodes())?;
    d.set_item("values", r.values.clone())?;
    d.set_item("iterations", r.iterations.clone())?;
    d.set_item("mean_iterations", r.mean_iterations())?;
    d.set_item("tau", r.tau)?;
    d.set_item("l2_error", r.l2_error)?;
    d.set_item("wall_seconds", r.wall_seconds)?;
    d.set_item("assembly_seconds", r.assembly_seconds)?;
    Ok(d)
}

/// Rows `(N, error, rate, mean_iter)` against the exact solution with `N = M`.
#[pyfunction]
#[pyo3(signature = (problem, cells, config=None, threads=1))]
fn convergence_table(
    py: Python<'_>,
    problem: &Problem,
    cells: Vec<usize>,
    config: Option<&MgConfig>,
    threads: usize,
) -> PyResult<Vec<(usize, f64, Option<f64>, f64)>> {
    let cfg = config_or_default(config)?;
    let rows = py.detach(|| timestep::convergence_table(&problem.0, &cells, &cfg, threads)).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.cells, r.error, r.rate, r.mean_iter)).collect())
}

/// Rows `(M, ||u_M - u_2M||, rate, mean_iter)`.
#[pyfunction]
#[pyo3(signature = (problem, cells, config=None, threads=1))]
fn difference_table(
    py: Python<'_>,
    problem: &Problem,
    cells: Vec<usize>,
    config: Option<&MgConfig>,
    threads: usize,
) -> PyResult<Vec<(usize, f64, Option<f64>, f64)>> {
    let cfg = config_or_default(config)?;
    let rows = py.detach(|| timestep::difference_table(&problem.0, &cells, &cfg, threads)).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.cells, r.difference, r.rate, r.mean_iter)).collect())
}

/// Gauss–Jacobi nodes and weights for the weight `(1-x)^a (1+x)^b`.
#[pyfunction]
#[pyo3(name = "gauss_jacobi")]
fn py_gauss_jacobi(a: f64, b: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let r = gauss_jacobi(a, b, n).map_err(to_py)?;
    Ok((r.nodes, r.weights))
}

/// Gauss–Jacobi–Lobatto nodes and weights, endpoints included.
#[pyfunction]
#[pyo3(name = "jacobi_gl")]
fn py_jacobi_gl(a: f64, b: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let r = jacobi_gl(a, b, n).map_err(to_py)?;
    Ok((r.nodes, r.weights))
}

#[pyfunction]
fn kappa(alpha: f64) -> f64 {
    fracmg::kappa(alpha)
}

#[pyfunction]
fn coercivity_constant(alpha: f64, lambda_: f64, sigma: f64) -> Option<f64> {
    diagnostics::coercivity_constant(alpha, lambda_, sigma)
}

/// Smallest observed `vᵀBv / vᵀMv` minus the coercivity constant.
#[pyfunction]
#[pyo3(signature = (problem, cells, trials=32, seed=0))]
fn coercivity_margin(problem: &Problem, cells: usize, trials: usize, seed: u64) -> PyResult<f64> {
    diagnostics::check_discrete_coercivity(&problem.0, cells, trials, seed).map(|c| c.margin).map_err(to_py)
}

/// Rows `(M, rho, bound_ratio)` of the finest-level spectral radius.
#[pyfunction]
fn spectral_radius_sweep(problem: &Problem, cells: Vec<usize>, tau: f64) -> PyResult<Vec<(usize, f64, f64)>> {
    let rows = diagnostics::spectral_radius_sweep(&problem.0, &cells, tau).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.cells, r.rho, r.bound_ratio)).collect())
}

#[pymodule(name = "fracmg")]
fn fracmg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Toeplitz>()?;
    m.add_class::<MgConfig>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Hierarchy>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_table, m)?)?;
    m.add_function(wrap_pyfunction!(difference_table, m)?)?;
    m.add_function(wrap_pyfunction!(py_gauss_jacobi, m)?)?;
    m.add_function(wrap_pyfunction!(py_jacobi_gl, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(coercivity_constant, m)?)?;
    m.add_function(wrap_pyfunction!(coercivity_margin, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius_sweep, m)?)?;
    Ok(())
}
