//! Python bindings for the homoflow core crate.

use homoflow::config::ExperimentConfig;
use homoflow::diagnostics::invariant_suite;
use homoflow::families::FamilySpec;
use homoflow::fields::{determinant_residual, rectification_residual, RectifiedSystem};
use homoflow::flow::{advect, IntegratorConfig};
use homoflow::grid::AxisBox;
use homoflow::homogenize::EffectiveCoefficients;
use homoflow::runner::{run_check, run_homogenize, run_simulate, run_sweep, CsvTable};
use homoflow::transport::{InitialDatum, SolutionSampler};
use homoflow::Error;
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidFamily(_)
        | Error::InvalidMeasure { .. }
        | Error::InvalidCellMap { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a nonempty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn check_dim(x: &[f64], dim: usize) -> PyResult<()> {
    if x.len() != dim {
        return Err(PyValueError::new_err(format!("expected a point of dimension {dim}, got {}", x.len())));
    }
    Ok(())
}

/// `w` with `v · w = det(v, v₂, …, v_N)` for the `N − 1` given vectors.
#[pyfunction]
fn cross_product(vectors: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let refs: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    homoflow::fields::cross_product(&refs).map_err(to_py)
}

#[pyfunction]
fn rot_perp(v: Vec<f64>) -> PyResult<(f64, f64)> {
    homoflow::fields::rot_perp(&v).map(|r| (r[0], r[1])).map_err(to_py)
}

#[pyfunction]
fn cofactor_matrix(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix_to_rows(&homoflow::linalg::cofactor_matrix(&matrix_from_rows(&a)?)))
}

fn parse_config(text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::parse(text).map_err(to_py)
}

fn table_text(table: CsvTable) -> PyResult<String> {
    let bytes = table.to_bytes().map_err(to_py)?;
    String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs the `check` command on config text; returns `(csv, all_pass)`.
#[pyfunction]
fn check(config: &str) -> PyResult<(String, bool)> {
    let out = run_check(&parse_config(config)?).map_err(to_py)?;
    Ok((table_text(out.table)?, out.all_pass))
}

#[pyfunction]
fn simulate(config: &str) -> PyResult<String> {
    table_text(run_simulate(&parse_config(config)?).map_err(to_py)?)
}

#[pyfunction]
fn homogenize(config: &str) -> PyResult<String> {
    table_text(run_homogenize(&parse_config(config)?).map_err(to_py)?)
}

#[pyfunction]
fn sweep(config: &str) -> PyResult<String> {
    table_text(run_sweep(&parse_config(config)?).map_err(to_py)?)
}

/// A named family of rectified systems, indexed by ε.
#[pyclass(name = "Family", module = "homoflow")]
struct PyFamily {
    spec: FamilySpec,
    cfg: IntegratorConfig,
}

#[pymethods]
impl PyFamily {
    /// Builds the family described by the `family.*` and `integrator.*` keys of config text.
    #[new]
    fn new(config: &str) -> PyResult<Self> {
        let cfg = parse_config(config)?;
        Ok(PyFamily {
            spec: cfg.family_spec().map_err(to_py)?,
            cfg: cfg.integrator(),
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.spec.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn system(&self, eps: f64) -> PyResult<PySystem> {
        Ok(PySystem {
            inner: self.spec.system(eps, &self.cfg).map_err(to_py)?,
            cfg: self.cfg,
        })
    }

    /// Effective coefficients as a dict with `sigma0`, `xi0` (None when spatially varying) and `provenance`.
    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        coefficients_dict(py, &self.spec.coefficients(&self.cfg).map_err(to_py)?)
    }

    /// Transport solution at `eps` from a bump of the given center, radius and peak.
    #[pyo3(signature = (eps, center, radius = 1.0, amplitude = 1.0))]
    fn solve(&self, eps: f64, center: Vec<f64>, radius: f64, amplitude: f64) -> PyResult<PySolution> {
        let u0 = InitialDatum::bump(center, radius, amplitude).map_err(to_py)?;
        let (_, sol) = self.spec.solve(eps, &u0, &self.cfg).map_err(to_py)?;
        Ok(PySolution { inner: sol })
    }
}

fn coefficients_dict<'py>(py: Python<'py>, c: &EffectiveCoefficients) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("sigma0", c.sigma0.as_constant())?;
    d.set_item("xi0", c.xi0.as_constant().map(|v| v.to_vec()))?;
    d.set_item("provenance", c.provenance.as_str())?;
    Ok(d)
}

/// One member `(W_ε, σ_ε, b_ε, θ_ε)` of a family.
#[pyclass(name = "System", module = "homoflow")]
struct PySystem {
    inner: RectifiedSystem,
    cfg: IntegratorConfig,
}

#[pymethods]
impl PySystem {
    #[getter]
    fn family(&self) -> String {
        self.inner.family.clone()
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    /// `(lower, upper)` bounds of the invariant density.
    #[getter]
    fn sigma_bounds(&self) -> (f64, f64) {
        (self.inner.sigma_bounds.lower, self.inner.sigma_bounds.upper)
    }

    fn w(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&x, self.inner.dim)?;
        Ok(self.inner.w.eval(&x))
    }

    /// `DW` with entry `[i][j] = ∂W_i/∂x_j`.
    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        check_dim(&x, self.inner.dim)?;
        Ok(matrix_to_rows(&self.inner.w.jacobian(&x)))
    }

    fn b(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&x, self.inner.dim)?;
        Ok(self.inner.b.eval(&x))
    }

    fn sigma(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&x, self.inner.dim)?;
        Ok(self.inner.sigma.value(&x))
    }

    fn theta(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&x, self.inner.dim)?;
        Ok(self.inner.theta.value(&x))
    }

    /// `DWᵀb − θe₁`.
    fn rectification_residual(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&x, self.inner.dim)?;
        Ok(rectification_residual(&self.inner, &x))
    }

    /// `det DW − σθ`.
    fn determinant_residual(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&x, self.inner.dim)?;
        Ok(determinant_residual(&self.inner, &x))
    }

    /// Invariant suite on `samples` points of the cube `[-half, half]^N`: id → (max_residual, tolerance, pass).
    #[pyo3(signature = (samples = 1000, half = 2.0, seed = 0))]
    fn invariants<'py>(&self, py: Python<'py>, samples: usize, half: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let report = invariant_suite(&self.inner, &AxisBox::cube(self.inner.dim, half), samples, seed);
        let d = PyDict::new(py);
        for item in &report.items {
            d.set_item(item.id, (item.max_residual, item.tolerance, item.pass))?;
        }
        Ok(d)
    }

    /// Flow of `b` from `x` to time `t` (negative for backward): dict with `pos`, `jac`, `logdet`.
    #[pyo3(signature = (x, t, jacobian = true))]
    fn advect<'py>(&self, py: Python<'py>, x: Vec<f64>, t: f64, jacobian: bool) -> PyResult<Bound<'py, PyDict>> {
        check_dim(&x, self.inner.dim)?;
        let s = advect(&self.inner.b, &x, t, &self.cfg, jacobian).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("pos", s.pos)?;
        d.set_item("jac", s.jac.as_ref().map(matrix_to_rows))?;
        d.set_item("logdet", s.logdet)?;
        Ok(d)
    }
}

/// `u_ε(t, x)` evaluated lazily along characteristics.
#[pyclass(name = "Solution", module = "homoflow")]
struct PySolution {
    inner: SolutionSampler,
}

#[pymethods]
impl PySolution {
    fn eval(&self, t: f64, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&x, self.inner.dim)?;
        self.inner.eval(t, &x).map_err(to_py)
    }

    /// Values at ascending nonnegative `times` for one point.
    fn eval_times(&self, x: Vec<f64>, times: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&x, self.inner.dim)?;
        self.inner.eval_times(&x, &times).map_err(to_py)
    }
}

#[pymodule]
fn _homoflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(cross_product, m)?)?;
    m.add_function(wrap_pyfunction!(rot_perp, m)?)?;
    m.add_function(wrap_pyfunction!(cofactor_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(homogenize, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_class::<PyFamily>()?;
    m.add_class::<PySystem>()?;
    m.add_class::<PySolution>()?;
    Ok(())
}
