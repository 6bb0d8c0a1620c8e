//! Python bindings: fields, loops, energy, the critical-loop solver and the
//! mountain-pass estimate. Reports come back as JSON strings.

use ::hloop::area;
use ::hloop::energy as en;
use ::hloop::hardy::NearOptimizer;
use ::hloop::mountain_pass::{estimate_cmp, field_n, CmpOptions};
use ::hloop::solver::{self, SolverOptions};
use ::hloop::{Complex64, CurvatureField, Loop};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: ::hloop::Error) -> PyErr {
    match e {
        ::hloop::Error::Config(_) | ::hloop::Error::Json(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Curvature field `H`.
#[pyclass(name = "Field", frozen)]
#[derive(Clone)]
pub struct PyField(CurvatureField);

#[pymethods]
impl PyField {
    #[staticmethod]
    fn constant(value: f64) -> Self {
        Self(CurvatureField::constant(value))
    }

    #[staticmethod]
    fn beta_t(beta: f64, t: f64) -> PyResult<Self> {
        CurvatureField::beta_t(beta, t).map(Self).map_err(err)
    }

    #[staticmethod]
    fn eps(eps: f64) -> PyResult<Self> {
        CurvatureField::eps(eps).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CurvatureField::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0.to_spec())
    }

    fn with_bump(&self, center: (f64, f64), radius: f64, amplitude: f64) -> PyResult<Self> {
        self.0.clone().with_bump(Complex64::new(center.0, center.1), radius, amplitude).map(Self).map_err(err)
    }

    fn rescale(&self, lam: f64) -> PyResult<Self> {
        self.0.rescale(lam).map(Self).map_err(err)
    }

    fn __call__(&self, x: f64, y: f64) -> f64 {
        self.0.eval(Complex64::new(x, y))
    }

    /// `N_H`; grid-based when the field has a bump.
    fn n(&self) -> PyResult<f64> {
        field_n(&self.0).map_err(err)
    }

    fn m(&self) -> PyResult<f64> {
        self.0.compute_m().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Field({})", self.to_json().unwrap_or_default())
    }
}

/// Closed curve sampled at equally spaced parameters.
#[pyclass(name = "Loop", frozen)]
#[derive(Clone)]
pub struct PyLoop(Loop);

#[pymethods]
impl PyLoop {
    #[new]
    fn new(points: Vec<(f64, f64)>) -> PyResult<Self> {
        Loop::new(points.into_iter().map(|(x, y)| Complex64::new(x, y)).collect()).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (radius, center = (0.0, 0.0), degree = 1, samples = 128))]
    fn circle(radius: f64, center: (f64, f64), degree: i32, samples: usize) -> PyResult<Self> {
        Loop::circle(Complex64::new(center.0, center.1), radius, degree, samples).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, max_mode = 4, decay = 2.0, samples = 128))]
    fn random(seed: u64, max_mode: usize, decay: f64, samples: usize) -> PyResult<Self> {
        Loop::random_fourier(seed, max_mode, decay, samples).map(Self).map_err(err)
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.0.points().iter().map(|z| (z.re, z.im)).collect()
    }

    /// `L(u)`, the RMS speed.
    fn length(&self) -> f64 {
        self.0.seminorm_l()
    }

    fn mean(&self) -> (f64, f64) {
        let m = self.0.mean();
        (m.re, m.im)
    }

    fn area(&self) -> f64 {
        area::area_a1(&self.0)
    }

    fn winding_number(&self, x: f64, y: f64) -> PyResult<i64> {
        area::winding_number(&self.0, Complex64::new(x, y)).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// `A_H(u)`, the `H`-weighted enclosed area.
#[pyfunction]
fn weighted_area(field: &PyField, u: &PyLoop) -> PyResult<f64> {
    area::area_ak_line(&u.0, &field.0).map_err(err)
}

/// `E_H(u) = L(u) + A_H(u)`.
#[pyfunction]
fn energy(field: &PyField, u: &PyLoop) -> f64 {
    en::energy_value(&field.0, &u.0)
}

#[pyfunction]
fn gradient_norm(field: &PyField, u: &PyLoop) -> PyResult<f64> {
    en::gradient(&field.0, &u.0).map(|g| en::gradient_norm(&g)).map_err(err)
}

#[pyfunction]
fn residual(field: &PyField, u: &PyLoop) -> f64 {
    solver::residual(&field.0, &u.0)
}

/// Run the critical-loop solver. Returns `(report_json, final_loop)`.
#[pyfunction]
#[pyo3(signature = (field, init, tol = 1e-8, max_iters = 4000, l_max = 1e3))]
fn find_critical(py: Python<'_>, field: &PyField, init: &PyLoop, tol: f64, max_iters: usize, l_max: f64) -> PyResult<(String, PyLoop)> {
    let opts = SolverOptions { tol, max_iters, l_max, n_estimate: 0.0 };
    let rep = py.detach(|| solver::find_critical(&field.0, &init.0, &opts)).map_err(err)?;
    Ok((to_json(&rep)?, PyLoop(rep.final_loop)))
}

/// Mountain-pass level estimate; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (field, well_center = None, nodes = 33, samples = 128))]
fn mountain_pass(py: Python<'_>, field: &PyField, well_center: Option<(f64, f64)>, nodes: usize, samples: usize) -> PyResult<String> {
    let opts = CmpOptions { nodes, samples, well_center: well_center.map(|(x, y)| [x, y]), ..CmpOptions::default() };
    let rep = py.detach(|| estimate_cmp(&field.0, &opts)).map_err(err)?;
    to_json(&rep)
}

/// Closing defect of the curvature ODE started on `u` with speed `L(u)`.
#[pyfunction]
fn shooting_defect(field: &PyField, u: &PyLoop) -> PyResult<f64> {
    solver::shoot_loop(&field.0, &u.0).map(|r| r.defect).map_err(err)
}

/// 1-D Hardy ratio of the radial near-optimizer family.
#[pyfunction]
#[pyo3(signature = (delta = 0.01, log_a = -40.0, log_b = 40.0, ramp = 10.0))]
fn near_optimizer_ratio(delta: f64, log_a: f64, log_b: f64, ramp: f64) -> f64 {
    NearOptimizer { delta, log_a, log_b, ramp }.ratio_1d()
}

#[pymodule]
#[pyo3(name = "hloop")]
fn hloop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyLoop>()?;
    m.add_function(wrap_pyfunction!(weighted_area, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_norm, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(find_critical, m)?)?;
    m.add_function(wrap_pyfunction!(mountain_pass, m)?)?;
    m.add_function(wrap_pyfunction!(shooting_defect, m)?)?;
    m.add_function(wrap_pyfunction!(near_optimizer_ratio, m)?)?;
    Ok(())
}
