//! Python bindings: group elements, observables, the ODE engine, functionals, the lattice and
//! the experiment runner. Records come back as plain dicts.

use horolab::experiments::{list_experiments, run, ExperimentConfig};
use horolab::functionals::{expansion, functionals};
use horolab::lattice::FuchsianGroup;
use horolab::limits::{levy_distance, ks_distance, EmpiricalDistribution};
use horolab::ode::{ergodic_average, j_function, ode_residual};
use horolab::{GroupElement, Observable, SpectralParameter};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: horolab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

#[pyclass(name = "GroupElement", module = "horolab_py", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGroupElement {
    inner: GroupElement,
}

#[pymethods]
impl PyGroupElement {
    #[new]
    fn new(a: f64, b: f64, c: f64, d: f64) -> PyResult<Self> {
        Ok(PyGroupElement { inner: GroupElement::new(a, b, c, d).map_err(err)? })
    }

    /// Element with Iwasawa coordinates `n(x) a(y) k(theta)`.
    #[staticmethod]
    fn from_iwasawa(x: f64, y: f64, theta: f64) -> Self {
        PyGroupElement { inner: horolab::IwasawaCoords { x, y, theta }.to_group() }
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.d
    }

    fn to_list(&self) -> [f64; 4] {
        self.inner.to_array()
    }

    /// `(x, y, theta)`.
    fn iwasawa(&self) -> (f64, f64, f64) {
        let c = self.inner.iwasawa();
        (c.x, c.y, c.theta)
    }

    fn horocycle(&self, t: f64) -> Self {
        PyGroupElement { inner: self.inner.horocycle(t) }
    }

    fn geodesic(&self, t: f64) -> Self {
        PyGroupElement { inner: self.inner.geodesic(t) }
    }

    fn inverse(&self) -> Self {
        PyGroupElement { inner: self.inner.inverse() }
    }

    fn __mul__(&self, other: PyRef<'_, PyGroupElement>) -> Self {
        PyGroupElement { inner: self.inner * other.inner }
    }

    fn __repr__(&self) -> String {
        let g = self.inner;
        format!("GroupElement({}, {}, {}, {})", g.a, g.b, g.c, g.d)
    }
}

#[pyclass(name = "Observable", module = "horolab_py", skip_from_py_object)]
#[derive(Clone)]
struct PyObservable {
    inner: Observable,
}

#[pymethods]
impl PyObservable {
    /// From a catalog key such as `"power:s=0.5+1.5i:real"` or `"discrete:n=3:imag"`.
    #[new]
    fn new(key: &str) -> PyResult<Self> {
        Ok(PyObservable { inner: Observable::from_key(key).map_err(err)? })
    }

    /// Weighted sum of catalog keys: `[(weight, key), ...]`.
    #[staticmethod]
    fn combination(parts: Vec<(f64, String)>) -> PyResult<Self> {
        let parts: Vec<(f64, Observable)> = parts
            .into_iter()
            .map(|(w, k)| Ok((w, Observable::from_key(&k).map_err(err)?)))
            .collect::<PyResult<_>>()?;
        Ok(PyObservable { inner: Observable::combination(&parts).map_err(err)? })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    /// Casimir eigenvalue, or `None` for a combination across eigenvalues.
    #[getter]
    fn mu(&self) -> Option<f64> {
        self.inner.spectral().map(|s| s.mu)
    }

    #[getter]
    fn case(&self) -> Option<String> {
        self.inner.spectral().map(|s| format!("{:?}", s.case))
    }

    fn value(&self, g: PyRef<'_, PyGroupElement>) -> f64 {
        self.inner.value(&g.inner)
    }

    /// Derivatives `(Uf, Xf, Vf)` at `g`.
    fn derivatives(&self, g: PyRef<'_, PyGroupElement>) -> (f64, f64, f64) {
        (self.inner.u(&g.inner), self.inner.x(&g.inner), self.inner.v(&g.inner))
    }

    fn __repr__(&self) -> String {
        format!("Observable({:?})", self.inner.label())
    }
}

#[pyclass(name = "FuchsianGroup", module = "horolab_py")]
struct PyFuchsianGroup {
    inner: FuchsianGroup,
}

#[pymethods]
impl PyFuchsianGroup {
    /// The regular-octagon genus-2 surface group.
    #[staticmethod]
    fn octagon() -> PyResult<Self> {
        Ok(PyFuchsianGroup { inner: FuchsianGroup::genus2_octagon().map_err(err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyFuchsianGroup { inner: FuchsianGroup::from_json(s).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    /// `(representative, word)`.
    fn reduce(&self, g: PyRef<'_, PyGroupElement>) -> PyResult<(PyGroupElement, Vec<usize>)> {
        let r = self.inner.reduce(&g.inner).map_err(err)?;
        Ok((PyGroupElement { inner: r.point }, r.word))
    }

    fn sample_haar(&self, n: usize, seed: u64) -> PyResult<Vec<PyGroupElement>> {
        Ok(self.inner.sample_haar(n, seed).map_err(err)?.into_iter().map(|inner| PyGroupElement { inner }).collect())
    }
}

#[pyfunction]
fn spectral_parameter(py: Python<'_>, mu: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &SpectralParameter::from_mu(mu).map_err(err)?)
}

/// `(1/T) int_0^T f(x h_t) dt` as a dict with the quadrature error.
#[pyfunction]
fn ergodic_average_py(py: Python<'_>, f: PyRef<'_, PyObservable>, x: PyRef<'_, PyGroupElement>, t_end: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &ergodic_average(&f.inner, &x.inner, t_end).map_err(err)?)
}

#[pyfunction]
fn j_values(py: Python<'_>, f: PyRef<'_, PyObservable>, x: PyRef<'_, PyGroupElement>, t: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &j_function(&f.inner, &x.inner, t).map_err(err)?)
}

#[pyfunction]
fn ode_residual_py(py: Python<'_>, f: PyRef<'_, PyObservable>, x: PyRef<'_, PyGroupElement>, t: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &ode_residual(&f.inner, &x.inner, t).map_err(err)?)
}

/// `D+` and `D-` at `x` (window fitted around `x`).
#[pyfunction]
fn functionals_py(py: Python<'_>, f: PyRef<'_, PyObservable>, x: PyRef<'_, PyGroupElement>) -> PyResult<Py<PyAny>> {
    to_py(py, &functionals(&f.inner, &x.inner).map_err(err)?)
}

#[pyfunction]
fn expansion_py(py: Python<'_>, f: PyRef<'_, PyObservable>, x: PyRef<'_, PyGroupElement>, t_end: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &expansion(&f.inner, &x.inner, t_end).map_err(err)?)
}

#[pyfunction]
fn levy(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    let a = EmpiricalDistribution::new(&xs).map_err(err)?;
    let b = EmpiricalDistribution::new(&ys).map_err(err)?;
    Ok(levy_distance(&a, &b))
}

#[pyfunction]
fn kolmogorov_smirnov(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    let a = EmpiricalDistribution::new(&xs).map_err(err)?;
    let b = EmpiricalDistribution::new(&ys).map_err(err)?;
    Ok(ks_distance(&a, &b))
}

#[pyfunction]
fn experiments() -> String {
    list_experiments()
}

/// Runs an experiment from its JSON config and returns the report; nothing is written to disk.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let outcome = py.detach(|| run(&cfg)).map_err(err)?;
    to_py(py, &outcome)
}

#[pymodule]
fn horolab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroupElement>()?;
    m.add_class::<PyObservable>()?;
    m.add_class::<PyFuchsianGroup>()?;
    m.add_function(wrap_pyfunction!(spectral_parameter, m)?)?;
    m.add("ergodic_average", wrap_pyfunction!(ergodic_average_py, m)?)?;
    m.add_function(wrap_pyfunction!(j_values, m)?)?;
    m.add("ode_residual", wrap_pyfunction!(ode_residual_py, m)?)?;
    m.add("functionals", wrap_pyfunction!(functionals_py, m)?)?;
    m.add("expansion", wrap_pyfunction!(expansion_py, m)?)?;
    m.add_function(wrap_pyfunction!(levy, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_smirnov, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
