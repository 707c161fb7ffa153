//! Python bindings: polynomials and fitting, polynomial-activation networks,
//! the homomorphic simulator and Fourier sine series.

// `!(a > b)` is deliberate: NaN must fail range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use polyhe::extract::{extract_polynomial, plan_depth, required_layers};
use polyhe::fourier::{eval_series_encrypted, eval_series_plain, fourier_sine_coeffs, FourierError, FourierSeries};
use polyhe::funcspec::{sample, split_train_validation, Source, TargetFunction};
use polyhe::henc::{self, Ciphertext, Context, ContextParams, HencError, SineParams};
use polyhe::netcore::{init_network, load_weights_csv, save_weights_csv, train, Network, NetworkConfig};
use polyhe::poly::{self, MultCount, Polynomial};
use polyhe::quant::quantize_uniform;

create_exception!(polyhe_py, LevelExhausted, PyException, "Multiplicative levels exhausted.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn henc_err(e: HencError) -> PyErr {
    match e {
        HencError::LevelExhausted => LevelExhausted::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn fourier_err(e: FourierError) -> PyErr {
    match e {
        FourierError::Henc(h) => henc_err(h),
        other => value_err(other),
    }
}

fn count_dict<'py>(py: Python<'py>, c: MultCount) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("ct_mults", c.ct_mults)?;
    d.set_item("scalar_mults", c.scalar_mults)?;
    d.set_item("depth", c.depth)?;
    Ok(d)
}

#[pyclass(name = "Polynomial", module = "polyhe_py", from_py_object)]
#[derive(Clone)]
pub struct PyPolynomial {
    inner: Polynomial,
}

#[pymethods]
impl PyPolynomial {
    /// Coefficients, constant term first.
    #[new]
    fn new(coeffs: Vec<f64>) -> Self {
        PyPolynomial {
            inner: Polynomial::new(coeffs),
        }
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn compose(&self, inner: &PyPolynomial) -> PyResult<PyPolynomial> {
        Ok(PyPolynomial {
            inner: self.inner.compose(&inner.inner).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<PyPolynomial> {
        Ok(PyPolynomial {
            inner: Polynomial::from_text(text).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Polynomial({:?})", self.inner.coeffs())
    }
}

/// Least-squares polynomial of the given degree through the points.
#[pyfunction]
fn fit_least_squares(xs: Vec<f64>, ys: Vec<f64>, degree: usize) -> PyResult<PyPolynomial> {
    Ok(PyPolynomial {
        inner: poly::fit_least_squares(&xs, &ys, degree).map_err(value_err)?,
    })
}

/// Horner evaluation; returns the value and the multiplication counts.
#[pyfunction]
fn eval_horner<'py>(py: Python<'py>, p: &PyPolynomial, x: f64) -> PyResult<(f64, Bound<'py, PyDict>)> {
    let (v, c) = poly::eval_horner(&p.inner, x);
    Ok((v, count_dict(py, c)?))
}

/// Paterson–Stockmeyer evaluation; returns the value and the multiplication counts.
#[pyfunction]
fn eval_paterson_stockmeyer<'py>(py: Python<'py>, p: &PyPolynomial, x: f64) -> PyResult<(f64, Bound<'py, PyDict>)> {
    let (v, c) = poly::eval_paterson_stockmeyer(&p.inner, x);
    Ok((v, count_dict(py, c)?))
}

/// Hidden layers needed for a degree-`2RP` polynomial with degree-`d` activations.
#[pyfunction]
fn py_required_layers(radius: f64, precision: f64, degree: usize) -> PyResult<u32> {
    required_layers(radius, precision, degree).map_err(value_err)
}

/// `(x, f(x))` on the grid `-R, -R + step, ..., R`.
#[pyfunction]
fn sample_target(function: &str, radius: f64, step: f64) -> PyResult<Vec<(f64, f64)>> {
    let source = Source::parse(function).map_err(value_err)?;
    let target = TargetFunction::new(source, radius, step).map_err(value_err)?;
    Ok(sample(&target).map_err(value_err)?.points)
}

#[pyclass(name = "Network", module = "polyhe_py", from_py_object)]
#[derive(Clone)]
pub struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    /// Freshly initialised network for inputs in `[-radius, radius]`.
    #[staticmethod]
    #[pyo3(signature = (layers, width, degree = 2, radius = 1.0, seed = 0))]
    fn init(layers: usize, width: usize, degree: usize, radius: f64, seed: u64) -> PyResult<PyNetwork> {
        let cfg = NetworkConfig {
            seed,
            ..NetworkConfig::for_interval(layers, width, degree, radius)
        };
        Ok(PyNetwork {
            inner: init_network(&cfg).map_err(value_err)?,
        })
    }

    /// Samples `function` on the `precision` grid, trains on every
    /// `train_step` point and validates on the rest. Returns the best network
    /// and a report dict.
    #[staticmethod]
    #[pyo3(signature = (
        function, radius, layers, width, degree = 2, precision = 1e-2, train_step = 1e-1,
        epochs = 400, batch = 32, lr = 1e-3, l2 = 0.0, patience = 200, seed = 2
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train<'py>(
        py: Python<'py>,
        function: &str,
        radius: f64,
        layers: usize,
        width: usize,
        degree: usize,
        precision: f64,
        train_step: f64,
        epochs: usize,
        batch: usize,
        lr: f64,
        l2: f64,
        patience: usize,
        seed: u64,
    ) -> PyResult<(PyNetwork, Bound<'py, PyDict>)> {
        let source = Source::parse(function).map_err(value_err)?;
        let target = TargetFunction::new(source, radius, precision).map_err(value_err)?;
        let keep = (train_step / precision).round();
        if !(keep >= 1.0) {
            return Err(value_err("train_step must be a positive multiple of precision"));
        }
        let grid = sample(&target).map_err(value_err)?;
        let (train_set, validation) = split_train_validation(&grid, keep as usize);
        let cfg = NetworkConfig {
            learning_rate: lr,
            max_epochs: epochs,
            batch_size: batch,
            l2_lambda: l2,
            patience,
            seed,
            ..NetworkConfig::for_interval(layers, width, degree, radius)
        };
        let (net, report) = py
            .detach(|| train(&cfg, &train_set, &validation))
            .map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("epochs_run", report.epochs_run)?;
        d.set_item("best_epoch", report.best_epoch)?;
        d.set_item("final_train_mse", report.final_train_mse)?;
        d.set_item("final_validation_mse", report.final_validation_mse)?;
        d.set_item("loss_history", report.loss_history)?;
        d.set_item("validation_history", report.validation_history)?;
        Ok((PyNetwork { inner: net }, d))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<PyNetwork> {
        Ok(PyNetwork {
            inner: load_weights_csv(path).map_err(value_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_weights_csv(&self.inner, path).map_err(value_err)
    }

    #[getter]
    fn hidden_layers(&self) -> usize {
        self.inner.hidden_layers()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn activation_degree(&self) -> usize {
        self.inner.activation_degree()
    }

    fn forward(&self, x: f64) -> PyResult<f64> {
        self.inner.forward(x).map_err(value_err)
    }

    fn forward_many(&self, xs: Vec<f64>) -> PyResult<Vec<f64>> {
        xs.iter().map(|&x| self.inner.forward(x).map_err(value_err)).collect()
    }

    /// The polynomial the network computes.
    fn extract(&self) -> PyResult<PyPolynomial> {
        Ok(PyPolynomial {
            inner: extract_polynomial(&self.inner).map_err(value_err)?,
        })
    }

    /// Levels and multiplications of one encrypted forward pass.
    fn plan_depth<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        count_dict(py, plan_depth(&self.inner.config))
    }

    fn quantize(&self, bits: u32) -> PyResult<PyNetwork> {
        Ok(PyNetwork {
            inner: quantize_uniform(&self.inner, bits).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(layers={}, width={}, degree={})",
            self.inner.hidden_layers(),
            self.inner.width(),
            self.inner.activation_degree()
        )
    }
}

#[pyclass(name = "Ciphertext", module = "polyhe_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyCiphertext {
    inner: Ciphertext,
}

#[pymethods]
impl PyCiphertext {
    #[getter]
    fn level(&self) -> u32 {
        self.inner.level()
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.inner.depth()
    }

    fn __repr__(&self) -> String {
        format!("Ciphertext(level={}, depth={})", self.inner.level(), self.inner.depth())
    }
}

fn wrap(r: Result<Ciphertext, HencError>) -> PyResult<PyCiphertext> {
    r.map(|inner| PyCiphertext { inner }).map_err(henc_err)
}

#[pyclass(name = "Context", module = "polyhe_py")]
pub struct PyContext {
    inner: Context,
}

#[pymethods]
impl PyContext {
    #[new]
    #[pyo3(signature = (slots = 8192, max_level = 40, noise_sigma = 0.0, auto_bootstrap = false, seed = 0))]
    fn new(slots: usize, max_level: u32, noise_sigma: f64, auto_bootstrap: bool, seed: u64) -> PyResult<Self> {
        let inner = Context::new(ContextParams {
            slot_count: slots,
            max_level,
            noise_sigma,
            auto_bootstrap,
            bootstrap_perturbation: 0.0,
            seed,
        })
        .map_err(henc_err)?;
        Ok(PyContext { inner })
    }

    #[getter]
    fn slots(&self) -> usize {
        self.inner.slot_count()
    }

    #[getter]
    fn max_level(&self) -> u32 {
        self.inner.max_level()
    }

    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.inner.counters();
        let d = PyDict::new(py);
        d.set_item("ct_mults", c.ct_mults)?;
        d.set_item("scalar_mults", c.scalar_mults)?;
        d.set_item("bootstraps", c.bootstraps)?;
        Ok(d)
    }

    fn encrypt(&mut self, values: Vec<Complex64>) -> PyResult<PyCiphertext> {
        wrap(self.inner.encrypt(&values))
    }

    fn encrypt_real(&mut self, values: Vec<f64>) -> PyResult<PyCiphertext> {
        wrap(self.inner.encrypt_real(&values))
    }

    fn decrypt(&self, ct: &PyCiphertext) -> PyResult<Vec<Complex64>> {
        self.inner.decrypt(&ct.inner).map_err(henc_err)
    }

    fn decrypt_real(&self, ct: &PyCiphertext) -> PyResult<Vec<f64>> {
        self.inner.decrypt_real(&ct.inner).map_err(henc_err)
    }

    fn add(&mut self, a: &PyCiphertext, b: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.add(&a.inner, &b.inner))
    }

    fn cadd(&mut self, a: &PyCiphertext, c: Complex64) -> PyResult<PyCiphertext> {
        wrap(self.inner.cadd(&a.inner, c))
    }

    fn neg(&mut self, a: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.neg(&a.inner))
    }

    fn imul(&mut self, a: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.imul(&a.inner))
    }

    fn mul(&mut self, a: &PyCiphertext, b: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.mul(&a.inner, &b.inner))
    }

    fn cmul(&mut self, a: &PyCiphertext, c: Complex64) -> PyResult<PyCiphertext> {
        wrap(self.inner.cmul(&a.inner, c))
    }

    fn bootstrap(&mut self, a: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.bootstrap(&a.inner))
    }

    /// Slotwise sine through Euler's formula; consumes `k + t + 3` levels.
    #[pyo3(signature = (ct, t = 10, k = 7))]
    fn sine(&mut self, ct: &PyCiphertext, t: u32, k: u32) -> PyResult<PyCiphertext> {
        let p = SineParams::new(t, k).map_err(henc_err)?;
        wrap(henc::sine_compute(&mut self.inner, &ct.inner, p))
    }

    /// Encrypted forward pass of `net` on every slot.
    fn forward(&mut self, net: &PyNetwork, ct: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(henc::forward_encrypted(&mut self.inner, &net.inner, &ct.inner))
    }

    fn eval_horner(&mut self, p: &PyPolynomial, ct: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.eval_horner(&p.inner, &ct.inner))
    }

    fn eval_paterson_stockmeyer(&mut self, p: &PyPolynomial, ct: &PyCiphertext) -> PyResult<PyCiphertext> {
        wrap(self.inner.eval_paterson_stockmeyer(&p.inner, &ct.inner))
    }
}

#[pyclass(name = "FourierSeries", module = "polyhe_py", from_py_object)]
#[derive(Clone)]
pub struct PyFourierSeries {
    inner: FourierSeries,
}

#[pymethods]
impl PyFourierSeries {
    #[new]
    fn new(period_half: f64, coeffs: Vec<f64>) -> PyResult<Self> {
        Ok(PyFourierSeries {
            inner: FourierSeries::new(period_half, coeffs).map_err(fourier_err)?,
        })
    }

    /// Sine coefficients of the odd callable `f` by Simpson's rule.
    #[staticmethod]
    #[pyo3(signature = (f, period_half, harmonics, subintervals = polyhe::fourier::DEFAULT_SUBINTERVALS))]
    fn fit(f: Bound<'_, PyAny>, period_half: f64, harmonics: usize, subintervals: usize) -> PyResult<Self> {
        let failure: RefCell<Option<PyErr>> = RefCell::new(None);
        let call = |x: f64| -> f64 {
            if failure.borrow().is_some() {
                return f64::NAN;
            }
            match f.call1((x,)).and_then(|v| v.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    f64::NAN
                }
            }
        };
        let result = fourier_sine_coeffs(call, period_half, harmonics, subintervals);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(PyFourierSeries {
            inner: result.map_err(fourier_err)?,
        })
    }

    #[getter]
    fn period_half(&self) -> f64 {
        self.inner.period_half
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    fn __call__(&self, x: f64) -> f64 {
        eval_series_plain(&self.inner, x)
    }

    #[pyo3(signature = (ctx, ct, t = 10, k = 7))]
    fn encrypted(&self, ctx: &mut PyContext, ct: &PyCiphertext, t: u32, k: u32) -> PyResult<PyCiphertext> {
        let p = SineParams::new(t, k).map_err(henc_err)?;
        let out = eval_series_encrypted(&mut ctx.inner, &self.inner, &ct.inner, p).map_err(fourier_err)?;
        Ok(PyCiphertext { inner: out })
    }

    /// Levels [`encrypted`] consumes.
    #[pyo3(signature = (t = 10, k = 7))]
    fn encrypted_levels(&self, t: u32, k: u32) -> PyResult<u32> {
        Ok(self.inner.encrypted_levels(SineParams::new(t, k).map_err(henc_err)?))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyFourierSeries {
            inner: FourierSeries::from_text(text).map_err(fourier_err)?,
        })
    }
}

#[pymodule]
fn polyhe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolynomial>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyCiphertext>()?;
    m.add_class::<PyContext>()?;
    m.add_class::<PyFourierSeries>()?;
    m.add_function(wrap_pyfunction!(fit_least_squares, m)?)?;
    m.add_function(wrap_pyfunction!(eval_horner, m)?)?;
    m.add_function(wrap_pyfunction!(eval_paterson_stockmeyer, m)?)?;
    m.add_function(wrap_pyfunction!(sample_target, m)?)?;
    m.add("required_layers", wrap_pyfunction!(py_required_layers, m)?)?;
    m.add("LevelExhausted", m.py().get_type::<LevelExhausted>())?;
    Ok(())
}
