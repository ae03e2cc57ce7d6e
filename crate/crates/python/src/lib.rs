//! Python bindings: carrier and fluctuation specs, synthesis, filtering and
//! the flickermeter.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use flickersim::conformance::{validate as run_validate, ConformanceOptions};
use flickersim::flicker::{classify as classify_pinst, PstReading};
use flickersim::sweep::{run_point as sweep_point, SweepPlan};
use flickersim::{self as core, Error, FlickermeterConfig, Shape, SignalBuffer};

fn to_py(e: Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_shape(name: &str) -> PyResult<Shape> {
    name.parse().map_err(to_py)
}

/// Clipped-cosine carrier: cosine limited at `m_c` of its peak and rescaled
/// to the nominal rms.
#[pyclass(name = "CarrierSpec", from_py_object)]
#[derive(Clone)]
struct PyCarrierSpec {
    inner: core::CarrierSpec,
}

#[pymethods]
impl PyCarrierSpec {
    #[new]
    #[pyo3(signature = (m_c = 1.0, f_c = 50.0, u_c = 230.0))]
    fn new(m_c: f64, f_c: f64, u_c: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core::CarrierSpec::new(f_c, u_c, m_c).map_err(to_py)?,
        })
    }

    #[getter]
    fn m_c(&self) -> f64 {
        self.inner.m_c
    }

    #[getter]
    fn f_c(&self) -> f64 {
        self.inner.f_c
    }

    #[getter]
    fn u_c(&self) -> f64 {
        self.inner.u_c
    }

    /// Samples of the carrier.
    fn synthesize(&self, sample_rate: f64, duration: f64) -> PyResult<Vec<f64>> {
        Ok(core::synthesize_carrier(&self.inner, sample_rate, duration)
            .map_err(to_py)?
            .samples()
            .to_vec())
    }

    /// THD as a fraction, from one second at 80 kHz.
    #[pyo3(signature = (harmonics = 40))]
    fn thd(&self, harmonics: usize) -> PyResult<f64> {
        let buf = core::synthesize_carrier(&self.inner, 80_000.0, 1.0).map_err(to_py)?;
        core::thd(&buf, self.inner.f_c, harmonics).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "CarrierSpec(m_c={}, f_c={}, u_c={})",
            self.inner.m_c, self.inner.f_c, self.inner.u_c
        )
    }
}

/// Periodic fluctuation: shape (`sin`, `tri`, `trap`, `rect`), frequency in
/// Hz and peak-to-peak depth in percent.
#[pyclass(name = "ModulatingSpec", from_py_object)]
#[derive(Clone)]
struct PyModulatingSpec {
    inner: core::ModulatingSpec,
}

#[pymethods]
impl PyModulatingSpec {
    #[new]
    #[pyo3(signature = (shape, f_m, depth, phase = 0.0))]
    fn new(shape: &str, f_m: f64, depth: f64, phase: f64) -> PyResult<Self> {
        let inner = core::ModulatingSpec::new(parse_shape(shape)?, f_m, depth)
            .map_err(to_py)?
            .with_phase(phase);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> &'static str {
        self.inner.shape.short_name()
    }

    #[getter]
    fn f_m(&self) -> f64 {
        self.inner.f_m
    }

    #[getter]
    fn depth(&self) -> f64 {
        self.inner.depth
    }

    #[getter]
    fn phase(&self) -> f64 {
        self.inner.phase
    }

    /// Unit-amplitude modulating waveform.
    fn synthesize(&self, sample_rate: f64, duration: f64) -> PyResult<Vec<f64>> {
        Ok(core::synthesize_modulating(&self.inner, sample_rate, duration)
            .map_err(to_py)?
            .samples()
            .to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "ModulatingSpec(shape={:?}, f_m={}, depth={}, phase={})",
            self.inner.shape.short_name(),
            self.inner.f_m,
            self.inner.depth,
            self.inner.phase
        )
    }
}

fn reading_dict<'py>(py: Python<'py>, r: &PstReading) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pst", r.pst)?;
    d.set_item("below_floor", r.below_floor)?;
    let p = PyDict::new(py);
    p.set_item("p0_1", r.percentiles.p0_1)?;
    p.set_item("p1s", r.percentiles.p1s)?;
    p.set_item("p3s", r.percentiles.p3s)?;
    p.set_item("p10s", r.percentiles.p10s)?;
    p.set_item("p50s", r.percentiles.p50s)?;
    d.set_item("percentiles", p)?;
    Ok(d)
}

/// `(1 + depth·m/200)·c`, sample by sample.
#[pyfunction]
fn modulate(carrier: Vec<f64>, modulating: Vec<f64>, depth: f64, sample_rate: f64) -> PyResult<Vec<f64>> {
    let c = SignalBuffer::new(carrier, sample_rate).map_err(to_py)?;
    let m = SignalBuffer::new(modulating, sample_rate).map_err(to_py)?;
    Ok(core::modulate(&c, &m, depth).map_err(to_py)?.samples().to_vec())
}

/// THD (fraction) of a sampled waveform with fundamental `f_c`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, f_c = 50.0, harmonics = 40))]
fn thd(samples: Vec<f64>, sample_rate: f64, f_c: f64, harmonics: usize) -> PyResult<f64> {
    let buf = SignalBuffer::new(samples, sample_rate).map_err(to_py)?;
    core::thd(&buf, f_c, harmonics).map_err(to_py)
}

/// Hamming-windowed sinc low-pass taps.
#[pyfunction]
#[pyo3(signature = (order = 200, cutoff = 8000.0, sample_rate = 80000.0))]
fn design_lowpass_fir(order: usize, cutoff: f64, sample_rate: f64) -> PyResult<Vec<f64>> {
    Ok(core::design_lowpass_fir(order, cutoff, sample_rate)
        .map_err(to_py)?
        .coefficients()
        .to_vec())
}

/// Pst of a voltage record sampled at `sample_rate` (the meter input rate).
#[pyfunction]
#[pyo3(signature = (samples, sample_rate = 20000.0, window = 600.0, settle = 30.0))]
fn measure_pst<'py>(
    py: Python<'py>,
    samples: Vec<f64>,
    sample_rate: f64,
    window: f64,
    settle: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = FlickermeterConfig {
        input_rate: sample_rate,
        window,
        settle,
        ..FlickermeterConfig::default()
    };
    let buf = SignalBuffer::new(samples, sample_rate).map_err(to_py)?;
    let reading = py.detach(|| core::measure_pst(&buf, &config)).map_err(to_py)?;
    reading_dict(py, &reading)
}

/// Synthesis, FIR band limiting, decimation and Pst for one point.
#[pyfunction]
#[pyo3(signature = (carrier, modulating, window = 600.0, settle = 30.0))]
fn run_point<'py>(
    py: Python<'py>,
    carrier: PyCarrierSpec,
    modulating: PyModulatingSpec,
    window: f64,
    settle: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut plan = SweepPlan::stage1(vec![carrier.inner], vec![modulating.inner.shape]).with_short_window(window);
    plan.durations.settle = settle;
    plan.fm_grid = vec![modulating.inner.f_m];
    plan.depth_grid = vec![modulating.inner.depth];
    plan.record_wall_time = false;
    let record = py
        .detach(|| sweep_point(&carrier.inner, &modulating.inner, &plan))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("pst", record.pst)?;
    d.set_item("below_floor", record.below_floor)?;
    Ok(d)
}

/// Pst of a P_inst series by exact order statistics.
#[pyfunction]
fn classify<'py>(py: Python<'py>, p_inst: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    reading_dict(py, &classify_pinst(&p_inst).map_err(to_py)?)
}

/// Runs the conformance suite; returns `(all_passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (quick = true))]
fn validate(py: Python<'_>, quick: bool) -> PyResult<(bool, String)> {
    let options = ConformanceOptions {
        compliance: !quick,
        ..ConformanceOptions::default()
    };
    let report = py.detach(|| run_validate(&options)).map_err(to_py)?;
    Ok((report.all_passed(), report.to_string()))
}

#[pymodule]
fn pyflickersim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCarrierSpec>()?;
    m.add_class::<PyModulatingSpec>()?;
    m.add("SHAPES", Shape::ALL.iter().map(|s| s.short_name()).collect::<Vec<_>>())?;
    m.add("PST_FLOOR", core::PST_FLOOR)?;
    m.add_function(wrap_pyfunction!(modulate, m)?)?;
    m.add_function(wrap_pyfunction!(thd, m)?)?;
    m.add_function(wrap_pyfunction!(design_lowpass_fir, m)?)?;
    m.add_function(wrap_pyfunction!(measure_pst, m)?)?;
    m.add_function(wrap_pyfunction!(run_point, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
