//! Python bindings: `import adas_py`.

use adas_core::experiment::{theory_check as run_theory_check, TheoryCheckConfig};
use adas_core::{AdasError, GainNorm, Matrix};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: AdasError) -> PyErr {
    match e {
        AdasError::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Matrix::new(r, c, rows.into_iter().flatten().collect()).map_err(to_py)
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.data().chunks(m.cols().max(1)).map(<[f64]>::to_vec).collect()
}

fn norm(p: u32) -> PyResult<GainNorm> {
    GainNorm::from_p(p).map_err(to_py)
}

/// Convolution weight with dims (kh, kw, cin, cout), last index fastest.
#[pyclass(name = "Tensor4", module = "adas_py")]
#[derive(Clone)]
struct PyTensor4 {
    inner: adas_core::Tensor4,
}

#[pymethods]
impl PyTensor4 {
    #[new]
    fn new(dims: [usize; 4], data: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: adas_core::Tensor4::new(dims, data).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_at4(bytes: &[u8]) -> PyResult<Self> {
        Ok(Self { inner: adas_core::Tensor4::from_at4_bytes(bytes).map_err(to_py)? })
    }

    fn to_at4<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_at4_bytes())
    }

    #[getter]
    fn dims(&self) -> [usize; 4] {
        self.inner.dims()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, idx: [usize; 4]) -> PyResult<f64> {
        let dims = self.inner.dims();
        if idx.iter().zip(&dims).any(|(i, d)| i >= d) {
            return Err(PyValueError::new_err(format!("index {idx:?} out of range for {dims:?}")));
        }
        Ok(self.inner.get(idx))
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn __repr__(&self) -> String {
        format!("Tensor4(dims={:?})", self.inner.dims())
    }
}

/// Mode-3 or mode-4 unfolding as a list of rows.
#[pyfunction]
fn unfold(t: &PyTensor4, mode: u32) -> PyResult<Vec<Vec<f64>>> {
    match mode {
        3 => Ok(rows_of(&adas_core::unfold_mode3(&t.inner))),
        4 => Ok(rows_of(&adas_core::unfold_mode4(&t.inner))),
        _ => Err(PyValueError::new_err(format!("mode must be 3 or 4, got {mode}"))),
    }
}

#[pyclass(name = "EvbmfResult", module = "adas_py", get_all, frozen)]
struct PyEvbmfResult {
    estimated_rank: usize,
    shrunk_values: Vec<f64>,
    noise_variance: f64,
    threshold: f64,
}

#[pymethods]
impl PyEvbmfResult {
    fn __repr__(&self) -> String {
        format!(
            "EvbmfResult(estimated_rank={}, noise_variance={})",
            self.estimated_rank, self.noise_variance
        )
    }
}

#[pyfunction]
fn evbmf(rows: Vec<Vec<f64>>) -> PyResult<PyEvbmfResult> {
    let r = adas_core::evbmf(&matrix(rows)?).map_err(to_py)?;
    Ok(PyEvbmfResult {
        estimated_rank: r.estimated_rank,
        shrunk_values: r.shrunk_values,
        noise_variance: r.noise_variance,
        threshold: r.threshold,
    })
}

#[pyfunction]
#[pyo3(signature = (spectrum, channel_size, p = 1))]
fn knowledge_gain(spectrum: Vec<f64>, channel_size: usize, p: u32) -> PyResult<f64> {
    adas_core::knowledge_gain(&spectrum, channel_size, norm(p)?).map_err(to_py)
}

#[pyfunction]
fn mapping_condition(spectrum: Vec<f64>) -> Option<f64> {
    adas_core::mapping_condition(&spectrum)
}

#[pyclass(name = "LayerMetrics", module = "adas_py", get_all, frozen)]
#[derive(Clone)]
struct PyLayerMetrics {
    g3: f64,
    g4: f64,
    g_avg: f64,
    kappa3: Option<f64>,
    kappa4: Option<f64>,
    kappa_avg: Option<f64>,
    rank3: usize,
    rank4: usize,
    rank_ratio3: f64,
    rank_ratio4: f64,
}

impl From<&adas_core::LayerMetrics> for PyLayerMetrics {
    fn from(m: &adas_core::LayerMetrics) -> Self {
        Self {
            g3: m.g3,
            g4: m.g4,
            g_avg: m.g_avg,
            kappa3: m.kappa3,
            kappa4: m.kappa4,
            kappa_avg: m.kappa_avg,
            rank3: m.rank3,
            rank4: m.rank4,
            rank_ratio3: m.rank_ratio3,
            rank_ratio4: m.rank_ratio4,
        }
    }
}

#[pymethods]
impl PyLayerMetrics {
    fn __repr__(&self) -> String {
        format!("LayerMetrics(g_avg={}, rank3={}, rank4={})", self.g_avg, self.rank3, self.rank4)
    }
}

#[pyfunction]
#[pyo3(signature = (t, p = 1))]
fn layer_metrics(t: &PyTensor4, p: u32) -> PyResult<PyLayerMetrics> {
    Ok((&adas_core::layer_metrics(&t.inner, norm(p)?).map_err(to_py)?).into())
}

#[pyclass(name = "AdasConfig", module = "adas_py", get_all, set_all)]
#[derive(Clone)]
struct PyAdasConfig {
    beta: f64,
    zeta: f64,
    eta_init: f64,
    eta_min: f64,
    momentum: f64,
}

impl PyAdasConfig {
    fn core(&self) -> adas_core::AdasConfig {
        adas_core::AdasConfig {
            beta: self.beta,
            zeta: self.zeta,
            eta_init: self.eta_init,
            eta_min: self.eta_min,
            momentum: self.momentum,
        }
    }
}

#[pymethods]
impl PyAdasConfig {
    #[new]
    #[pyo3(signature = (beta = 0.8, zeta = 1.0, eta_init = 0.03, eta_min = adas_core::adas::DEFAULT_ETA_MIN, momentum = 0.9))]
    fn new(beta: f64, zeta: f64, eta_init: f64, eta_min: f64, momentum: f64) -> PyResult<Self> {
        let cfg = Self { beta, zeta, eta_init, eta_min, momentum };
        cfg.core().validate().map_err(to_py)?;
        Ok(cfg)
    }
}

/// Per-block learning rates driven by the change in knowledge gain.
#[pyclass(name = "AdasState", module = "adas_py")]
struct PyAdasState {
    config: adas_core::AdasConfig,
    inner: adas_core::AdasState,
}

#[pymethods]
impl PyAdasState {
    #[new]
    fn new(config: &PyAdasConfig, blocks: Vec<PyTensor4>) -> PyResult<Self> {
        let config = config.core();
        let blocks: Vec<_> = blocks.into_iter().map(|b| b.inner).collect();
        let inner = adas_core::AdasState::init(&config, &blocks).map_err(to_py)?;
        Ok(Self { config, inner })
    }

    fn epoch_update(&mut self, blocks: Vec<PyTensor4>) -> PyResult<()> {
        let blocks: Vec<_> = blocks.into_iter().map(|b| b.inner).collect();
        self.inner.epoch_update(&self.config, &blocks).map_err(to_py)
    }

    fn get_lr(&self, block: usize) -> PyResult<f64> {
        self.inner.get_lr(block).map_err(to_py)
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.epoch
    }

    /// Current rate of every block.
    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.lr.clone()
    }

    #[getter]
    fn prev_gain(&self) -> Vec<f64> {
        self.inner.prev_gain.clone()
    }

    fn latest_metrics(&self) -> Vec<PyLayerMetrics> {
        self.inner.latest_metrics().iter().map(Into::into).collect()
    }
}

/// Returns (eta_lower, d_value, denominator, feasible).
#[pyfunction]
fn lr_lower_bound(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<(f64, f64, f64, bool)> {
    let r = adas_core::lr_lower_bound(&matrix(a)?, &matrix(b)?).map_err(to_py)?;
    Ok((r.eta_lower, r.d_value, r.denominator, r.feasible))
}

#[pyfunction]
fn quadratic_d(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, eta: f64) -> PyResult<f64> {
    adas_core::quadratic_d(&matrix(a)?, &matrix(b)?, eta).map_err(to_py)
}

/// Randomised bound check; returns the text report and whether it passed.
#[pyfunction]
#[pyo3(signature = (trials = 1000, seed = 1, rows = 8, cols = 8, zero_update = false))]
fn theory_check(trials: usize, seed: u64, rows: usize, cols: usize, zero_update: bool) -> PyResult<(String, bool)> {
    let r = run_theory_check(&TheoryCheckConfig { trials, seed, rows, cols, zero_update }).map_err(to_py)?;
    Ok((r.to_string(), r.passed()))
}

#[pymodule]
fn adas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor4>()?;
    m.add_class::<PyEvbmfResult>()?;
    m.add_class::<PyLayerMetrics>()?;
    m.add_class::<PyAdasConfig>()?;
    m.add_class::<PyAdasState>()?;
    m.add_function(wrap_pyfunction!(unfold, m)?)?;
    m.add_function(wrap_pyfunction!(evbmf, m)?)?;
    m.add_function(wrap_pyfunction!(knowledge_gain, m)?)?;
    m.add_function(wrap_pyfunction!(mapping_condition, m)?)?;
    m.add_function(wrap_pyfunction!(layer_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(lr_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_d, m)?)?;
    m.add_function(wrap_pyfunction!(theory_check, m)?)?;
    Ok(())
}
