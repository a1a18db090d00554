//! Python bindings. Complex arrays come back as lists of `complex`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rominv::app::{self, Command};
use rominv::config::ConfigFile;
use rominv::error::Error;
use rominv::experiment::{monte_carlo, run_trial_detailed, MonteCarloSummary, Prepared};
use rominv::forward::{generate_spectrum, BoundarySpectrum};
use rominv::grid::SpatialGrid;
use rominv::rom::{assemble_direct, assemble_from_data, RomCheck};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    if e.is_io() {
        PyOSError::new_err(msg)
    } else if e.is_numerical() {
        PyArithmeticError::new_err(msg)
    } else {
        PyValueError::new_err(msg)
    }
}

/// Run configuration, parsed from TOML. A run manifest is also accepted.
#[pyclass(name = "Config", module = "rominv_py", from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: ConfigFile,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = None))]
    fn new(text: Option<&str>) -> PyResult<Self> {
        let inner = match text {
            Some(t) => ConfigFile::parse(t).map_err(to_py)?,
            None => ConfigFile::default(),
        };
        inner.experiment_config().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = ConfigFile::load(&path).map_err(to_py)?;
        inner.experiment_config().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.experiment.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.set_seed(seed);
    }

    fn wavenumbers(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.experiment_config().map_err(to_py)?.wavenumbers())
    }

    fn __repr__(&self) -> String {
        format!("Config(seed={})", self.inner.experiment.seed)
    }
}

/// Boundary data `f, g` and their k-derivatives.
#[pyclass(name = "Spectrum", module = "rominv_py", skip_from_py_object)]
pub struct PySpectrum {
    inner: BoundarySpectrum,
}

#[pymethods]
impl PySpectrum {
    #[getter]
    fn wavenumbers(&self) -> Vec<f64> {
        self.inner.wavenumbers.clone()
    }
    #[getter]
    fn f(&self) -> Vec<Complex64> {
        self.inner.f.clone()
    }
    #[getter]
    fn g(&self) -> Vec<Complex64> {
        self.inner.g.clone()
    }
    #[getter]
    fn fprime(&self) -> Vec<Complex64> {
        self.inner.fprime.clone()
    }
    #[getter]
    fn gprime(&self) -> Vec<Complex64> {
        self.inner.gprime.clone()
    }
    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn config_or_default(config: Option<&PyConfig>) -> ConfigFile {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Spectrum of the configured true potential.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn forward_spectrum(py: Python<'_>, config: Option<&PyConfig>) -> PyResult<PySpectrum> {
    let file = config_or_default(config);
    py.detach(|| {
        let cfg = file.experiment_config()?;
        let grid = SpatialGrid::new(cfg.grid_cells)?;
        generate_spectrum(&cfg.truth, &cfg.wavenumbers(), &grid)
    })
    .map(|inner| PySpectrum { inner })
    .map_err(to_py)
}

/// Data-driven ROM compared with the quadrature ROM of the solved states.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn rom_check<'py>(py: Python<'py>, config: Option<&PyConfig>) -> PyResult<Bound<'py, PyDict>> {
    let file = config_or_default(config);
    let check = py
        .detach(|| {
            let cfg = file.experiment_config()?;
            let grid = SpatialGrid::new(cfg.grid_cells)?;
            let (spec, states) = rominv::forward::generate_spectrum_with_states(&cfg.truth, &cfg.wavenumbers(), &grid)?;
            RomCheck::new(&assemble_from_data(&spec)?, &assemble_direct(&states, &cfg.truth, &grid)?)
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    for (name, v) in check.entries() {
        d.set_item(name, v)?;
    }
    Ok(d)
}

fn summary_dict<'py>(py: Python<'py>, s: &MonteCarloSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", s.method.as_str())?;
    d.set_item("sigma", s.sigma)?;
    d.set_item("state_parameter", s.state_parameter)?;
    d.set_item("alpha", s.alpha)?;
    d.set_item("u_error_mean", s.state_error.mean)?;
    d.set_item("u_error_std", s.state_error.std)?;
    d.set_item("q_error_mean", s.potential_error.mean)?;
    d.set_item("q_error_std", s.potential_error.std)?;
    d.set_item("successes", s.successes)?;
    d.set_item("failures", s.failures)?;
    d.set_item("first_failure", s.first_failure.clone())?;
    Ok(d)
}

/// Precomputed noiseless data and reference quantities for one configuration.
#[pyclass(name = "Experiment", module = "rominv_py", skip_from_py_object)]
pub struct PyExperiment {
    prepared: Prepared,
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(py: Python<'_>, config: Option<&PyConfig>) -> PyResult<Self> {
        let file = config_or_default(config);
        let prepared = py
            .detach(|| Prepared::new(&file.experiment_config()?))
            .map_err(to_py)?;
        Ok(Self { prepared })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.prepared.config.method.as_str()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.prepared.grid.nodes().to_vec()
    }

    #[getter]
    fn true_potential(&self) -> Vec<f64> {
        self.prepared.truth_values.clone()
    }

    fn spectrum(&self) -> PySpectrum {
        PySpectrum {
            inner: self.prepared.spectrum.clone(),
        }
    }

    /// One noisy inversion. Returns errors, estimated states and the recovered potential.
    fn trial<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let out = py.detach(|| run_trial_detailed(&self.prepared, seed)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("method", out.result.method.as_str())?;
        d.set_item("seed", seed)?;
        d.set_item("u_error", out.result.state_error)?;
        d.set_item("q_error", out.result.potential_error)?;
        d.set_item("u_errors", out.result.per_wavenumber_state_errors.clone())?;
        d.set_item("potential", out.recovered_values)?;
        let states: Vec<Vec<Complex64>> = out.estimates.iter().map(|e| e.values.clone()).collect();
        d.set_item("states", states)?;
        Ok(d)
    }

    /// Monte Carlo over the configured number of trials.
    fn monte_carlo<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = py.detach(|| monte_carlo(&self.prepared));
        summary_dict(py, &s)
    }
}

/// Run a CLI subcommand into `out`; returns the written file names.
#[pyfunction]
#[pyo3(signature = (command, out, config = None))]
fn run(py: Python<'_>, command: &str, out: PathBuf, config: Option<&PyConfig>) -> PyResult<Vec<String>> {
    let command = match command {
        "forward" => Command::Forward,
        "invert" => Command::Invert,
        "sweep" => Command::Sweep,
        "mc" => Command::Mc,
        "romcheck" => Command::Romcheck,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let file = config_or_default(config);
    let output = py.detach(|| app::run(command, &file, &out)).map_err(to_py)?;
    Ok(output.files)
}

#[pymodule]
fn rominv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(forward_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(rom_check, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
