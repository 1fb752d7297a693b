//! Python bindings for `sal-core`.
//!
//! Errors map to `ValueError` (bad configuration or input), `OSError` (file
//! access) and `RuntimeError` (everything else, including divergence).

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use serde::Serialize;

use sal_core::analysis::sharpness::DEFAULT_HVP_STEP;
use sal_core::analysis::{self, hutchinson_trace_fd};
use sal_core::harness::{self, RunArtifact};
use sal_core::landscape::{make_double_well, LandscapeSpec};
use sal_core::rng::SalRng;
use sal_core::stress::{self, EpochMetrics};
use sal_core::{perturb, SalError};

fn err(e: SalError) -> PyErr {
    match e {
        SalError::Config(_) | SalError::Parse { .. } | SalError::Shape(_) | SalError::Invalid(_) => {
            PyValueError::new_err(e.to_string())
        }
        SalError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Plain Python objects via `json.loads`.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Stress-aware training hyperparameters; keyword arguments override the
/// defaults. `warmup_epochs = None` means no warm-up limit is ever reached.
#[pyclass(name = "SalConfig", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PySalConfig {
    rho: f64,
    theta: f64,
    eps_loss: f64,
    eps_acc: f64,
    s_max: f64,
    s_noise: f64,
    s_yield: f64,
    delta: f64,
    lambda_: f64,
    warmup_epochs: Option<u64>,
    plastic_layer_count: usize,
    plastic_retain: f64,
    plastic_noise_param: f64,
    plastic_noise_is_std: bool,
    accuracy_condition_enabled: bool,
    revert_tolerance: f64,
    revert_patience: u64,
    reset_optimizer_on_intervention: bool,
}

impl From<&stress::SalConfig> for PySalConfig {
    fn from(c: &stress::SalConfig) -> Self {
        Self {
            rho: c.rho,
            theta: c.theta,
            eps_loss: c.eps_loss,
            eps_acc: c.eps_acc,
            s_max: c.s_max,
            s_noise: c.s_noise,
            s_yield: c.s_yield,
            delta: c.delta,
            lambda_: c.lambda,
            warmup_epochs: (c.warmup_epochs != u64::MAX).then_some(c.warmup_epochs),
            plastic_layer_count: c.plastic_layer_count,
            plastic_retain: c.plastic_retain,
            plastic_noise_param: c.plastic_noise_param,
            plastic_noise_is_std: c.plastic_noise_is_std,
            accuracy_condition_enabled: c.accuracy_condition_enabled,
            revert_tolerance: c.revert_tolerance,
            revert_patience: c.revert_patience,
            reset_optimizer_on_intervention: c.reset_optimizer_on_intervention,
        }
    }
}

impl PySalConfig {
    fn core(&self) -> PyResult<stress::SalConfig> {
        let c = stress::SalConfig {
            rho: self.rho,
            theta: self.theta,
            eps_loss: self.eps_loss,
            eps_acc: self.eps_acc,
            s_max: self.s_max,
            s_noise: self.s_noise,
            s_yield: self.s_yield,
            delta: self.delta,
            lambda: self.lambda_,
            warmup_epochs: self.warmup_epochs.unwrap_or(u64::MAX),
            plastic_layer_count: self.plastic_layer_count,
            plastic_retain: self.plastic_retain,
            plastic_noise_param: self.plastic_noise_param,
            plastic_noise_is_std: self.plastic_noise_is_std,
            accuracy_condition_enabled: self.accuracy_condition_enabled,
            revert_tolerance: self.revert_tolerance,
            revert_patience: self.revert_patience,
            reset_optimizer_on_intervention: self.reset_optimizer_on_intervention,
        };
        c.validate().map_err(err)?;
        Ok(c)
    }
}

#[pymethods]
impl PySalConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg = Bound::new(py, Self::from(&stress::SalConfig::default()))?;
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let attr = if key == "lambda" { "lambda_".to_string() } else { key.clone() };
                if !cfg.hasattr(attr.as_str())? {
                    return Err(PyValueError::new_err(format!("unknown SalConfig field {key:?}")));
                }
                cfg.setattr(attr.as_str(), v)?;
            }
        }
        let out = cfg.borrow().clone();
        out.core()?;
        Ok(out)
    }

    /// Raises `ValueError` when the thresholds are inconsistent.
    fn validate(&self) -> PyResult<()> {
        self.core().map(|_| ())
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("SalConfig({:?})", self.core()?))
    }
}

/// Global stress scalar with the clamped decay/growth recursion.
#[pyclass(name = "StressState", from_py_object)]
#[derive(Clone)]
struct PyStressState {
    inner: stress::StressState,
}

#[pymethods]
impl PyStressState {
    #[new]
    #[pyo3(signature = (s_max = 1.0))]
    fn new(s_max: f64) -> PyResult<Self> {
        Ok(Self {
            inner: stress::StressState::new(s_max).map_err(err)?,
        })
    }

    #[getter]
    fn stress(&self) -> f64 {
        self.inner.stress()
    }

    #[getter]
    fn updates(&self) -> u64 {
        self.inner.last_update_epoch()
    }

    fn update(&mut self, improved: bool, cfg: &PySalConfig) -> PyResult<f64> {
        self.inner.update(improved, &cfg.core()?);
        Ok(self.inner.stress())
    }

    fn reset(&mut self) {
        self.inner.reset();
    }

    /// One of "warmup", "elastic", "noise", "plastic".
    fn regime(&self, epoch: u64, cfg: &PySalConfig) -> PyResult<&'static str> {
        Ok(match stress::classify_regime(&self.inner, epoch, &cfg.core()?) {
            stress::Regime::Warmup => "warmup",
            stress::Regime::Elastic => "elastic",
            stress::Regime::NoiseZone => "noise",
            stress::Regime::PlasticZone => "plastic",
        })
    }

    fn __repr__(&self) -> String {
        format!("StressState(stress={})", self.inner.stress())
    }
}

/// Improvement test between consecutive epochs. `prev = None` compares
/// against the first-epoch history (infinite loss, zero accuracy).
#[pyfunction]
#[pyo3(signature = (loss, accuracy, prev, cfg))]
fn is_improvement(loss: f64, accuracy: f64, prev: Option<(f64, f64)>, cfg: &PySalConfig) -> PyResult<bool> {
    let c = cfg.core()?;
    let curr = EpochMetrics::new(2, loss, accuracy).map_err(err)?;
    match prev {
        None => stress::is_first_improvement(&curr, &c),
        Some((l, a)) => stress::is_improvement(&curr, &EpochMetrics::new(1, l, a).map_err(err)?, &c),
    }
    .map_err(err)
}

/// Standard deviation of the injected weight noise at stress `s`.
#[pyfunction]
fn noise_scale(s: f64, cfg: &PySalConfig) -> PyResult<f64> {
    perturb::noise_scale(s, &cfg.core()?).map_err(err)
}

/// A run configuration, normally loaded from an INI file.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: harness::RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: harness::RunConfig::load(&path).map_err(err)?,
        })
    }

    /// Relative dataset paths resolve against `base_dir`.
    #[staticmethod]
    #[pyo3(signature = (text, base_dir = PathBuf::from(".")))]
    fn parse(text: &str, base_dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: harness::RunConfig::parse(text, &PathBuf::from("<string>"), &base_dir).map_err(err)?,
        })
    }

    fn to_ini(&self) -> String {
        self.inner.to_ini()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[setter]
    fn set_name(&mut self, v: String) {
        self.inner.name = v;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn epochs(&self) -> u64 {
        self.inner.epochs
    }

    #[setter]
    fn set_epochs(&mut self, v: u64) -> PyResult<()> {
        if v == 0 {
            return Err(PyValueError::new_err("epochs must be >= 1"));
        }
        self.inner.epochs = v;
        Ok(())
    }

    #[getter]
    fn sal_enabled(&self) -> bool {
        self.inner.sal_enabled
    }

    #[setter]
    fn set_sal_enabled(&mut self, v: bool) {
        self.inner.sal_enabled = v;
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, v: PathBuf) {
        self.inner.output_dir = v;
    }

    /// A copy; assign a modified `SalConfig` back to change it.
    #[getter]
    fn sal(&self) -> PySalConfig {
        PySalConfig::from(&self.inner.sal)
    }

    #[setter]
    fn set_sal(&mut self, v: &PySalConfig) -> PyResult<()> {
        self.inner.sal = v.core()?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(name={:?}, seed={}, epochs={})", self.inner.name, self.inner.seed, self.inner.epochs)
    }
}

/// Everything a training run produced.
#[pyclass(name = "RunResult", frozen, skip_from_py_object)]
struct PyRunResult {
    inner: RunArtifact,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn config(&self) -> PyRunConfig {
        PyRunConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.summary)
    }

    #[getter]
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events)
    }

    #[getter]
    fn epochs(&self) -> Vec<u64> {
        self.inner.rows.iter().map(|r| r.epoch).collect()
    }

    #[getter]
    fn loss(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.loss).collect()
    }

    #[getter]
    fn accuracy(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.accuracy).collect()
    }

    #[getter]
    fn stress(&self) -> Vec<f64> {
        self.inner.stress_trace()
    }

    #[getter]
    fn grad_norm(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.grad_norm).collect()
    }

    #[getter]
    fn final_params(&self) -> Vec<f64> {
        self.inner.final_params.flatten()
    }

    #[getter]
    fn trajectory(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.trajectory.clone()
    }

    fn epochs_csv(&self) -> String {
        self.inner.epochs_csv()
    }

    fn events_jsonl(&self) -> PyResult<String> {
        self.inner.events_jsonl().map_err(err)
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write(&dir).map_err(err)
    }

    /// First epoch whose logged stress disagrees with a replay, or `None`.
    fn check_stress_trace(&self) -> PyResult<Option<u64>> {
        self.inner.check_stress_trace().map_err(err)
    }

    fn __repr__(&self) -> String {
        let s = &self.inner.summary;
        format!(
            "RunResult(name={:?}, seed={}, epochs={}, final_loss={})",
            s.name, s.seed, s.epochs_completed, s.final_loss
        )
    }
}

/// Trains one configuration. A diverged run is returned, not raised; check
/// `summary["status"]`.
#[pyfunction]
fn train(py: Python<'_>, cfg: &PyRunConfig) -> PyResult<PyRunResult> {
    let c = cfg.inner.clone();
    let inner = py.detach(move || harness::train_run(&c)).map_err(err)?;
    Ok(PyRunResult { inner })
}

#[pyfunction]
fn load_run(dir: PathBuf) -> PyResult<PyRunResult> {
    Ok(PyRunResult {
        inner: RunArtifact::load(&dir).map_err(err)?,
    })
}

/// Per-epoch gaps and final deltas; the dict also carries the rendered
/// `text` and `csv`.
#[pyfunction]
fn compare<'py>(py: Python<'py>, baseline: &PyRunResult, sal: &PyRunResult) -> PyResult<Bound<'py, PyAny>> {
    let report = harness::compare_runs(&baseline.inner, &sal.inner).map_err(err)?;
    let d = to_py(py, &report)?;
    d.set_item("text", report.summary_text())?;
    d.set_item("csv", report.to_csv())?;
    Ok(d)
}

/// Baseline and SAL arms over `seeds` consecutive seeds starting at
/// `cfg.seed`; returns the ensemble report.
#[pyfunction]
#[pyo3(signature = (cfg, seeds, out_dir = None))]
fn sweep<'py>(py: Python<'py>, cfg: &PyRunConfig, seeds: u64, out_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let c = cfg.inner.clone();
    let sw = py
        .detach(move || harness::run_sweep(&c, seeds, out_dir.as_deref()))
        .map_err(err)?;
    let report = sw.report();
    let d = to_py(py, &report)?;
    d.set_item("text", report.summary_text())?;
    Ok(d)
}

/// The built-in noise-expansion and Hutchinson fixtures.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn verify_theory<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyList>> {
    let results = analysis::theory::verify_theory(seed).map_err(err)?;
    let out = PyList::empty(py);
    for r in results {
        let d = PyDict::new(py);
        d.set_item("name", r.name)?;
        d.set_item("measured", r.measured)?;
        d.set_item("expected", r.expected)?;
        d.set_item("tolerance", r.tolerance)?;
        d.set_item("passed", r.passed)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Analytic test landscape with exact gradients and Hessian traces.
#[pyclass(name = "Landscape", frozen, skip_from_py_object)]
struct PyLandscape {
    inner: LandscapeSpec,
}

#[pymethods]
impl PyLandscape {
    /// `0.5 * sum(a_i w_i^2)`.
    #[staticmethod]
    fn quadratic(curvature: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: LandscapeSpec::quadratic(curvature).map_err(err)?,
        })
    }

    /// Sharp well at `+separation/2`, flat well at `-separation/2` on the
    /// first axis.
    #[staticmethod]
    #[pyo3(signature = (sharp_width = 0.1, flat_width = 1.0, separation = 2.0, sharp_depth = 1.0, flat_depth = 1.0, dim = 2))]
    fn double_well(
        sharp_width: f64,
        flat_width: f64,
        separation: f64,
        sharp_depth: f64,
        flat_depth: f64,
        dim: usize,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: make_double_well(sharp_width, flat_width, separation, (sharp_depth, flat_depth), dim)
                .map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn loss(&self, w: Vec<f64>) -> PyResult<f64> {
        self.inner.loss(&w).map_err(err)
    }

    fn grad(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad(&w).map_err(err)
    }

    fn hessian_trace(&self, w: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.eval(&w).map_err(err)?.hessian_trace)
    }

    /// Hutchinson estimate with finite-difference Hessian-vector products.
    #[pyo3(signature = (w, probes = 100, seed = 0, step = DEFAULT_HVP_STEP))]
    fn hutchinson(&self, w: Vec<f64>, probes: usize, seed: u64, step: f64) -> PyResult<f64> {
        let mut rng = SalRng::seed_from_u64(seed);
        hutchinson_trace_fd(|x| self.inner.grad(x), &w, probes, step, &mut rng).map_err(err)
    }

    /// Monte Carlo `E[loss(w + e)]`, `e ~ N(0, sigma^2 I)`; returns
    /// `(mean, standard error)`.
    #[pyo3(signature = (w, sigma, samples = 10_000, seed = 0))]
    fn expected_loss_under_noise(&self, w: Vec<f64>, sigma: f64, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let mut rng = SalRng::seed_from_u64(seed);
        let est = analysis::expected_loss_under_noise(|x| self.inner.loss(x), &w, sigma, samples, &mut rng)
            .map_err(err)?;
        Ok((est.mean, est.std_error))
    }

    fn nearest_well(&self, w: Vec<f64>) -> Option<usize> {
        self.inner.nearest_well(&w)
    }
}

/// Top-`k` principal components of equal-length snapshots.
#[pyfunction]
fn pca_project<'py>(py: Python<'py>, snapshots: Vec<Vec<f64>>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let p = analysis::pca_project(&snapshots, k).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("projections", p.projections)?;
    d.set_item("components", p.components)?;
    d.set_item("eigenvalues", p.eigenvalues)?;
    d.set_item("explained_variance_ratio", p.explained_variance_ratio)?;
    d.set_item("rank_deficient", p.rank_deficient)?;
    Ok(d)
}

/// `(edges, counts)` of an equal-width histogram over `[0, s_max]`.
#[pyfunction]
#[pyo3(signature = (stress, s_max = 1.0, bins = 10))]
fn stress_histogram(stress: Vec<f64>, s_max: f64, bins: usize) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let h = analysis::stress_histogram(&stress, s_max, bins).map_err(err)?;
    Ok((h.edges, h.counts))
}

#[pymodule]
fn sal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySalConfig>()?;
    m.add_class::<PyStressState>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyLandscape>()?;
    m.add_function(wrap_pyfunction!(is_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(noise_scale, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(load_run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theory, m)?)?;
    m.add_function(wrap_pyfunction!(pca_project, m)?)?;
    m.add_function(wrap_pyfunction!(stress_histogram, m)?)?;
    Ok(())
}
