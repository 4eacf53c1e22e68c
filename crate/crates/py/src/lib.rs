//! Python bindings: distances, reference laws, limit laws, the exponentiality
//! test, PIT extraction and QDA.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use core_lib::asymptotics::{self, BridgeConfig, GofMethod, InferenceConfig};
use core_lib::classify::{self, QdaModel, SourceClass};
use core_lib::ingest::{self, EventSeries};
use core_lib::metrics::{self, Metric};
use core_lib::{DistKind, PitSample};

fn to_py(e: core_lib::Error) -> PyErr {
    match e {
        core_lib::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn metric(name: &str) -> PyResult<Metric> {
    name.parse().map_err(to_py)
}

fn sample(values: Vec<f64>) -> PyResult<PitSample> {
    PitSample::new(values).map_err(to_py)
}

/// All five distances of a PIT sample, plus `n` and `mean`.
#[pyfunction]
#[pyo3(signature = (values, grid_points = metrics::DEFAULT_GRID_POINTS))]
fn distances(values: Vec<f64>, grid_points: usize) -> PyResult<HashMap<String, f64>> {
    let d = metrics::all_distances(&sample(values)?, grid_points).map_err(to_py)?;
    let mut out: HashMap<String, f64> = Metric::ALL
        .iter()
        .map(|&m| (m.short_name().to_string(), d.get(m)))
        .collect();
    out.insert("n".into(), d.n as f64);
    out.insert("mean".into(), d.mean);
    Ok(out)
}

/// One distance by short name: kappa, w, z2, nw or nz2.
#[pyfunction]
#[pyo3(signature = (values, metric_name, grid_points = metrics::DEFAULT_GRID_POINTS))]
fn distance(values: Vec<f64>, metric_name: &str, grid_points: usize) -> PyResult<f64> {
    Ok(metrics::distance(&sample(values)?, metric(metric_name)?, grid_points)
        .map_err(to_py)?
        .value)
}

#[pyclass(name = "RefDistribution", module = "pitdist", skip_from_py_object)]
#[derive(Clone)]
struct PyRefDistribution {
    inner: core_lib::RefDistribution,
}

#[pymethods]
impl PyRefDistribution {
    #[new]
    #[pyo3(signature = (kind, shape = 1.0, scale = 1.0))]
    fn new(kind: &str, shape: f64, scale: f64) -> PyResult<Self> {
        let kind: DistKind = kind.parse().map_err(to_py)?;
        Ok(Self {
            inner: core_lib::RefDistribution::new(kind, shape, scale).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn exponential(mu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core_lib::RefDistribution::exponential(mu).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn mean_one(kind: &str, shape: f64) -> PyResult<Self> {
        let kind: DistKind = kind.parse().map_err(to_py)?;
        Ok(Self {
            inner: core_lib::RefDistribution::mean_one(kind, shape).map_err(to_py)?,
        })
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    #[getter]
    fn shape(&self) -> f64 {
        self.inner.shape()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn cdf(&self, t: f64) -> f64 {
        self.inner.cdf(t)
    }

    fn sf(&self, t: f64) -> f64 {
        self.inner.sf(t)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.inner.quantile(p)
    }

    fn stop_loss(&self, t: f64) -> f64 {
        self.inner.stop_loss(t)
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        let s = self.inner.sample(n, seed).map_err(to_py)?;
        Ok(s.values().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("RefDistribution({})", self.inner.label())
    }
}

fn bridge(reps: usize, seed: u64, grid_subintervals: usize) -> BridgeConfig {
    BridgeConfig {
        reps,
        seed,
        grid_subintervals,
        ..BridgeConfig::default()
    }
}

/// Draws of the null law of `sqrt(n) d` for a normalized metric.
#[pyfunction]
#[pyo3(signature = (metric_name, reps, seed, grid_subintervals = asymptotics::DEFAULT_GRID_SUBINTERVALS))]
fn null_law(metric_name: &str, reps: usize, seed: u64, grid_subintervals: usize) -> PyResult<Vec<f64>> {
    let law = asymptotics::null_law(metric(metric_name)?, &bridge(reps, seed, grid_subintervals)).map_err(to_py)?;
    Ok(law.draws)
}

/// Draws of the limit law of the standardized estimation error under `dist`.
#[pyfunction]
#[pyo3(signature = (metric_name, dist, reps, seed, grid_subintervals = asymptotics::DEFAULT_GRID_SUBINTERVALS))]
fn limit_law(
    metric_name: &str,
    dist: &PyRefDistribution,
    reps: usize,
    seed: u64,
    grid_subintervals: usize,
) -> PyResult<Vec<f64>> {
    let cfg = bridge(reps, seed, grid_subintervals);
    let law = asymptotics::sample_delta_infinity(metric(metric_name)?, &dist.inner, &cfg).map_err(to_py)?;
    Ok(law.draws)
}

/// Exponentiality test; returns statistic, p_value, reject and n.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (values, metric_name, seed, level = 0.05, method = "asymptotic", reps = asymptotics::DEFAULT_REPS, bootstrap_reps = asymptotics::DEFAULT_BOOTSTRAP_REPS))]
fn gof(
    py: Python<'_>,
    values: Vec<f64>,
    metric_name: &str,
    seed: u64,
    level: f64,
    method: &str,
    reps: usize,
    bootstrap_reps: usize,
) -> PyResult<Py<PyAny>> {
    let method = match method {
        "asymptotic" => GofMethod::Asymptotic,
        "bootstrap" => GofMethod::ParametricBootstrap,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let mut cfg = InferenceConfig::with_seed(seed);
    cfg.bridge.reps = reps;
    cfg.bootstrap_reps = bootstrap_reps;
    let r = asymptotics::gof_exponentiality(&sample(values)?, metric(metric_name)?, level, method, &cfg)
        .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("statistic", r.statistic)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("reject", r.reject)?;
    d.set_item("n", r.n)?;
    d.set_item("reps", r.reps)?;
    Ok(d.into_any().unbind())
}

/// Interarrival times of an event list after the energy band filter, with
/// gap-straddling and zero differences removed.
#[pyfunction]
#[pyo3(signature = (arrivals, energies, gaps = Vec::new(), energy_lo = ingest::DEFAULT_ENERGY_LO, energy_hi = ingest::DEFAULT_ENERGY_HI))]
fn extract_pits(
    arrivals: Vec<f64>,
    energies: Vec<f64>,
    gaps: Vec<(f64, f64)>,
    energy_lo: f64,
    energy_hi: f64,
) -> PyResult<Vec<f64>> {
    if arrivals.len() != energies.len() {
        return Err(PyValueError::new_err("arrivals and energies differ in length"));
    }
    let events = arrivals.into_iter().zip(energies).collect();
    let series = EventSeries::from_events("py", events, &gaps).map_err(to_py)?;
    let series = ingest::filter_energy(&series, energy_lo, energy_hi).map_err(to_py)?;
    Ok(ingest::pit_values(&series))
}

fn classes(labels: &[String]) -> PyResult<Vec<SourceClass>> {
    labels.iter().map(|l| l.parse().map_err(to_py)).collect()
}

#[pyclass(name = "QdaModel", module = "pitdist")]
struct PyQdaModel {
    inner: QdaModel,
}

#[pymethods]
impl PyQdaModel {
    /// Fits on 2-D points with labels NM, HO or LO.
    #[staticmethod]
    #[pyo3(signature = (points, labels, ridge = 0.0))]
    fn fit(points: Vec<[f64; 2]>, labels: Vec<String>, ridge: f64) -> PyResult<Self> {
        Ok(Self {
            inner: classify::fit_qda(&points, &classes(&labels)?, ridge).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: QdaModel::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    /// `(class, {class: posterior})`.
    fn predict(&self, point: [f64; 2]) -> PyResult<(String, HashMap<String, f64>)> {
        let r = self.inner.predict(&point).map_err(to_py)?;
        let post = r.posteriors.iter().map(|(c, p)| (c.to_string(), *p)).collect();
        Ok((r.class.to_string(), post))
    }
}

#[pyfunction]
fn knn_predict(points: Vec<[f64; 2]>, labels: Vec<String>, k: usize, point: [f64; 2]) -> PyResult<String> {
    Ok(classify::knn_predict(&points, &classes(&labels)?, k, &point)
        .map_err(to_py)?
        .to_string())
}

#[pymodule]
fn pitdist(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(distances, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(null_law, m)?)?;
    m.add_function(wrap_pyfunction!(limit_law, m)?)?;
    m.add_function(wrap_pyfunction!(gof, m)?)?;
    m.add_function(wrap_pyfunction!(extract_pits, m)?)?;
    m.add_function(wrap_pyfunction!(knn_predict, m)?)?;
    m.add_class::<PyRefDistribution>()?;
    m.add_class::<PyQdaModel>()?;
    Ok(())
}
