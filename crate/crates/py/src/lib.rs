//! Python bindings: build and run scenarios, read their results, and drive
//! the two per-process controllers directly.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tiersim::sim::NS_PER_SEC;
use tiersim::{AdaptiveConfig, ProcessId, RestartAction, RunReport, ScenarioConfig, StopAction};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(format!("{e:#}"))
}

/// A parsed scenario configuration.
#[pyclass(module = "tiersim_py", from_py_object)]
#[derive(Clone)]
struct Scenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl Scenario {
    /// Parse configuration text. Relative trace paths resolve against
    /// `base_dir`.
    #[new]
    #[pyo3(signature = (text, base_dir="."))]
    fn new(text: &str, base_dir: &str) -> PyResult<Self> {
        let cfg = ScenarioConfig::parse(text, Path::new(base_dir)).map_err(value_err)?;
        Ok(Self { cfg })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ScenarioConfig::load(Path::new(path)).map(|cfg| Self { cfg }).map_err(value_err)
    }

    /// The three-phase microbenchmark with `phase_s` seconds per phase.
    #[staticmethod]
    #[pyo3(signature = (phase_s=300))]
    fn phased_micro(phase_s: u64) -> Self {
        Self { cfg: ScenarioConfig::phased_micro_default(phase_s) }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.cfg.seed = seed;
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.cfg.policy.name()
    }

    #[setter]
    fn set_policy(&mut self, policy: &str) -> PyResult<()> {
        self.cfg.policy = policy.parse().map_err(value_err)?;
        Ok(())
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.cfg.duration_ns as f64 / NS_PER_SEC as f64
    }

    #[setter]
    fn set_duration_s(&mut self, s: f64) -> PyResult<()> {
        if !(s > 0.0) {
            return Err(value_err("duration_s must be > 0"));
        }
        self.cfg.duration_ns = (s * NS_PER_SEC as f64).round() as u64;
        Ok(())
    }

    #[getter]
    fn tenants(&self) -> Vec<String> {
        self.cfg.tenants.iter().map(|t| t.label.clone()).collect()
    }

    /// Run to completion. The GIL is released while the simulation runs.
    fn run(&self, py: Python<'_>) -> PyResult<Report> {
        let cfg = self.cfg.clone();
        let report = py.detach(move || tiersim::run_scenario(&cfg)).map_err(runtime_err)?;
        Ok(Report { report })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(policy={}, seed={}, duration_s={}, tenants={})",
            self.cfg.policy,
            self.cfg.seed,
            self.duration_s(),
            self.cfg.tenants.len()
        )
    }
}

/// Results of one run.
#[pyclass(module = "tiersim_py", frozen)]
struct Report {
    report: RunReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn policy(&self) -> &'static str {
        self.report.policy.name()
    }

    #[getter]
    fn total_cost_ns(&self) -> u64 {
        self.report.total_cost_ns()
    }

    /// Per-process `(label, total_cost_ns, promotions, demotions, stops,
    /// restarts)`.
    fn processes(&self) -> Vec<(String, u64, u64, u64, u64, u64)> {
        self.report
            .processes
            .iter()
            .map(|p| {
                let l = &p.ledger;
                (p.label.clone(), l.total(), l.promotions, l.demotions, l.stops, l.restarts)
            })
            .collect()
    }

    /// `(time_s, on)` for each toggle of `process`.
    fn toggles(&self, process: u32) -> Vec<(f64, bool)> {
        self.report
            .toggles_for(ProcessId(process))
            .map(|t| (t.time_ns as f64 / NS_PER_SEC as f64, t.on))
            .collect()
    }

    fn first_stop_s(&self, process: u32) -> Option<f64> {
        self.report.first_stop(ProcessId(process)).map(|t| t as f64 / NS_PER_SEC as f64)
    }

    fn series_csv(&self) -> String {
        self.report.series_csv()
    }

    fn summary_csv(&self) -> String {
        self.report.summary_csv()
    }

    fn __repr__(&self) -> String {
        format!("Report(policy={}, total_cost_ns={})", self.report.policy, self.report.total_cost_ns())
    }
}

/// The slope detector that switches migration off.
#[pyclass(module = "tiersim_py", name = "ToggleState")]
struct PyToggleState {
    inner: tiersim::ToggleState,
}

#[pymethods]
impl PyToggleState {
    #[new]
    fn new() -> Self {
        Self { inner: tiersim::ToggleState::new() }
    }

    /// Feed one slope. Returns True when this evaluation switches migration
    /// off.
    #[pyo3(signature = (slope, stop_streak=None, varying_min=None))]
    fn evaluate_stop(&mut self, slope: u64, stop_streak: Option<u32>, varying_min: Option<u32>) -> bool {
        let d = AdaptiveConfig::default();
        let k = stop_streak.unwrap_or(d.stop_streak);
        let m = varying_min.unwrap_or(d.varying_min);
        self.inner.evaluate_stop(slope, k, m) == StopAction::DisableMigration
    }

    #[getter]
    fn migration_on(&self) -> bool {
        self.inner.migration_on
    }

    #[getter]
    fn slope_state(&self) -> &'static str {
        self.inner.slope_state.name()
    }

    #[getter]
    fn stop_threshold(&self) -> u64 {
        self.inner.stop_threshold
    }

    #[getter]
    fn stabilized_streak(&self) -> u32 {
        self.inner.stabilized_streak
    }

    #[getter]
    fn varying_streak(&self) -> u32 {
        self.inner.varying_streak
    }
}

/// The access-count variation detector that switches migration back on.
#[pyclass(module = "tiersim_py", name = "RestartState")]
struct PyRestartState {
    inner: tiersim::RestartState,
}

#[pymethods]
impl PyRestartState {
    #[new]
    #[pyo3(signature = (capacity=None))]
    fn new(capacity: Option<usize>) -> PyResult<Self> {
        let capacity = capacity.unwrap_or(AdaptiveConfig::default().window_capacity);
        if capacity == 0 {
            return Err(value_err("capacity must be > 0"));
        }
        Ok(Self { inner: tiersim::RestartState::new(capacity) })
    }

    /// Feed one access count. Returns True when migration should restart.
    #[pyo3(signature = (count, threshold=None))]
    fn evaluate_restart(&mut self, count: u64, threshold: Option<u32>) -> bool {
        let thr = threshold.unwrap_or(AdaptiveConfig::default().restart_threshold);
        self.inner.evaluate_restart(count, thr) == RestartAction::Restart
    }

    #[getter]
    fn count_variation(&self) -> u32 {
        self.inner.count_variation
    }

    #[getter]
    fn stabilized(&self) -> bool {
        self.inner.variation_state == tiersim::VariationState::Stabilized
    }

    fn window(&self) -> Vec<u64> {
        self.inner.window().collect()
    }

    fn reset(&mut self) {
        self.inner.reset();
    }
}

/// Parse trace text into `(t_ns, pid, page, is_write)` tuples.
#[pyfunction]
fn parse_trace(text: &str) -> PyResult<Vec<(u64, u32, u64, bool)>> {
    let records = tiersim::workload::parse_trace(text).map_err(value_err)?;
    Ok(records
        .into_iter()
        .map(|r| (r.t_ns, r.pid, r.page, r.kind == tiersim::AccessKind::Write))
        .collect())
}

/// Run `baseline` and each scenario in `others` on the same workload and
/// return `(name, policy, total_cost_ns, ratio)` rows, baseline first.
#[pyfunction]
fn compare(py: Python<'_>, baseline: &Scenario, others: Vec<(String, Scenario)>) -> PyResult<Vec<(String, String, u64, f64)>> {
    let base = baseline.cfg.clone();
    let table = py
        .detach(move || {
            let refs: Vec<(&str, &ScenarioConfig)> = others.iter().map(|(n, s)| (n.as_str(), &s.cfg)).collect();
            tiersim::compare(("baseline", &base), &refs)
        })
        .map_err(runtime_err)?;
    Ok(std::iter::once(&table.baseline)
        .chain(&table.rows)
        .map(|r| (r.name.clone(), r.policy.to_string(), r.total_cost_ns, r.ratio))
        .collect())
}

#[pymodule]
fn tiersim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Report>()?;
    m.add_class::<PyToggleState>()?;
    m.add_class::<PyRestartState>()?;
    m.add_function(wrap_pyfunction!(parse_trace, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
