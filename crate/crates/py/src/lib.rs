//! Python bindings: workflows, fleets, partitions and placements as classes,
//! the algorithms as module functions. Metric records come back as dicts.

use mecsched::bench::{self, GeneratorParams};
use mecsched::metrics::evaluate_with;
use mecsched::oracle::{brute_force_joint, brute_force_partition};
use mecsched::placement::{containers_from_partition, place as place_containers, PlacementDoc};
use mecsched::{
    critical_path, objective_f, run_partition, topological_order, BalanceMode, CommNormalization,
    PartitionAlgorithm, PlacementAlgorithm, SchedulerConfig, ServerFleet, ServerId, TaskId,
    WorkflowDag,
};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(
    mecsched,
    MecschedError,
    PyException,
    "Scheduler error; `code` holds a stable identifier."
);

fn py_err(py: Python<'_>, e: mecsched::Error) -> PyErr {
    let err = MecschedError::new_err(e.to_string());
    let _ = err.value(py).setattr("code", e.code());
    err
}

trait OrPy<T> {
    fn or_py(self, py: Python<'_>) -> PyResult<T>;
}

impl<T> OrPy<T> for mecsched::Result<T> {
    fn or_py(self, py: Python<'_>) -> PyResult<T> {
        self.map_err(|e| py_err(py, e))
    }
}

/// Parses a snake_case option name through the type's serde form.
fn parse_enum<T: DeserializeOwned>(py: Python<'_>, what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase())).map_err(|_| {
        py_err(
            py,
            mecsched::Error::InvalidConfig(format!("unknown {what} {name:?}")),
        )
    })
}

fn to_py_object<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).expect("records serialize");
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Workflow", module = "mecsched", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWorkflow {
    inner: WorkflowDag,
}

#[pymethods]
impl PyWorkflow {
    #[staticmethod]
    fn from_json(py: Python<'_>, text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: WorkflowDag::from_json(text).or_py(py)?,
        })
    }

    /// Random connected workflow; identical arguments give identical output.
    #[staticmethod]
    #[pyo3(signature = (size, density = 0.1, seed = 0, max_demand = 0.05, max_weight = 5.0))]
    fn generate(
        py: Python<'_>,
        size: usize,
        density: f64,
        seed: u64,
        max_demand: f64,
        max_weight: f64,
    ) -> PyResult<Self> {
        let params = GeneratorParams {
            size,
            density,
            seed,
            max_demand,
            max_weight,
        };
        Ok(Self {
            inner: bench::generate_workflow_with(&params).or_py(py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// SHA-256 of the canonical document.
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn __len__(&self) -> usize {
        self.inner.task_count()
    }

    #[getter]
    fn task_ids(&self) -> Vec<TaskId> {
        self.inner.task_ids().collect()
    }

    #[getter]
    fn edges(&self) -> Vec<(TaskId, TaskId, f64)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.src, e.dst, e.weight))
            .collect()
    }

    #[getter]
    fn resources(&self) -> Vec<String> {
        self.inner.resources().to_vec()
    }

    fn topological_order(&self, py: Python<'_>) -> PyResult<Vec<TaskId>> {
        topological_order(&self.inner).or_py(py)
    }

    /// `{"length", "tasks", "edges"}` of the heaviest path structure.
    fn critical_path<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py_object(py, &critical_path(&self.inner).or_py(py)?)
    }

    fn __repr__(&self) -> String {
        format!(
            "Workflow(tasks={}, edges={})",
            self.inner.task_count(),
            self.inner.edge_count()
        )
    }
}

#[pyclass(name = "Fleet", module = "mecsched", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFleet {
    inner: ServerFleet,
}

#[pymethods]
impl PyFleet {
    /// The bundled ten-server fleet.
    #[staticmethod]
    fn table1() -> Self {
        Self {
            inner: bench::table1_fleet(),
        }
    }

    #[staticmethod]
    fn from_json(py: Python<'_>, text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ServerFleet::from_json(text).or_py(py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn capacities(&self) -> Vec<(ServerId, Vec<f64>)> {
        self.inner
            .servers()
            .iter()
            .map(|s| (s.id, s.capacity.as_slice().to_vec()))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Fleet(servers={})", self.inner.len())
    }
}

#[pyclass(name = "Partition", module = "mecsched", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPartition {
    inner: mecsched::Partition,
}

#[pymethods]
impl PyPartition {
    #[new]
    fn new(containers: Vec<Vec<TaskId>>) -> Self {
        Self {
            inner: mecsched::Partition::new(containers),
        }
    }

    #[staticmethod]
    fn from_json(py: Python<'_>, text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: mecsched::Partition::from_json(text).or_py(py)?,
        })
    }

    #[pyo3(signature = (workflow = None))]
    fn to_json(&self, workflow: Option<&PyWorkflow>) -> String {
        self.inner.to_json(workflow.map(|w| &w.inner))
    }

    /// Task ids of each container, ascending.
    #[getter]
    fn containers(&self) -> Vec<Vec<TaskId>> {
        self.inner.sets().to_vec()
    }

    fn container_of(&self, task: TaskId) -> Option<usize> {
        self.inner.container_of(task)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Partition({:?})", self.inner.sets())
    }
}

#[pyclass(name = "Placement", module = "mecsched", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPlacement {
    inner: mecsched::PlacementMap,
}

#[pymethods]
impl PyPlacement {
    /// Rebuilds a placement document; residuals are recomputed and checked.
    #[staticmethod]
    fn from_json(
        py: Python<'_>,
        text: &str,
        partition: &PyPartition,
        workflow: &PyWorkflow,
        fleet: &PyFleet,
    ) -> PyResult<Self> {
        let doc: PlacementDoc = serde_json::from_str(text).map_err(|e| py_err(py, e.into()))?;
        let containers = containers_from_partition(&partition.inner, &workflow.inner).or_py(py)?;
        let inner = mecsched::PlacementMap::from_doc(&doc, &containers, &fleet.inner).or_py(py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Container index to server id.
    #[getter]
    fn assignments(&self) -> Vec<(usize, ServerId)> {
        self.inner
            .assignments()
            .iter()
            .map(|(&c, &s)| (c, s))
            .collect()
    }

    fn server_of(&self, container: usize) -> Option<ServerId> {
        self.inner.server_of(container)
    }

    #[getter]
    fn residuals(&self) -> Vec<Vec<f64>> {
        self.inner
            .residuals()
            .iter()
            .map(|r| r.as_slice().to_vec())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Placement({:?})", self.inner.assignments())
    }
}

/// Objective weights, container count and seed shared by the algorithms.
#[pyclass(name = "Config", module = "mecsched", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    #[pyo3(get, set)]
    containers: usize,
    #[pyo3(get, set)]
    mu_c: f64,
    #[pyo3(get, set)]
    mu_b: f64,
    #[pyo3(get, set)]
    theta: f64,
    #[pyo3(get, set)]
    seed: u64,
    #[pyo3(get, set)]
    balance_mode: String,
    #[pyo3(get, set)]
    weight_scale: String,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (containers = 2, mu_c = 0.5, mu_b = 0.5, theta = 1.5, seed = 0, balance_mode = "aggregate".to_string(), weight_scale = "raw".to_string()))]
    fn new(
        containers: usize,
        mu_c: f64,
        mu_b: f64,
        theta: f64,
        seed: u64,
        balance_mode: String,
        weight_scale: String,
    ) -> Self {
        Self {
            containers,
            mu_c,
            mu_b,
            theta,
            seed,
            balance_mode,
            weight_scale,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(containers={}, mu_c={}, mu_b={}, theta={}, seed={}, balance_mode={:?}, weight_scale={:?})",
            self.containers, self.mu_c, self.mu_b, self.theta, self.seed, self.balance_mode, self.weight_scale
        )
    }
}

impl PyConfig {
    fn resolve(&self, py: Python<'_>) -> PyResult<SchedulerConfig> {
        let balance_mode: BalanceMode = parse_enum(py, "balance mode", &self.balance_mode)?;
        let cfg = SchedulerConfig {
            mu_c: self.mu_c,
            mu_b: self.mu_b,
            theta: self.theta,
            container_count: self.containers,
            seed: self.seed,
            balance_mode,
            weight_scale: parse_enum(py, "weight scale", &self.weight_scale)?,
            ..SchedulerConfig::default()
        };
        cfg.validate().or_py(py)?;
        Ok(cfg)
    }
}

fn resolve(py: Python<'_>, config: Option<&PyConfig>) -> PyResult<SchedulerConfig> {
    match config {
        Some(c) => c.resolve(py),
        None => PyConfig::new(2, 0.5, 0.5, 1.5, 0, "aggregate".into(), "raw".into()).resolve(py),
    }
}

fn parse_partitioner(py: Python<'_>, algo: &str) -> PyResult<PartitionAlgorithm> {
    algo.parse().or_py(py)
}

fn parse_placer(py: Python<'_>, algo: &str) -> PyResult<PlacementAlgorithm> {
    algo.parse().or_py(py)
}

/// Splits the workflow into `config.containers` containers.
#[pyfunction]
#[pyo3(signature = (workflow, config = None, algo = "ncpi"))]
fn partition(
    py: Python<'_>,
    workflow: &PyWorkflow,
    config: Option<&PyConfig>,
    algo: &str,
) -> PyResult<PyPartition> {
    let cfg = resolve(py, config)?;
    let inner = run_partition(parse_partitioner(py, algo)?, &workflow.inner, &cfg).or_py(py)?;
    Ok(PyPartition { inner })
}

/// Assigns each container of `partition` to a server of `fleet`.
#[pyfunction]
#[pyo3(signature = (workflow, partition, fleet = None, algo = "ffd"))]
fn place(
    py: Python<'_>,
    workflow: &PyWorkflow,
    partition: &PyPartition,
    fleet: Option<&PyFleet>,
    algo: &str,
) -> PyResult<PyPlacement> {
    let fleet = fleet.map_or_else(bench::table1_fleet, |f| f.inner.clone());
    let containers = containers_from_partition(&partition.inner, &workflow.inner).or_py(py)?;
    let inner = place_containers(parse_placer(py, algo)?, &containers, &fleet).or_py(py)?;
    Ok(PyPlacement { inner })
}

/// Metric record of a partition and placement, as a dict.
#[pyfunction]
#[pyo3(signature = (workflow, partition, placement, fleet = None, config = None, comm_norm = "total_edge_weight"))]
fn evaluate<'py>(
    py: Python<'py>,
    workflow: &PyWorkflow,
    partition: &PyPartition,
    placement: &PyPlacement,
    fleet: Option<&PyFleet>,
    config: Option<&PyConfig>,
    comm_norm: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let fleet = fleet.map_or_else(bench::table1_fleet, |f| f.inner.clone());
    let mut cfg = resolve(py, config)?;
    cfg.container_count = partition.inner.len();
    let norm: CommNormalization = parse_enum(py, "communication normalization", comm_norm)?;
    let m = evaluate_with(
        &partition.inner,
        &placement.inner,
        &workflow.inner,
        &fleet,
        &cfg,
        norm,
    )
    .or_py(py)?;
    to_py_object(py, &m)
}

/// Partition objective value; lower is better.
#[pyfunction]
#[pyo3(signature = (workflow, partition, config = None))]
fn objective(
    py: Python<'_>,
    workflow: &PyWorkflow,
    partition: &PyPartition,
    config: Option<&PyConfig>,
) -> PyResult<f64> {
    let mut cfg = resolve(py, config)?;
    cfg.container_count = partition.inner.len();
    Ok(objective_f(&partition.inner, &workflow.inner, &cfg)
        .or_py(py)?
        .0)
}

/// Exhaustive partition optimum: `(partition, value, candidates)`.
#[pyfunction]
#[pyo3(signature = (workflow, config = None))]
fn oracle_partition(
    py: Python<'_>,
    workflow: &PyWorkflow,
    config: Option<&PyConfig>,
) -> PyResult<(PyPartition, f64, u64)> {
    let cfg = resolve(py, config)?;
    let opt = brute_force_partition(&workflow.inner, &cfg).or_py(py)?;
    Ok((
        PyPartition {
            inner: opt.partition,
        },
        opt.value,
        opt.candidates,
    ))
}

/// Exhaustive joint optimum: `(partition, placement, value)`.
#[pyfunction]
#[pyo3(signature = (workflow, fleet, config = None))]
fn oracle_joint(
    py: Python<'_>,
    workflow: &PyWorkflow,
    fleet: &PyFleet,
    config: Option<&PyConfig>,
) -> PyResult<(PyPartition, PyPlacement, f64)> {
    let cfg = resolve(py, config)?;
    let opt = brute_force_joint(&workflow.inner, &fleet.inner, &cfg).or_py(py)?;
    Ok((
        PyPartition {
            inner: opt.partition,
        },
        PyPlacement {
            inner: opt.placement,
        },
        opt.value,
    ))
}

/// Partition, place and evaluate: `(partition, placement, metrics)`.
#[pyfunction]
#[pyo3(signature = (workflow, fleet = None, config = None, partitioner = "ncpi", placer = "ffd"))]
fn run_pipeline<'py>(
    py: Python<'py>,
    workflow: &PyWorkflow,
    fleet: Option<&PyFleet>,
    config: Option<&PyConfig>,
    partitioner: &str,
    placer: &str,
) -> PyResult<(PyPartition, PyPlacement, Bound<'py, PyAny>)> {
    let fleet = fleet.map_or_else(bench::table1_fleet, |f| f.inner.clone());
    let cfg = resolve(py, config)?;
    let out = mecsched::run_pipeline(
        &workflow.inner,
        &fleet,
        &cfg,
        parse_partitioner(py, partitioner)?,
        parse_placer(py, placer)?,
    )
    .or_py(py)?;
    let metrics = to_py_object(py, &out.metrics)?;
    Ok((
        PyPartition {
            inner: out.partition,
        },
        PyPlacement {
            inner: out.placement,
        },
        metrics,
    ))
}

/// Module initializer; also usable with `append_to_inittab!` when embedding.
#[pymodule]
#[pyo3(name = "mecsched")]
pub fn mecsched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MecschedError", m.py().get_type::<MecschedError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyWorkflow>()?;
    m.add_class::<PyFleet>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyPlacement>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(partition, m)?)?;
    m.add_function(wrap_pyfunction!(place, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_partition, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_joint, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
