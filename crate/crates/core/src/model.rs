//! Workflow, fleet and configuration types.
//!
//! A workflow is a DAG of tasks. Every task carries a demand vector with one
//! normalized share per resource type, and every edge carries the time spent
//! shipping data from its source task to its destination task. Servers carry
//! capacity vectors over the same resource types.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TaskId = u32;
pub type ServerId = u32;

/// Absolute tolerance used for score comparisons and float bookkeeping.
pub const EPS: f64 = 1e-9;

/// One non-negative amount per resource type.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, other: &ResourceVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &ResourceVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    /// Componentwise subtraction. Values within float noise of zero are
    /// snapped to exactly zero.
    pub fn sub_assign(&mut self, other: &ResourceVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= b;
            if a.abs() < 1e-12 {
                *a = 0.0;
            }
        }
    }

    /// `true` iff every component of `self` is at most the matching component of `bound`.
    pub fn fits_within(&self, bound: &ResourceVector) -> bool {
        self.len() == bound.len() && self.0.iter().zip(&bound.0).all(|(d, r)| *d <= *r + 1e-12)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ResourceVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for ResourceVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub demand: ResourceVector,
    /// Time the task needs to ship its output.
    pub send_time: f64,
}

impl Task {
    pub fn new(id: TaskId, demand: impl Into<ResourceVector>, send_time: f64) -> Self {
        Self {
            id,
            demand: demand.into(),
            send_time,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: TaskId,
    pub dst: TaskId,
    pub weight: f64,
}

impl Edge {
    pub fn new(src: TaskId, dst: TaskId, weight: f64) -> Self {
        Self { src, dst, weight }
    }
}

/// Weighted task graph.
///
/// Construction never fails so that malformed graphs can still be inspected
/// with [`validate`]. Tasks are kept sorted by id, so index order and id
/// order coincide.
#[derive(Clone, Debug)]
pub struct WorkflowDag {
    resources: Vec<String>,
    tasks: Vec<Task>,
    edges: Vec<Edge>,
    index: HashMap<TaskId, usize>,
    // endpoint indices per edge; None when either endpoint is unknown
    ends: Vec<Option<(usize, usize)>>,
    succ: Vec<Vec<(usize, f64)>>,
    pred: Vec<Vec<(usize, f64)>>,
}

impl WorkflowDag {
    pub fn new(resources: Vec<String>, mut tasks: Vec<Task>, edges: Vec<Edge>) -> Self {
        tasks.sort_by_key(|t| t.id);
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            index.entry(t.id).or_insert(i);
        }
        let n = tasks.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        let ends = edges
            .iter()
            .map(|e| {
                let ends = (*index.get(&e.src)?, *index.get(&e.dst)?);
                if ends.0 != ends.1 {
                    succ[ends.0].push((ends.1, e.weight));
                    pred[ends.1].push((ends.0, e.weight));
                }
                Some(ends)
            })
            .collect();
        Self {
            resources,
            tasks,
            edges,
            index,
            ends,
            succ,
            pred,
        }
    }

    /// Builds a workflow from its document form without validating it.
    /// Edges without a weight take their source's send time.
    pub fn from_doc_unchecked(doc: WorkflowDoc) -> Self {
        let send: HashMap<TaskId, f64> = doc.tasks.iter().map(|t| (t.id, t.send_time)).collect();
        let tasks = doc
            .tasks
            .into_iter()
            .map(|t| Task::new(t.id, t.demand, t.send_time))
            .collect();
        let edges = doc
            .edges
            .into_iter()
            .map(|e| {
                let weight = e
                    .weight
                    .unwrap_or_else(|| send.get(&e.src).copied().unwrap_or(0.0));
                Edge::new(e.src, e.dst, weight)
            })
            .collect();
        Self::new(doc.resources, tasks, edges)
    }

    /// Builds and fully validates a workflow from its document form.
    pub fn from_doc(doc: WorkflowDoc) -> Result<Self> {
        let dag = Self::from_doc_unchecked(doc);
        let report = dag.validate();
        if report.is_empty() {
            Ok(dag)
        } else {
            Err(Error::InvalidWorkflow(report))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn to_doc(&self) -> WorkflowDoc {
        WorkflowDoc {
            resources: self.resources.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskDoc {
                    id: t.id,
                    demand: t.demand.clone(),
                    send_time: t.send_time,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    src: e.src,
                    dst: e.dst,
                    weight: Some(e.weight),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("workflow document serializes")
    }

    /// Hex SHA-256 of the canonical JSON document.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_doc()).expect("workflow document serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.tasks.iter().map(|t| t.id)
    }

    pub fn index_of(&self, id: TaskId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownTask(id))
    }

    pub fn task(&self, id: TaskId) -> Result<&Task> {
        Ok(&self.tasks[self.index_of(id)?])
    }

    /// Edge endpoints as task indices, skipping edges with unknown endpoints.
    pub(crate) fn indexed_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.ends
            .iter()
            .zip(&self.edges)
            .filter_map(|(ends, e)| ends.map(|(p, q)| (p, q, e.weight)))
    }

    pub(crate) fn successors(&self, i: usize) -> &[(usize, f64)] {
        &self.succ[i]
    }

    pub(crate) fn predecessors(&self, i: usize) -> &[(usize, f64)] {
        &self.pred[i]
    }

    /// Sum of weights of all edges touching task index `i`, in either direction.
    pub(crate) fn incident_weight(&self, i: usize) -> f64 {
        self.succ[i]
            .iter()
            .chain(&self.pred[i])
            .map(|(_, w)| w)
            .sum()
    }

    pub(crate) fn has_dangling_edges(&self) -> bool {
        self.ends.iter().any(Option::is_none)
    }

    /// Structural checks on the workflow alone.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let r = self.resources.len();

        let mut seen = HashSet::new();
        for t in &self.tasks {
            if !seen.insert(t.id) {
                violations.push(Violation::DuplicateTask { task: t.id });
            }
            if t.demand.len() != r {
                violations.push(Violation::DemandLength {
                    task: t.id,
                    expected: r,
                    found: t.demand.len(),
                });
            }
            for (k, &v) in t.demand.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    violations.push(Violation::DemandOutOfRange {
                        task: t.id,
                        resource: k,
                        value: v,
                    });
                }
            }
            if !(t.send_time >= 0.0 && t.send_time.is_finite()) {
                violations.push(Violation::NegativeSendTime {
                    task: t.id,
                    value: t.send_time,
                });
            }
        }

        let mut pairs = HashSet::new();
        for (e, ends) in self.edges.iter().zip(&self.ends) {
            if ends.is_none() {
                violations.push(Violation::DanglingEdge {
                    src: e.src,
                    dst: e.dst,
                });
            }
            if e.src == e.dst {
                violations.push(Violation::SelfLoop { task: e.src });
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                violations.push(Violation::NegativeEdgeWeight {
                    src: e.src,
                    dst: e.dst,
                    value: e.weight,
                });
            }
            if !pairs.insert((e.src, e.dst)) {
                violations.push(Violation::DuplicateEdge {
                    src: e.src,
                    dst: e.dst,
                });
            }
        }

        if let Err(Error::Cycle(member)) = crate::graph::kahn_order(self) {
            violations.push(Violation::Cycle { member });
        }
        ValidationReport { violations }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkflowDoc {
    pub resources: Vec<String>,
    pub tasks: Vec<TaskDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDoc {
    pub id: TaskId,
    pub demand: ResourceVector,
    #[serde(default)]
    pub send_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub src: TaskId,
    pub dst: TaskId,
    /// Defaults to the source task's send time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: ServerId,
    pub capacity: ResourceVector,
}

impl Server {
    pub fn new(id: ServerId, capacity: impl Into<ResourceVector>) -> Self {
        Self {
            id,
            capacity: capacity.into(),
        }
    }
}

/// Servers sorted by ascending id, all sharing one list of resource names.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerFleet {
    resource_names: Vec<String>,
    servers: Vec<Server>,
}

impl ServerFleet {
    pub fn new(resource_names: Vec<String>, mut servers: Vec<Server>) -> Result<Self> {
        servers.sort_by_key(|s| s.id);
        let r = resource_names.len();
        for pair in servers.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::InvalidFleet(format!(
                    "duplicate server id {}",
                    pair[0].id
                )));
            }
        }
        for s in &servers {
            if s.capacity.len() != r {
                return Err(Error::InvalidFleet(format!(
                    "server {} has {} capacities for {} resource types",
                    s.id,
                    s.capacity.len(),
                    r
                )));
            }
            if let Some(k) = s.capacity.iter().position(|c| !(*c > 0.0 && c.is_finite())) {
                return Err(Error::InvalidFleet(format!(
                    "server {} has non-positive capacity {} for resource {}",
                    s.id, s.capacity[k], resource_names[k]
                )));
            }
        }
        Ok(Self {
            resource_names,
            servers,
        })
    }

    pub fn from_doc(doc: FleetDoc) -> Result<Self> {
        Self::new(doc.resources, doc.servers)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn to_doc(&self) -> FleetDoc {
        FleetDoc {
            resources: self.resource_names.clone(),
            servers: self.servers.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("fleet document serializes")
    }

    pub fn resource_names(&self) -> &[String] {
        &self.resource_names
    }

    pub fn resource_count(&self) -> usize {
        self.resource_names.len()
    }

    pub fn servers(&self) -> &[Server] {
        &self.servers
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    /// Position of the named resource, matched case-insensitively.
    pub fn resource_index(&self, name: &str) -> Option<usize> {
        self.resource_names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Componentwise sum of all capacities.
    pub fn total_capacity(&self) -> ResourceVector {
        let mut total = ResourceVector::zeros(self.resource_count());
        for s in &self.servers {
            total.add_assign(&s.capacity);
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetDoc {
    pub resources: Vec<String>,
    pub servers: Vec<Server>,
}

/// How per-set demand enters the balance cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// One scalar per set: the sum of its demand over every resource type.
    #[default]
    Aggregate,
    /// The balance cost is applied to each resource type and summed.
    PerResource,
}

/// Order in which tasks left over after seeding are assigned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentOrder {
    #[default]
    AscendingId,
    Topological,
}

/// Scale of the vertex and edge weights seen by the partitioner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScale {
    /// Demands and edge weights as given.
    #[default]
    Raw,
    /// Each demand column and the edge weights rescaled to mean 1, the unit
    /// scale that the `E`, `T / C` normalization of the objective assumes.
    UnitMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    /// Weight of the communication term.
    pub mu_c: f64,
    /// Weight of the balance term.
    pub mu_b: f64,
    /// Balance exponent, at least 1.
    pub theta: f64,
    pub container_count: usize,
    pub seed: u64,
    pub balance_mode: BalanceMode,
    pub assignment_order: AssignmentOrder,
    pub weight_scale: WeightScale,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            mu_c: 0.5,
            mu_b: 0.5,
            theta: 1.5,
            container_count: 1,
            seed: 0,
            balance_mode: BalanceMode::Aggregate,
            assignment_order: AssignmentOrder::AscendingId,
            weight_scale: WeightScale::Raw,
        }
    }
}

impl SchedulerConfig {
    pub fn with_containers(container_count: usize) -> Self {
        Self {
            container_count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu_c) {
            return Err(Error::InvalidConfig(format!(
                "mu_c = {} outside [0, 1]",
                self.mu_c
            )));
        }
        if !(0.0..=1.0).contains(&self.mu_b) {
            return Err(Error::InvalidConfig(format!(
                "mu_b = {} outside [0, 1]",
                self.mu_b
            )));
        }
        if !(self.theta >= 1.0 && self.theta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "theta = {} must be >= 1",
                self.theta
            )));
        }
        if self.container_count == 0 {
            return Err(Error::InvalidConfig("container_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// A single broken invariant of a workflow or of a workflow/fleet pairing.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateTask {
        task: TaskId,
    },
    DemandLength {
        task: TaskId,
        expected: usize,
        found: usize,
    },
    DemandOutOfRange {
        task: TaskId,
        resource: usize,
        value: f64,
    },
    NegativeSendTime {
        task: TaskId,
        value: f64,
    },
    DanglingEdge {
        src: TaskId,
        dst: TaskId,
    },
    SelfLoop {
        task: TaskId,
    },
    NegativeEdgeWeight {
        src: TaskId,
        dst: TaskId,
        value: f64,
    },
    DuplicateEdge {
        src: TaskId,
        dst: TaskId,
    },
    Cycle {
        member: TaskId,
    },
    ResourceMismatch {
        workflow: Vec<String>,
        fleet: Vec<String>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateTask { task } => write!(f, "duplicate task id {task}"),
            Violation::DemandLength {
                task,
                expected,
                found,
            } => {
                write!(
                    f,
                    "task {task} has {found} demand values, expected {expected}"
                )
            }
            Violation::DemandOutOfRange {
                task,
                resource,
                value,
            } => {
                write!(
                    f,
                    "task {task} demand {value} for resource {resource} outside [0, 1]"
                )
            }
            Violation::NegativeSendTime { task, value } => {
                write!(f, "task {task} has invalid send time {value}")
            }
            Violation::DanglingEdge { src, dst } => {
                write!(f, "edge {src}->{dst} references a missing task")
            }
            Violation::SelfLoop { task } => write!(f, "self-loop on task {task}"),
            Violation::NegativeEdgeWeight { src, dst, value } => {
                write!(f, "edge {src}->{dst} has invalid weight {value}")
            }
            Violation::DuplicateEdge { src, dst } => write!(f, "duplicate edge {src}->{dst}"),
            Violation::Cycle { member } => write!(f, "cycle through task {member}"),
            Violation::ResourceMismatch { workflow, fleet } => {
                write!(
                    f,
                    "workflow resources {workflow:?} differ from fleet resources {fleet:?}"
                )
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Every violated invariant of the workflow and of its pairing with the fleet.
pub fn validate(dag: &WorkflowDag, fleet: &ServerFleet) -> ValidationReport {
    let mut report = dag.validate();
    let same = dag.resources().len() == fleet.resource_names().len()
        && dag
            .resources()
            .iter()
            .zip(fleet.resource_names())
            .all(|(a, b)| a.eq_ignore_ascii_case(b));
    if !same {
        report.violations.push(Violation::ResourceMismatch {
            workflow: dag.resources().to_vec(),
            fleet: fleet.resource_names().to_vec(),
        });
    }
    report
}
