//! Task containerization: grouping workflow tasks into containers.
//!
//! The objective trades the weight of edges cut between containers against a
//! convex cost `g(x) = alpha * x^theta` on each container's vertex weight. A
//! run seeds one task per container (randomly, or from tasks off the
//! critical path) and then inserts every remaining task greedily into the
//! container with the best marginal score.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{critical_path, kahn_order, total_edge_weight};
use crate::model::{
    AssignmentOrder, BalanceMode, SchedulerConfig, TaskId, WeightScale, WorkflowDag, EPS,
};

/// Disjoint task sets, one per container. Sets are kept sorted.
///
/// A partition may be partial (some tasks unassigned, some sets empty) while
/// it is being built; [`Partition::check_complete`] enforces the final shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    sets: Vec<Vec<TaskId>>,
}

impl Partition {
    pub fn new(mut sets: Vec<Vec<TaskId>>) -> Self {
        for s in &mut sets {
            s.sort_unstable();
        }
        Self { sets }
    }

    /// Builds a partition from a container label per task (in task index order).
    pub fn from_labels(dag: &WorkflowDag, labels: &[Option<usize>], containers: usize) -> Self {
        let mut sets = vec![Vec::new(); containers];
        for (t, label) in dag.tasks().iter().zip(labels) {
            if let Some(c) = label {
                sets[*c].push(t.id);
            }
        }
        Self { sets }
    }

    pub fn sets(&self) -> &[Vec<TaskId>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn container_of(&self, task: TaskId) -> Option<usize> {
        self.sets
            .iter()
            .position(|s| s.binary_search(&task).is_ok())
    }

    /// Container label per task index, after checking the sets are disjoint
    /// and only name known tasks.
    pub fn labels(&self, dag: &WorkflowDag) -> Result<Vec<Option<usize>>> {
        let mut labels = vec![None; dag.task_count()];
        for (c, set) in self.sets.iter().enumerate() {
            for &id in set {
                let i = dag.index_of(id)?;
                if let Some(prev) = labels[i] {
                    return Err(Error::InvalidPartition(format!(
                        "task {id} appears in containers {prev} and {c}"
                    )));
                }
                labels[i] = Some(c);
            }
        }
        Ok(labels)
    }

    /// Checks that the sets cover every task exactly once and none is empty.
    pub fn check_complete(&self, dag: &WorkflowDag) -> Result<Vec<usize>> {
        if self.sets.is_empty() {
            return Err(Error::InvalidPartition("no containers".into()));
        }
        if let Some(c) = self.sets.iter().position(Vec::is_empty) {
            return Err(Error::InvalidPartition(format!("container {c} is empty")));
        }
        self.labels(dag)?
            .into_iter()
            .zip(dag.tasks())
            .map(|(label, t)| {
                label.ok_or_else(|| Error::InvalidPartition(format!("task {} is unassigned", t.id)))
            })
            .collect()
    }

    pub fn to_doc(&self, dag: Option<&WorkflowDag>) -> PartitionDoc {
        let containers: Vec<ContainerDoc> = self
            .sets
            .iter()
            .enumerate()
            .map(|(id, tasks)| ContainerDoc {
                id,
                tasks: tasks.clone(),
            })
            .collect();
        let mut d_matrix: Vec<MembershipEntry> = containers
            .iter()
            .flat_map(|c| {
                c.tasks.iter().map(move |&task| MembershipEntry {
                    task,
                    container: c.id,
                })
            })
            .collect();
        d_matrix.sort_by_key(|e| (e.task, e.container));
        PartitionDoc {
            workflow: dag.map(WorkflowDag::fingerprint),
            containers,
            d_matrix,
        }
    }

    pub fn to_json(&self, dag: Option<&WorkflowDag>) -> String {
        serde_json::to_string_pretty(&self.to_doc(dag)).expect("partition document serializes")
    }

    pub fn from_doc(doc: PartitionDoc) -> Result<Self> {
        let mut containers = doc.containers;
        containers.sort_by_key(|c| c.id);
        if containers.iter().enumerate().any(|(i, c)| c.id != i) {
            return Err(Error::InvalidPartition("container ids must be 0..C".into()));
        }
        Ok(Self::new(containers.into_iter().map(|c| c.tasks).collect()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    /// Fingerprint of the partitioned workflow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workflow: Option<String>,
    pub containers: Vec<ContainerDoc>,
    /// Non-zero entries of the task-to-container matrix.
    #[serde(default)]
    pub d_matrix: Vec<MembershipEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerDoc {
    pub id: usize,
    pub tasks: Vec<TaskId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipEntry {
    pub task: TaskId,
    pub container: usize,
}

/// Parameters of the convex balance cost `g(x) = alpha * x^theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceFunctionParams {
    pub alpha: f64,
    pub theta: f64,
}

impl BalanceFunctionParams {
    /// `alpha = E * C^(theta-1) / T^theta`, with `E` floored at 1 so the cost
    /// stays positive on edgeless workflows.
    pub fn derive(edges: usize, containers: usize, tasks: usize, theta: f64) -> Self {
        let e = edges.max(1) as f64;
        let alpha = e * (containers as f64).powf(theta - 1.0) / (tasks.max(1) as f64).powf(theta);
        Self { alpha, theta }
    }

    pub fn g(&self, x: f64) -> f64 {
        self.alpha * x.powf(self.theta)
    }
}

/// Communication and balance contributions of a score or objective value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    pub comm_term: f64,
    pub balance_term: f64,
    /// `comm + balance` for objective values, `comm - balance` for insertion scores.
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Seeds drawn uniformly at random.
    Random,
    /// Seeds taken from tasks off the critical path.
    #[default]
    Ncpi,
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ri" | "random" => Ok(Self::Random),
            "ncpi" => Ok(Self::Ncpi),
            other => Err(Error::InvalidConfig(format!(
                "unknown initializer {other:?}"
            ))),
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "ri",
            Self::Ncpi => "ncpi",
        })
    }
}

/// Aggregate demand of a set of tasks over every resource type.
pub fn vertex_weight(set: &[TaskId], dag: &WorkflowDag) -> Result<f64> {
    set.iter().map(|&id| Ok(dag.task(id)?.demand.sum())).sum()
}

/// Shared evaluation state for one workflow, configuration and container count.
pub(crate) struct Scorer<'a> {
    dag: &'a WorkflowDag,
    cfg: &'a SchedulerConfig,
    containers: usize,
    params: BalanceFunctionParams,
    // balance weights per task: one entry in aggregate mode, R in per-resource mode
    weights: Vec<Vec<f64>>,
    // neighbors per task index, both directions
    neighbors: Vec<Vec<(usize, f64)>>,
    edge_scale: f64,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(dag: &'a WorkflowDag, cfg: &'a SchedulerConfig, containers: usize) -> Self {
        let n = dag.task_count();
        let params = BalanceFunctionParams::derive(dag.edge_count(), containers, n, cfg.theta);
        let mut weights: Vec<Vec<f64>> = match cfg.balance_mode {
            BalanceMode::Aggregate => dag.tasks().iter().map(|t| vec![t.demand.sum()]).collect(),
            BalanceMode::PerResource => dag
                .tasks()
                .iter()
                .map(|t| t.demand.as_slice().to_vec())
                .collect(),
        };
        if cfg.weight_scale == WeightScale::UnitMean && n > 0 {
            let k = weights.first().map_or(0, Vec::len);
            for r in 0..k {
                let total: f64 = weights.iter().map(|w| w[r]).sum();
                if total > 0.0 {
                    let scale = n as f64 / total;
                    weights.iter_mut().for_each(|w| w[r] *= scale);
                }
            }
        }
        let mut edge_scale = 1.0;
        if cfg.weight_scale == WeightScale::UnitMean {
            let total = total_edge_weight(dag);
            if total > 0.0 {
                edge_scale = dag.edge_count() as f64 / total;
            }
        }
        let neighbors = (0..n)
            .map(|i| {
                dag.successors(i)
                    .iter()
                    .chain(dag.predecessors(i))
                    .map(|&(j, w)| (j, w * edge_scale))
                    .collect()
            })
            .collect();
        Self {
            dag,
            cfg,
            containers,
            params,
            weights,
            neighbors,
            edge_scale,
        }
    }

    fn dims(&self) -> usize {
        self.weights.first().map_or(1, Vec::len)
    }

    pub(crate) fn loads(&self, labels: &[Option<usize>]) -> Vec<Vec<f64>> {
        let mut loads = vec![vec![0.0; self.dims()]; self.containers];
        for (w, label) in self.weights.iter().zip(labels) {
            if let Some(c) = label {
                for (l, x) in loads[*c].iter_mut().zip(w) {
                    *l += x;
                }
            }
        }
        loads
    }

    /// Objective value of a (possibly partial) labelling. Every set counts the
    /// edges leaving it, so an edge between two sets is counted twice and an
    /// edge to an unassigned task once.
    pub(crate) fn objective(&self, labels: &[Option<usize>]) -> ScoreBreakdown {
        let mut cut = 0.0;
        for (p, q, w) in self.dag.indexed_edges() {
            let (a, b) = (labels[p], labels[q]);
            if a != b {
                cut += w * self.edge_scale * (a.is_some() as u8 + b.is_some() as u8) as f64;
            }
        }
        let c = self.containers as f64;
        let per_set = self.dag.task_count().max(1) as f64 / c;
        let balance: f64 = self
            .loads(labels)
            .iter()
            .flatten()
            .map(|x| (x / per_set).powf(self.params.theta))
            .sum::<f64>()
            / c;
        let comm_term = self.cfg.mu_c * cut / self.dag.edge_count().max(1) as f64;
        let balance_term = self.cfg.mu_b * balance;
        ScoreBreakdown {
            comm_term,
            balance_term,
            total: comm_term + balance_term,
        }
    }

    /// Marginal score of inserting unassigned task `t` into container `target`.
    ///
    /// The balance penalty carries a factor 1/2 so that the score is exactly
    /// `-(E/2)` times the change in [`Scorer::objective`]: the objective counts
    /// each cut edge from both sides, the gain only once.
    pub(crate) fn insertion_score(
        &self,
        t: usize,
        target: usize,
        labels: &[Option<usize>],
        loads: &[Vec<f64>],
    ) -> ScoreBreakdown {
        let linked: f64 = self.neighbors[t]
            .iter()
            .filter(|(n, _)| labels[*n] == Some(target))
            .map(|(_, w)| w)
            .sum();
        let growth: f64 = loads[target]
            .iter()
            .zip(&self.weights[t])
            .map(|(x, w)| self.params.g(x + w) - self.params.g(*x))
            .sum();
        let comm_term = self.cfg.mu_c * linked;
        let balance_term = 0.5 * self.cfg.mu_b * growth;
        ScoreBreakdown {
            comm_term,
            balance_term,
            total: comm_term - balance_term,
        }
    }

    fn add(&self, t: usize, target: usize, loads: &mut [Vec<f64>]) {
        for (l, w) in loads[target].iter_mut().zip(&self.weights[t]) {
            *l += w;
        }
    }
}

/// Objective value of a partition (complete or partial).
///
/// `f = mu_c * sum_i cut(A_i) / E + mu_b * (1/C) * sum_i (w(A_i) / (T/C))^theta`.
pub fn objective_f(
    p: &Partition,
    dag: &WorkflowDag,
    cfg: &SchedulerConfig,
) -> Result<(f64, ScoreBreakdown)> {
    if p.is_empty() {
        return Err(Error::InvalidPartition("no containers".into()));
    }
    let labels = p.labels(dag)?;
    let score = Scorer::new(dag, cfg, p.len()).objective(&labels);
    Ok((score.total, score))
}

/// Score of inserting the unassigned task `task` into set `target` of `p`.
pub fn delta_score(
    task: TaskId,
    target: usize,
    p: &Partition,
    dag: &WorkflowDag,
    cfg: &SchedulerConfig,
) -> Result<ScoreBreakdown> {
    let labels = p.labels(dag)?;
    let t = dag.index_of(task)?;
    if labels[t].is_some() {
        return Err(Error::AlreadyAssigned(task));
    }
    if target >= p.len() {
        return Err(Error::InvalidPartition(format!(
            "target set {target} out of range for {} sets",
            p.len()
        )));
    }
    let scorer = Scorer::new(dag, cfg, p.len());
    let loads = scorer.loads(&labels);
    Ok(scorer.insertion_score(t, target, &labels, &loads))
}

/// Index of the largest value; values within [`EPS`] of the maximum tie and
/// the lowest index wins.
pub(crate) fn argmax_tolerant(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|v| *v >= best - EPS).unwrap_or(0)
}

fn check_seedable(dag: &WorkflowDag, cfg: &SchedulerConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.container_count > dag.task_count() {
        return Err(Error::TooManyContainers {
            containers: cfg.container_count,
            tasks: dag.task_count(),
        });
    }
    Ok(())
}

/// `C` distinct seed tasks drawn uniformly without replacement.
pub fn init_random(dag: &WorkflowDag, cfg: &SchedulerConfig) -> Result<Partition> {
    check_seedable(dag, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let picks = rand::seq::index::sample(&mut rng, dag.task_count(), cfg.container_count);
    Ok(Partition::new(
        picks.into_iter().map(|i| vec![dag.tasks()[i].id]).collect(),
    ))
}

/// `C` seed tasks taken off the critical path, lightest total incident edge
/// weight first. Critical tasks fill any shortfall in the same order.
pub fn init_ncpi(dag: &WorkflowDag, cfg: &SchedulerConfig) -> Result<Partition> {
    check_seedable(dag, cfg)?;
    let cp = critical_path(dag)?;
    let mut ranked: Vec<(bool, f64, TaskId)> = dag
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, t)| (cp.is_critical(t.id), dag.incident_weight(i), t.id))
        .collect();
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(Partition::new(
        ranked
            .into_iter()
            .take(cfg.container_count)
            .map(|(_, _, id)| vec![id])
            .collect(),
    ))
}

/// One greedy insertion: the scores of every candidate set and the winner.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyStep {
    pub task: TaskId,
    pub scores: Vec<ScoreBreakdown>,
    pub chosen: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionTrace {
    pub seeds: Vec<Vec<TaskId>>,
    pub steps: Vec<GreedyStep>,
}

/// Seeds the containers, then inserts remaining tasks one by one into the
/// highest-scoring set.
pub fn partition_tasks(
    dag: &WorkflowDag,
    cfg: &SchedulerConfig,
    init: InitStrategy,
) -> Result<Partition> {
    partition_with_trace(dag, cfg, init).map(|(p, _)| p)
}

pub fn partition_with_trace(
    dag: &WorkflowDag,
    cfg: &SchedulerConfig,
    init: InitStrategy,
) -> Result<(Partition, PartitionTrace)> {
    let seeds = match init {
        InitStrategy::Random => init_random(dag, cfg)?,
        InitStrategy::Ncpi => init_ncpi(dag, cfg)?,
    };
    let containers = seeds.len();
    let scorer = Scorer::new(dag, cfg, containers);
    let mut labels = seeds.labels(dag)?;
    let mut loads = scorer.loads(&labels);

    let order: Vec<usize> = match cfg.assignment_order {
        AssignmentOrder::AscendingId => (0..dag.task_count()).collect(),
        AssignmentOrder::Topological => kahn_order(dag)?,
    };
    let mut steps = Vec::with_capacity(dag.task_count() - containers);
    for t in order {
        if labels[t].is_some() {
            continue;
        }
        let scores: Vec<ScoreBreakdown> = (0..containers)
            .map(|c| scorer.insertion_score(t, c, &labels, &loads))
            .collect();
        let totals: Vec<f64> = scores.iter().map(|s| s.total).collect();
        let chosen = argmax_tolerant(&totals);
        labels[t] = Some(chosen);
        scorer.add(t, chosen, &mut loads);
        steps.push(GreedyStep {
            task: dag.tasks()[t].id,
            scores,
            chosen,
        });
    }
    let trace = PartitionTrace {
        seeds: seeds.sets().to_vec(),
        steps,
    };
    Ok((Partition::from_labels(dag, &labels, containers), trace))
}

/// `C * max_j sum_k beta_jk / sum_j sum_k beta_jk`; 1 means perfectly even.
pub fn normalized_max_load(p: &Partition, dag: &WorkflowDag) -> Result<f64> {
    p.labels(dag)?;
    if p.is_empty() {
        return Err(Error::InvalidPartition("no containers".into()));
    }
    if let Some(c) = p.sets().iter().position(Vec::is_empty) {
        return Err(Error::InvalidPartition(format!("container {c} is empty")));
    }
    let loads: Vec<f64> = p
        .sets()
        .iter()
        .map(|s| vertex_weight(s, dag))
        .collect::<Result<_>>()?;
    let total: f64 = loads.iter().sum();
    if total <= 0.0 {
        return Ok(1.0);
    }
    let max = loads.iter().copied().fold(0.0, f64::max);
    Ok(p.len() as f64 * max / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, w4};
    use crate::model::{Edge, Task};

    fn cfg(c: usize) -> SchedulerConfig {
        SchedulerConfig::with_containers(c)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn vertex_weights() {
        let dag = w4();
        assert!(close(vertex_weight(&[1, 2], &dag).unwrap(), 0.70));
        assert_eq!(vertex_weight(&[], &dag).unwrap(), 0.0);
        assert!(close(vertex_weight(&[1, 2, 3, 4], &dag).unwrap(), 1.30));
        assert!(matches!(
            vertex_weight(&[7], &dag),
            Err(Error::UnknownTask(7))
        ));
    }

    #[test]
    fn objective_on_w4() {
        let dag = w4();
        let p = Partition::new(vec![vec![1, 3, 4], vec![2]]);
        let (f, parts) = objective_f(&p, &dag, &cfg(2)).unwrap();
        // cut counted from both sides: 2 * (2 + 1) over E = 4
        let comm = 0.5 * 6.0 / 4.0;
        let balance = 0.5 * ((0.9f64 / 2.0).powf(1.5) + (0.4f64 / 2.0).powf(1.5)) / 2.0;
        assert!(close(parts.comm_term, comm));
        assert!(close(parts.balance_term, balance));
        assert!(close(f, comm + balance));

        let no_balance = SchedulerConfig {
            mu_b: 0.0,
            ..cfg(2)
        };
        assert!(close(objective_f(&p, &dag, &no_balance).unwrap().0, 0.75));
    }

    #[test]
    fn single_container_objective_is_pure_balance() {
        let dag = w4();
        let p = Partition::new(vec![vec![1, 2, 3, 4]]);
        let (f, parts) = objective_f(&p, &dag, &cfg(1)).unwrap();
        assert_eq!(parts.comm_term, 0.0);
        assert!(close(f, 0.5 * (1.3f64 / 4.0).powf(1.5)));
    }

    #[test]
    fn objective_rejects_overlap() {
        let p = Partition::new(vec![vec![1, 2], vec![2, 3, 4]]);
        assert!(matches!(
            objective_f(&p, &w4(), &cfg(2)),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn random_init_is_seeded() {
        let dag = w4();
        let a = init_random(&dag, &SchedulerConfig { seed: 42, ..cfg(2) }).unwrap();
        let b = init_random(&dag, &SchedulerConfig { seed: 42, ..cfg(2) }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a.sets().iter().all(|s| s.len() == 1));
        assert_ne!(a.sets()[0], a.sets()[1]);

        let all = init_random(&dag, &cfg(4)).unwrap();
        let mut ids: Vec<_> = all.sets().iter().flatten().copied().collect();
        ids.sort_unstable();
        assert_eq!(ids, vec![1, 2, 3, 4]);

        assert!(matches!(
            init_random(&dag, &cfg(5)),
            Err(Error::TooManyContainers {
                containers: 5,
                tasks: 4
            })
        ));
    }

    #[test]
    fn ncpi_seeds() {
        let dag = w4();
        assert_eq!(init_ncpi(&dag, &cfg(1)).unwrap().sets(), &[vec![2]]);
        assert_eq!(
            init_ncpi(&dag, &cfg(2)).unwrap().sets(),
            &[vec![2], vec![1]]
        );
        let chain = init_ncpi(&chain3(), &cfg(3)).unwrap();
        assert_eq!(chain.sets().iter().flatten().count(), 3);
        assert!(matches!(
            init_ncpi(&dag, &cfg(5)),
            Err(Error::TooManyContainers { .. })
        ));
    }

    #[test]
    fn delta_comm_gain_on_w4() {
        let dag = w4();
        let p = Partition::new(vec![vec![1], vec![2]]);
        let to_first = delta_score(3, 0, &p, &dag, &cfg(2)).unwrap();
        let to_second = delta_score(3, 1, &p, &dag, &cfg(2)).unwrap();
        assert!(close(to_first.comm_term, 1.5));
        assert_eq!(to_second.comm_term, 0.0);
        assert!(close(
            to_first.total,
            to_first.comm_term - to_first.balance_term
        ));
    }

    #[test]
    fn delta_errors() {
        let dag = w4();
        let p = Partition::new(vec![vec![1], vec![2]]);
        assert!(matches!(
            delta_score(1, 0, &p, &dag, &cfg(2)),
            Err(Error::AlreadyAssigned(1))
        ));
        assert!(matches!(
            delta_score(3, 2, &p, &dag, &cfg(2)),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            delta_score(8, 0, &p, &dag, &cfg(2)),
            Err(Error::UnknownTask(8))
        ));
    }

    #[test]
    fn zero_comm_weight_leaves_only_balance() {
        let dag = w4();
        let p = Partition::new(vec![vec![1], vec![2]]);
        let c = SchedulerConfig {
            mu_c: 0.0,
            ..cfg(2)
        };
        for target in 0..2 {
            let s = delta_score(3, target, &p, &dag, &c).unwrap();
            assert_eq!(s.comm_term, 0.0);
            assert!(s.balance_term > 0.0);
        }
    }

    #[test]
    fn isolated_task_ties_go_to_lowest_set() {
        let dag = WorkflowDag::new(
            vec!["cpu".into()],
            (1..=3).map(|i| Task::new(i, vec![0.1], 0.0)).collect(),
            vec![],
        );
        let (p, trace) = partition_with_trace(&dag, &cfg(2), InitStrategy::Ncpi).unwrap();
        assert_eq!(trace.steps.len(), 1);
        let s = &trace.steps[0].scores;
        assert_eq!(s[0], s[1]);
        assert_eq!(trace.steps[0].chosen, 0);
        assert_eq!(p.sets(), &[vec![1, 3], vec![2]]);
    }

    #[test]
    fn single_container_takes_everything() {
        for init in [InitStrategy::Random, InitStrategy::Ncpi] {
            let p = partition_tasks(&w4(), &cfg(1), init).unwrap();
            assert_eq!(p.sets(), &[vec![1, 2, 3, 4]]);
        }
    }

    #[test]
    fn w4_greedy_is_complete_and_bounded_by_enumeration() {
        let dag = w4();
        let c = cfg(2);
        let p = partition_tasks(&dag, &c, InitStrategy::Ncpi).unwrap();
        p.check_complete(&dag).unwrap();
        let f = objective_f(&p, &dag, &c).unwrap().0;
        // every surjective 2-labelling of four tasks
        let mut values = Vec::new();
        for mask in 1u32..15 {
            let sets = vec![
                (1..=4).filter(|i| mask & (1 << (i - 1)) != 0).collect(),
                (1..=4).filter(|i| mask & (1 << (i - 1)) == 0).collect(),
            ];
            values.push(objective_f(&Partition::new(sets), &dag, &c).unwrap().0);
        }
        let best = values.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(f >= best - 1e-12 && f <= worst + 1e-12);
    }

    #[test]
    fn topological_assignment_order_is_supported() {
        let dag = WorkflowDag::new(
            vec!["cpu".into()],
            (1..=5).map(|i| Task::new(i, vec![0.1], 0.0)).collect(),
            vec![
                Edge::new(5, 1, 1.0),
                Edge::new(1, 2, 1.0),
                Edge::new(3, 4, 1.0),
            ],
        );
        let c = SchedulerConfig {
            assignment_order: AssignmentOrder::Topological,
            ..cfg(2)
        };
        let (p, trace) = partition_with_trace(&dag, &c, InitStrategy::Random).unwrap();
        p.check_complete(&dag).unwrap();
        let order = crate::graph::topological_order(&dag).unwrap();
        let pos = |id| order.iter().position(|&x| x == id).unwrap();
        assert!(trace
            .steps
            .windows(2)
            .all(|w| pos(w[0].task) < pos(w[1].task)));
    }

    #[test]
    fn max_load_values() {
        let dag = w4();
        let p = Partition::new(vec![vec![1, 2], vec![3, 4]]);
        assert!(close(
            normalized_max_load(&p, &dag).unwrap(),
            2.0 * 0.7 / 1.3
        ));
        let single = Partition::new(vec![vec![1, 2, 3, 4]]);
        assert_eq!(normalized_max_load(&single, &dag).unwrap(), 1.0);
        let empty = Partition::new(vec![vec![1, 2, 3, 4], vec![]]);
        assert!(matches!(
            normalized_max_load(&empty, &dag),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn equal_loads_give_unit_max_load() {
        let dag = WorkflowDag::new(
            vec!["cpu".into(), "mem".into()],
            (1..=4)
                .map(|i| Task::new(i, vec![0.1, 0.05], 0.0))
                .collect(),
            vec![],
        );
        let p = Partition::new(vec![vec![1, 4], vec![2, 3]]);
        assert!(close(normalized_max_load(&p, &dag).unwrap(), 1.0));
    }

    #[test]
    fn partition_doc_round_trip() {
        let dag = w4();
        let p = Partition::new(vec![vec![4, 1, 3], vec![2]]);
        let doc = p.to_doc(Some(&dag));
        assert_eq!(doc.d_matrix.len(), 4);
        assert_eq!(doc.workflow.as_deref(), Some(dag.fingerprint().as_str()));
        assert_eq!(Partition::from_json(&p.to_json(Some(&dag))).unwrap(), p);
    }

    #[test]
    fn per_resource_mode_scores_each_resource() {
        let dag = w4();
        let p = Partition::new(vec![vec![1], vec![2]]);
        let c = SchedulerConfig {
            balance_mode: BalanceMode::PerResource,
            ..cfg(2)
        };
        let params = BalanceFunctionParams::derive(4, 2, 4, 1.5);
        let s = delta_score(3, 1, &p, &dag, &c).unwrap();
        let growth = params.g(0.5) - params.g(0.3) + params.g(0.3) - params.g(0.1);
        assert!(close(s.balance_term, 0.25 * growth));
    }
}
