//! Ordering and longest-path utilities over a [`WorkflowDag`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{TaskId, WorkflowDag, EPS};

/// Kahn's algorithm over task indices, smallest index first among ready tasks.
/// Self-loops are reported as cycles; edges with unknown endpoints are ignored.
pub(crate) fn kahn_order(dag: &WorkflowDag) -> Result<Vec<usize>> {
    let n = dag.task_count();
    if let Some(e) = dag.edges().iter().find(|e| e.src == e.dst) {
        return Err(Error::Cycle(e.src));
    }
    let mut indegree: Vec<usize> = (0..n).map(|i| dag.predecessors(i).len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &(j, _) in dag.successors(i) {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Walk predecessors among the leftover tasks; after n steps we are on a cycle.
    let mut at = (0..n)
        .find(|&i| indegree[i] > 0)
        .expect("leftover task exists");
    for _ in 0..n {
        at = dag
            .predecessors(at)
            .iter()
            .map(|&(p, _)| p)
            .find(|&p| indegree[p] > 0)
            .expect("leftover task has a leftover predecessor");
    }
    Err(Error::Cycle(dag.tasks()[at].id))
}

fn ensure_resolved(dag: &WorkflowDag) -> Result<()> {
    if dag.has_dangling_edges() {
        Err(Error::InvalidWorkflow(dag.validate()))
    } else {
        Ok(())
    }
}

/// Task ids in dependency order; ties go to the smaller id.
pub fn topological_order(dag: &WorkflowDag) -> Result<Vec<TaskId>> {
    ensure_resolved(dag)?;
    Ok(kahn_order(dag)?
        .into_iter()
        .map(|i| dag.tasks()[i].id)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPath {
    /// Zero-slack edges, sorted by (src, dst).
    pub edges: Vec<(TaskId, TaskId)>,
    /// Endpoints of the critical edges, ascending.
    pub tasks: Vec<TaskId>,
    /// Total weight of the heaviest path.
    pub length: f64,
}

impl CriticalPath {
    pub fn is_critical(&self, task: TaskId) -> bool {
        self.tasks.binary_search(&task).is_ok()
    }
}

/// Heaviest source-to-sink path structure.
///
/// A forward pass computes the heaviest path weight ending at each task, a
/// backward pass (seeded with the global maximum at every task) computes the
/// latest value each task may take without lengthening the heaviest path. An
/// edge is critical when it has zero slack between the two. Disconnected
/// components only contribute edges if they reach the global maximum.
pub fn critical_path(dag: &WorkflowDag) -> Result<CriticalPath> {
    ensure_resolved(dag)?;
    let order = kahn_order(dag)?;
    let n = dag.task_count();

    let mut earliest = vec![0.0_f64; n];
    for &i in &order {
        for &(p, w) in dag.predecessors(i) {
            earliest[i] = earliest[i].max(earliest[p] + w);
        }
    }
    let length = earliest.iter().copied().fold(0.0, f64::max);

    let mut latest = vec![length; n];
    for &i in order.iter().rev() {
        for &(q, w) in dag.successors(i) {
            latest[i] = latest[i].min(latest[q] - w);
        }
    }

    let tol = EPS * length.max(1.0);
    let mut edges: Vec<(TaskId, TaskId)> = dag
        .indexed_edges()
        .filter(|&(p, q, w)| p != q && (latest[q] - w - earliest[p]).abs() <= tol)
        .map(|(p, q, _)| (dag.tasks()[p].id, dag.tasks()[q].id))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut tasks: Vec<TaskId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    tasks.sort_unstable();
    tasks.dedup();
    Ok(CriticalPath {
        edges,
        tasks,
        length,
    })
}

/// Sum of all edge weights.
pub fn total_edge_weight(dag: &WorkflowDag) -> f64 {
    dag.edges().iter().map(|e| e.weight).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, single_task, w4};
    use crate::model::{Edge, Task};

    fn with_extra_edge(dag: &WorkflowDag, edge: Edge) -> WorkflowDag {
        let mut edges = dag.edges().to_vec();
        edges.push(edge);
        WorkflowDag::new(dag.resources().to_vec(), dag.tasks().to_vec(), edges)
    }

    #[test]
    fn w4_order() {
        assert_eq!(topological_order(&w4()).unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(topological_order(&single_task()).unwrap(), vec![1]);
    }

    #[test]
    fn back_edge_is_a_cycle() {
        let dag = with_extra_edge(&w4(), Edge::new(4, 1, 1.0));
        assert!(matches!(topological_order(&dag), Err(Error::Cycle(_))));
        assert!(matches!(critical_path(&dag), Err(Error::Cycle(_))));
    }

    #[test]
    fn cycle_error_names_a_cycle_member() {
        // 1 -> 2 -> 3 -> 2, task 4 hangs off 3
        let dag = WorkflowDag::new(
            vec!["cpu".into()],
            (1..=4).map(|i| Task::new(i, vec![0.1], 0.0)).collect(),
            vec![
                Edge::new(1, 2, 1.0),
                Edge::new(2, 3, 1.0),
                Edge::new(3, 2, 1.0),
                Edge::new(3, 4, 1.0),
            ],
        );
        match topological_order(&dag) {
            Err(Error::Cycle(id)) => assert!(id == 2 || id == 3),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn ties_break_by_id_not_input_order() {
        let dag = WorkflowDag::new(
            vec!["cpu".into()],
            vec![
                Task::new(9, vec![0.1], 0.0),
                Task::new(3, vec![0.1], 0.0),
                Task::new(5, vec![0.1], 0.0),
            ],
            vec![Edge::new(9, 5, 1.0)],
        );
        assert_eq!(topological_order(&dag).unwrap(), vec![3, 9, 5]);
    }

    #[test]
    fn w4_critical_path() {
        let cp = critical_path(&w4()).unwrap();
        assert_eq!(cp.edges, vec![(1, 3), (3, 4)]);
        assert_eq!(cp.tasks, vec![1, 3, 4]);
        assert_eq!(cp.length, 7.0);
        assert!(!cp.is_critical(2));
    }

    #[test]
    fn trivial_critical_paths() {
        let cp = critical_path(&single_task()).unwrap();
        assert!(cp.edges.is_empty());
        assert_eq!(cp.length, 0.0);

        let cp = critical_path(&chain3()).unwrap();
        assert_eq!(cp.edges, vec![(1, 2), (2, 3)]);
        assert_eq!(cp.length, 2.0);
    }

    #[test]
    fn shorter_component_is_not_critical() {
        // 1->2 (5) and a separate 3->4 (1); 5 is isolated
        let dag = WorkflowDag::new(
            vec!["cpu".into()],
            (1..=5).map(|i| Task::new(i, vec![0.1], 0.0)).collect(),
            vec![Edge::new(1, 2, 5.0), Edge::new(3, 4, 1.0)],
        );
        let cp = critical_path(&dag).unwrap();
        assert_eq!(cp.edges, vec![(1, 2)]);
        assert_eq!(cp.tasks, vec![1, 2]);
    }

    #[test]
    fn tied_heaviest_paths_are_both_critical() {
        let dag = WorkflowDag::new(
            vec!["cpu".into()],
            (1..=4).map(|i| Task::new(i, vec![0.1], 0.0)).collect(),
            vec![
                Edge::new(1, 2, 2.0),
                Edge::new(1, 3, 1.0),
                Edge::new(2, 4, 1.0),
                Edge::new(3, 4, 2.0),
            ],
        );
        let cp = critical_path(&dag).unwrap();
        assert_eq!(cp.edges.len(), 4);
        assert_eq!(cp.length, 3.0);
    }

    #[test]
    fn edge_weight_totals() {
        assert_eq!(total_edge_weight(&w4()), 10.0);
        assert_eq!(total_edge_weight(&single_task()), 0.0);
        assert_eq!(total_edge_weight(&chain3()), 2.0);
    }
}
