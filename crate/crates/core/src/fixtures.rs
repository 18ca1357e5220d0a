//! Small reference workflows used in examples and tests.

use crate::model::{Edge, Task, WorkflowDag};

fn cpu_mem() -> Vec<String> {
    vec!["cpu".into(), "mem".into()]
}

/// Four tasks in a diamond: 1->2 (2), 1->3 (3), 2->4 (1), 3->4 (4).
pub fn w4() -> WorkflowDag {
    WorkflowDag::new(
        cpu_mem(),
        vec![
            Task::new(1, vec![0.10, 0.20], 3.0),
            Task::new(2, vec![0.30, 0.10], 1.0),
            Task::new(3, vec![0.20, 0.20], 4.0),
            Task::new(4, vec![0.10, 0.10], 0.0),
        ],
        vec![
            Edge::new(1, 2, 2.0),
            Edge::new(1, 3, 3.0),
            Edge::new(2, 4, 1.0),
            Edge::new(3, 4, 4.0),
        ],
    )
}

/// 1->2->3 with unit weights.
pub fn chain3() -> WorkflowDag {
    WorkflowDag::new(
        cpu_mem(),
        vec![
            Task::new(1, vec![0.10, 0.10], 1.0),
            Task::new(2, vec![0.10, 0.10], 1.0),
            Task::new(3, vec![0.10, 0.10], 0.0),
        ],
        vec![Edge::new(1, 2, 1.0), Edge::new(2, 3, 1.0)],
    )
}

pub fn single_task() -> WorkflowDag {
    WorkflowDag::new(cpu_mem(), vec![Task::new(1, vec![0.10, 0.10], 0.0)], vec![])
}
