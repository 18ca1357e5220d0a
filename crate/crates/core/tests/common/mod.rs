//! Random instances and independent reference computations for the
//! integration tests. Nothing here calls the library's own scoring code.

#![allow(dead_code)]

use mecsched::bench::{generate_workflow_with, GeneratorParams};
use mecsched::model::{BalanceMode, WeightScale};
use mecsched::{SchedulerConfig, Server, ServerFleet, WorkflowDag};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_dag(rng: &mut ChaCha8Rng, max_tasks: usize) -> WorkflowDag {
    let params = GeneratorParams {
        size: rng.gen_range(1..=max_tasks),
        density: rng.gen_range(0.0..0.6),
        seed: rng.gen(),
        max_demand: rng.gen_range(0.01..0.3),
        max_weight: 5.0,
    };
    generate_workflow_with(&params).expect("generator accepts these parameters")
}

pub fn random_fleet(
    rng: &mut ChaCha8Rng,
    servers: usize,
    min_cap: f64,
    max_cap: f64,
) -> ServerFleet {
    ServerFleet::new(
        vec!["cpu".into(), "mem".into()],
        (0..servers)
            .map(|i| {
                Server::new(
                    i as u32,
                    vec![
                        rng.gen_range(min_cap..max_cap),
                        rng.gen_range(min_cap..max_cap),
                    ],
                )
            })
            .collect(),
    )
    .expect("positive capacities")
}

pub fn random_config(rng: &mut ChaCha8Rng, containers: usize) -> SchedulerConfig {
    SchedulerConfig {
        mu_c: rng.gen_range(0.0..1.0),
        mu_b: rng.gen_range(0.0..1.0),
        theta: rng.gen_range(1.0..3.0),
        container_count: containers,
        seed: rng.gen(),
        balance_mode: if rng.gen_bool(0.5) {
            BalanceMode::Aggregate
        } else {
            BalanceMode::PerResource
        },
        weight_scale: if rng.gen_bool(0.5) {
            WeightScale::Raw
        } else {
            WeightScale::UnitMean
        },
        ..SchedulerConfig::default()
    }
}

/// The partition objective evaluated straight from its definition on a
/// (possibly partial) labelling indexed like `dag.tasks()`.
pub fn reference_objective(
    dag: &WorkflowDag,
    cfg: &SchedulerConfig,
    labels: &[Option<usize>],
) -> f64 {
    let n = dag.task_count();
    let c = cfg.container_count;
    let index = |id: u32| dag.tasks().iter().position(|t| t.id == id).unwrap();

    let total_w: f64 = dag.edges().iter().map(|e| e.weight).sum();
    let edge_scale = if cfg.weight_scale == WeightScale::UnitMean && total_w > 0.0 {
        dag.edges().len() as f64 / total_w
    } else {
        1.0
    };
    // each set pays for every edge with exactly one end inside it
    let mut cut = 0.0;
    for set in 0..c {
        for e in dag.edges() {
            let inside_src = labels[index(e.src)] == Some(set);
            let inside_dst = labels[index(e.dst)] == Some(set);
            if inside_src != inside_dst {
                cut += e.weight * edge_scale;
            }
        }
    }

    let columns: Vec<Vec<f64>> = match cfg.balance_mode {
        BalanceMode::Aggregate => vec![dag.tasks().iter().map(|t| t.demand.iter().sum()).collect()],
        BalanceMode::PerResource => (0..dag.resource_count())
            .map(|r| dag.tasks().iter().map(|t| t.demand[r]).collect())
            .collect(),
    };
    let per_set = n as f64 / c as f64;
    let mut balance = 0.0;
    for col in &columns {
        let scale = if cfg.weight_scale == WeightScale::UnitMean {
            let s: f64 = col.iter().sum();
            if s > 0.0 {
                n as f64 / s
            } else {
                1.0
            }
        } else {
            1.0
        };
        for set in 0..c {
            let v: f64 = (0..n)
                .filter(|&i| labels[i] == Some(set))
                .map(|i| col[i] * scale)
                .sum();
            balance += (v / per_set).powf(cfg.theta);
        }
    }
    cfg.mu_c * cut / dag.edges().len().max(1) as f64 + cfg.mu_b * balance / c as f64
}

/// Longest path length by enumerating every path from every task.
pub fn longest_path_by_enumeration(dag: &WorkflowDag) -> (f64, Vec<Vec<u32>>) {
    fn walk(
        dag: &WorkflowDag,
        at: u32,
        len: f64,
        path: &mut Vec<u32>,
        out: &mut Vec<(f64, Vec<u32>)>,
    ) {
        out.push((len, path.clone()));
        for e in dag.edges().iter().filter(|e| e.src == at) {
            path.push(e.dst);
            walk(dag, e.dst, len + e.weight, path, out);
            path.pop();
        }
    }
    let mut all = Vec::new();
    for t in dag.tasks() {
        walk(dag, t.id, 0.0, &mut vec![t.id], &mut all);
    }
    let best = all.iter().map(|(l, _)| *l).fold(0.0, f64::max);
    let tol = 1e-9 * best.max(1.0);
    let longest = all
        .into_iter()
        .filter(|(l, _)| *l >= best - tol)
        .map(|(_, p)| p)
        .collect();
    (best, longest)
}
