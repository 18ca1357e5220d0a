//! Evaluation of a (partition, placement) pair: communication overhead,
//! per-server resource balance and utilization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::total_edge_weight;
use crate::model::{ResourceVector, SchedulerConfig, ServerFleet, WorkflowDag};
use crate::partition::{normalized_max_load, Partition};
use crate::placement::{containers_from_partition, ContainerProfile, PlacementMap};

/// Dense square matrix, row-major.
pub type Matrix = Vec<Vec<f64>>;

/// Denominator of the communication overhead ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommNormalization {
    /// Total edge weight; the ratio is always within [0, 1].
    #[default]
    TotalEdgeWeight,
    /// Sum of per-task send times. Can exceed 1 when tasks fan out.
    SendTimes,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleMetrics {
    pub comm_overhead: f64,
    pub balance_total: f64,
    pub per_server_balance: Vec<f64>,
    /// Normalized maximum load of the partition.
    pub lambda: f64,
    pub cpu_util: Option<f64>,
    pub mem_util: Option<f64>,
    pub occupied_servers: usize,
    pub joint_objective: f64,
}

/// Cross-container communication time: `F[i][j]` sums the weights of edges
/// from a task in container `i` to a task in container `j != i`.
pub fn container_dependency(p: &Partition, dag: &WorkflowDag) -> Result<Matrix> {
    let labels = p.labels(dag)?;
    let c = p.len();
    let mut f = vec![vec![0.0; c]; c];
    for (src, dst, w) in dag.indexed_edges() {
        match (labels[src], labels[dst]) {
            (Some(a), Some(b)) if a != b => f[a][b] += w,
            (Some(_), Some(_)) => {}
            _ => {
                return Err(Error::InvalidPartition(format!(
                    "edge {}->{} touches an unassigned task",
                    dag.tasks()[src].id,
                    dag.tasks()[dst].id
                )))
            }
        }
    }
    Ok(f)
}

/// Cross-server communication time, indexed by fleet position.
pub fn server_dependency(m: &PlacementMap, f: &Matrix) -> Result<Matrix> {
    let s = m.server_count();
    let pos: Vec<usize> = (0..f.len())
        .map(|c| {
            m.server_position(c)
                .ok_or_else(|| Error::InvalidPlacement(format!("container {c} is unplaced")))
        })
        .collect::<Result<_>>()?;
    let mut g = vec![vec![0.0; s]; s];
    for (p, row) in f.iter().enumerate() {
        for (q, w) in row.iter().enumerate() {
            if pos[p] != pos[q] {
                g[pos[p]][pos[q]] += w;
            }
        }
    }
    Ok(g)
}

/// Share of communication time that crosses server boundaries.
pub fn comm_overhead(g: &Matrix, dag: &WorkflowDag, norm: CommNormalization) -> Result<f64> {
    let crossing: f64 = g.iter().flatten().sum();
    let total = match norm {
        CommNormalization::TotalEdgeWeight => total_edge_weight(dag),
        CommNormalization::SendTimes => dag.tasks().iter().map(|t| t.send_time).sum(),
    };
    if total > 0.0 {
        Ok(crossing / total)
    } else if crossing == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::ZeroCommunication)
    }
}

/// Demand placed on each server, in fleet order.
pub fn server_loads(
    m: &PlacementMap,
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
) -> Result<Vec<ResourceVector>> {
    let mut loads = vec![ResourceVector::zeros(fleet.resource_count()); fleet.len()];
    for c in containers {
        let pos = m
            .server_position(c.id)
            .ok_or_else(|| Error::InvalidPlacement(format!("container {} is unplaced", c.id)))?;
        loads[pos].add_assign(&c.demand);
    }
    Ok(loads)
}

fn utilizations(
    m: &PlacementMap,
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
) -> Result<Vec<Vec<f64>>> {
    let loads = server_loads(m, containers, fleet)?;
    fleet
        .servers()
        .iter()
        .zip(loads)
        .map(|(server, load)| {
            load.iter()
                .zip(server.capacity.iter())
                .enumerate()
                .map(|(k, (used, cap))| {
                    let u = used / cap;
                    if u > 1.0 + 1e-9 {
                        Err(Error::CapacityExceeded {
                            server: server.id,
                            resource: k,
                        })
                    } else {
                        Ok(u)
                    }
                })
                .collect()
        })
        .collect()
}

/// Variance of per-resource utilization on each server, and its sum over the fleet.
pub fn server_balance(
    m: &PlacementMap,
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
) -> Result<(Vec<f64>, f64)> {
    let per_server: Vec<f64> = utilizations(m, containers, fleet)?
        .iter()
        .map(|u| {
            if u.is_empty() {
                return 0.0;
            }
            let r = u.len() as f64;
            let mean = u.iter().sum::<f64>() / r;
            u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r
        })
        .collect();
    let total = per_server.iter().sum();
    Ok((per_server, total))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UtilizationSummary {
    pub cpu: f64,
    pub mem: f64,
    pub occupied_servers: usize,
}

/// Mean CPU and memory utilization over the servers that host anything.
pub fn utilization_averages(
    m: &PlacementMap,
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
) -> Result<UtilizationSummary> {
    let cpu = fleet
        .resource_index("cpu")
        .ok_or_else(|| Error::MissingResource("cpu".into()))?;
    let mem = fleet
        .resource_index("mem")
        .or_else(|| fleet.resource_index("memory"))
        .ok_or_else(|| Error::MissingResource("mem".into()))?;
    let util = utilizations(m, containers, fleet)?;
    let occupied: Vec<usize> = m
        .hosted_counts()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(pos, _)| pos)
        .collect();
    let n = occupied.len();
    if n == 0 {
        return Ok(UtilizationSummary {
            cpu: 0.0,
            mem: 0.0,
            occupied_servers: 0,
        });
    }
    let mean = |k: usize| occupied.iter().map(|&pos| util[pos][k]).sum::<f64>() / n as f64;
    Ok(UtilizationSummary {
        cpu: mean(cpu),
        mem: mean(mem),
        occupied_servers: n,
    })
}

/// `mu_c * C_OH + mu_b * B_tot` with the default overhead normalization.
pub fn joint_objective(
    p: &Partition,
    m: &PlacementMap,
    dag: &WorkflowDag,
    fleet: &ServerFleet,
    cfg: &SchedulerConfig,
) -> Result<f64> {
    let containers = containers_from_partition(p, dag)?;
    let g = server_dependency(m, &container_dependency(p, dag)?)?;
    let c_oh = comm_overhead(&g, dag, CommNormalization::TotalEdgeWeight)?;
    let (_, b_tot) = server_balance(m, &containers, fleet)?;
    Ok(cfg.mu_c * c_oh + cfg.mu_b * b_tot)
}

/// Every metric for one schedule. CPU/memory averages are `None` when the
/// fleet lacks those resource names.
pub fn evaluate(
    p: &Partition,
    m: &PlacementMap,
    dag: &WorkflowDag,
    fleet: &ServerFleet,
    cfg: &SchedulerConfig,
) -> Result<ScheduleMetrics> {
    evaluate_with(p, m, dag, fleet, cfg, CommNormalization::TotalEdgeWeight)
}

/// [`evaluate`] with an explicit communication-overhead denominator.
pub fn evaluate_with(
    p: &Partition,
    m: &PlacementMap,
    dag: &WorkflowDag,
    fleet: &ServerFleet,
    cfg: &SchedulerConfig,
    norm: CommNormalization,
) -> Result<ScheduleMetrics> {
    p.check_complete(dag)?;
    let containers = containers_from_partition(p, dag)?;
    m.check(&containers, fleet)?;
    let g = server_dependency(m, &container_dependency(p, dag)?)?;
    let comm = comm_overhead(&g, dag, norm)?;
    let (per_server_balance, balance_total) = server_balance(m, &containers, fleet)?;
    let (cpu_util, mem_util, occupied_servers) = match utilization_averages(m, &containers, fleet) {
        Ok(u) => (Some(u.cpu), Some(u.mem), u.occupied_servers),
        Err(Error::MissingResource(_)) => (
            None,
            None,
            m.hosted_counts().iter().filter(|&&n| n > 0).count(),
        ),
        Err(e) => return Err(e),
    };
    Ok(ScheduleMetrics {
        comm_overhead: comm,
        balance_total,
        per_server_balance,
        lambda: normalized_max_load(p, dag)?,
        cpu_util,
        mem_util,
        occupied_servers,
        joint_objective: cfg.mu_c * comm + cfg.mu_b * balance_total,
    })
}
