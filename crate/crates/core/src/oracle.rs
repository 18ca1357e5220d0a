//! Exhaustive solvers for small instances.
//!
//! Both solvers walk assignment vectors in lexicographic order and keep the
//! first strict minimum, so ties resolve to the lexicographically smallest
//! candidate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::total_edge_weight;
use crate::model::{SchedulerConfig, ServerFleet, WorkflowDag};
use crate::partition::{Partition, Scorer};
use crate::placement::{containers_from_partition, PlacementMap};

pub const PARTITION_MAX_TASKS: usize = 12;
pub const PARTITION_MAX_CONTAINERS: usize = 4;
pub const JOINT_MAX_TASKS: usize = 8;
pub const JOINT_MAX_CONTAINERS: usize = 3;
pub const JOINT_MAX_SERVERS: usize = 3;

const TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionOptimum {
    #[serde(skip)]
    pub partition: Partition,
    pub value: f64,
    /// Number of surjective labellings evaluated.
    pub candidates: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointOptimum {
    #[serde(skip)]
    pub partition: Partition,
    #[serde(skip)]
    pub placement: PlacementMap,
    pub value: f64,
    /// Feasible (partition, placement) pairs evaluated.
    pub feasible_candidates: u64,
}

/// Number of maps from `n` labelled items onto `k` labelled non-empty sets.
pub fn surjection_count(n: usize, k: usize) -> u64 {
    // inclusion-exclusion: sum_j (-1)^j C(k, j) (k - j)^n
    let mut total: i128 = 0;
    let mut binom: i128 = 1;
    for j in 0..=k {
        let term = binom * ((k - j) as i128).pow(n as u32);
        total += if j % 2 == 0 { term } else { -term };
        binom = binom * (k - j) as i128 / (j as i128 + 1);
    }
    total as u64
}

/// Advances `digits` to the next vector in base `base`; `false` after the last.
fn next_vector(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn is_surjective(labels: &[usize], seen: &mut [bool]) -> bool {
    seen.iter_mut().for_each(|s| *s = false);
    labels.iter().for_each(|&c| seen[c] = true);
    seen.iter().all(|&s| s)
}

fn check_guard(dag: &WorkflowDag, cfg: &SchedulerConfig, max_t: usize, max_c: usize) -> Result<()> {
    cfg.validate()?;
    let (t, c) = (dag.task_count(), cfg.container_count);
    if t > max_t || c > max_c {
        return Err(Error::GuardExceeded(format!(
            "T = {t}, C = {c} (limits T <= {max_t}, C <= {max_c})"
        )));
    }
    if c > t {
        return Err(Error::TooManyContainers {
            containers: c,
            tasks: t,
        });
    }
    Ok(())
}

/// Minimizes the partition objective over every surjective labelling.
pub fn brute_force_partition(dag: &WorkflowDag, cfg: &SchedulerConfig) -> Result<PartitionOptimum> {
    check_guard(dag, cfg, PARTITION_MAX_TASKS, PARTITION_MAX_CONTAINERS)?;
    let k = cfg.container_count;
    let scorer = Scorer::new(dag, cfg, k);
    let mut digits = vec![0usize; dag.task_count()];
    let mut labels = vec![None; dag.task_count()];
    let mut seen = vec![false; k];
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    let mut candidates = 0;
    loop {
        if is_surjective(&digits, &mut seen) {
            candidates += 1;
            labels
                .iter_mut()
                .zip(&digits)
                .for_each(|(l, &d)| *l = Some(d));
            let value = scorer.objective(&labels).total;
            if best.as_ref().is_none_or(|(b, _)| value < b - TIE) {
                best = Some((value, labels.clone()));
            }
        }
        if !next_vector(&mut digits, k) {
            break;
        }
    }
    let (value, labels) = best.expect("C <= T guarantees a surjective labelling");
    Ok(PartitionOptimum {
        partition: Partition::from_labels(dag, &labels, k),
        value,
        candidates,
    })
}

/// Minimizes the joint communication/balance objective over every
/// surjective task labelling and every capacity-feasible container placement.
pub fn brute_force_joint(
    dag: &WorkflowDag,
    fleet: &ServerFleet,
    cfg: &SchedulerConfig,
) -> Result<JointOptimum> {
    check_guard(dag, cfg, JOINT_MAX_TASKS, JOINT_MAX_CONTAINERS)?;
    if fleet.len() > JOINT_MAX_SERVERS || fleet.is_empty() {
        return Err(Error::GuardExceeded(format!(
            "S = {} (limits 1 <= S <= {JOINT_MAX_SERVERS})",
            fleet.len()
        )));
    }
    let k = cfg.container_count;
    let s = fleet.len();
    let r = fleet.resource_count();
    let total_comm = total_edge_weight(dag);
    let edges: Vec<(usize, usize, f64)> = dag.indexed_edges().collect();
    let caps: Vec<&[f64]> = fleet
        .servers()
        .iter()
        .map(|sv| sv.capacity.as_slice())
        .collect();

    let mut tasks = vec![0usize; dag.task_count()];
    let mut seen = vec![false; k];
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut feasible_candidates = 0;
    loop {
        if is_surjective(&tasks, &mut seen) {
            let mut demand = vec![vec![0.0; r]; k];
            for (t, &c) in dag.tasks().iter().zip(&tasks) {
                for (d, v) in demand[c].iter_mut().zip(t.demand.iter()) {
                    *d += v;
                }
            }
            let mut cross = vec![vec![0.0; k]; k];
            for &(p, q, w) in &edges {
                if tasks[p] != tasks[q] {
                    cross[tasks[p]][tasks[q]] += w;
                }
            }

            let mut servers = vec![0usize; k];
            loop {
                let mut load = vec![vec![0.0; r]; s];
                for (c, &sv) in servers.iter().enumerate() {
                    for (l, d) in load[sv].iter_mut().zip(&demand[c]) {
                        *l += d;
                    }
                }
                let fits = load
                    .iter()
                    .zip(&caps)
                    .all(|(l, cap)| l.iter().zip(cap.iter()).all(|(x, c)| *x <= c + TIE));
                if fits {
                    feasible_candidates += 1;
                    let mut crossing = 0.0;
                    for (a, row) in cross.iter().enumerate() {
                        for (b, w) in row.iter().enumerate() {
                            if servers[a] != servers[b] {
                                crossing += w;
                            }
                        }
                    }
                    let comm = if total_comm > 0.0 {
                        crossing / total_comm
                    } else {
                        0.0
                    };
                    let balance: f64 = load
                        .iter()
                        .zip(&caps)
                        .map(|(l, cap)| {
                            let u: Vec<f64> =
                                l.iter().zip(cap.iter()).map(|(x, c)| x / c).collect();
                            let mean = u.iter().sum::<f64>() / r as f64;
                            u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r as f64
                        })
                        .sum();
                    let value = cfg.mu_c * comm + cfg.mu_b * balance;
                    if best.as_ref().is_none_or(|(b, _, _)| value < b - TIE) {
                        best = Some((value, tasks.clone(), servers.clone()));
                    }
                }
                if !next_vector(&mut servers, s) {
                    break;
                }
            }
        }
        if !next_vector(&mut tasks, k) {
            break;
        }
    }

    let (value, tasks, servers) = best.ok_or(Error::NoFeasibleSchedule)?;
    let labels: Vec<Option<usize>> = tasks.into_iter().map(Some).collect();
    let partition = Partition::from_labels(dag, &labels, k);
    let containers = containers_from_partition(&partition, dag)?;
    let placement = PlacementMap::from_assignments(
        servers
            .iter()
            .enumerate()
            .map(|(c, &pos)| (c, fleet.servers()[pos].id)),
        &containers,
        fleet,
    )?;
    Ok(JointOptimum {
        partition,
        placement,
        value,
        feasible_candidates,
    })
}
