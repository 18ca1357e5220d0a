//! Comparison schemes: K-means task clustering on demand vectors and the
//! container-count spreading placement used by common orchestrators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{SchedulerConfig, ServerFleet, WorkflowDag};
use crate::partition::Partition;
use crate::placement::{feasible, ContainerProfile, PlacementMap};

pub const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansState {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster per task index.
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Lloyd iterations over the task demand vectors. Graph structure is ignored.
pub fn kmeans(dag: &WorkflowDag, cfg: &SchedulerConfig) -> Result<KMeansState> {
    cfg.validate()?;
    let k = cfg.container_count;
    let n = dag.task_count();
    if k > n {
        return Err(Error::TooManyContainers {
            containers: k,
            tasks: n,
        });
    }
    let points: Vec<&[f64]> = dag.tasks().iter().map(|t| t.demand.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids: Vec<Vec<f64>> = rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| points[i].to_vec())
        .collect();

    let mut assignment: Vec<usize> = Vec::new();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        reseed_empty(&points, &centroids, &mut next, k);
        let stable = next == assignment;
        assignment = next;
        centroids = means(&points, &assignment, k);
        if stable {
            break;
        }
    }
    Ok(KMeansState {
        centroids,
        assignment,
        iterations,
    })
}

/// Moves the point farthest from its centroid into each empty cluster. Only
/// points from clusters with more than one member are eligible.
fn reseed_empty(points: &[&[f64]], centroids: &[Vec<f64>], assignment: &mut [usize], k: usize) {
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .map(|i| (i, sq_dist(points[i], &centroids[assignment[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = donor {
            sizes[assignment[i]] -= 1;
            assignment[i] = empty;
            sizes[empty] = 1;
        }
    }
}

fn means(points: &[&[f64]], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dims = points.first().map_or(0, |p| p.len());
    let mut sums = vec![vec![0.0; dims]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|x| *x /= n as f64);
        }
    }
    sums
}

pub fn kmeans_partition(dag: &WorkflowDag, cfg: &SchedulerConfig) -> Result<Partition> {
    let state = kmeans(dag, cfg)?;
    let labels: Vec<Option<usize>> = state.assignment.iter().map(|&c| Some(c)).collect();
    Ok(Partition::from_labels(dag, &labels, cfg.container_count))
}

/// Containers in ascending id order, each onto the feasible server currently
/// hosting the fewest containers. Ties prefer the server with the lowest
/// summed utilization, then the lowest id.
pub fn spread_place(containers: &[ContainerProfile], fleet: &ServerFleet) -> Result<PlacementMap> {
    if fleet.is_empty() {
        return Err(Error::InvalidFleet("fleet has no servers".into()));
    }
    let mut order: Vec<&ContainerProfile> = containers.iter().collect();
    order.sort_by_key(|c| c.id);
    let mut map = PlacementMap::empty(fleet);
    let mut counts = vec![0usize; fleet.len()];
    for c in order {
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, server) in fleet.servers().iter().enumerate() {
            let residual = &map.residuals()[pos];
            if !feasible(c, residual) {
                continue;
            }
            let used: f64 = server
                .capacity
                .iter()
                .zip(residual.iter())
                .map(|(cap, left)| (cap - left) / cap)
                .sum();
            let better = match best {
                None => true,
                Some((_, n, u)) => counts[pos] < n || (counts[pos] == n && used < u - 1e-12),
            };
            if better {
                best = Some((pos, counts[pos], used));
            }
        }
        let (pos, _, _) = best.ok_or(Error::Infeasible { container: c.id })?;
        map.place(c, pos);
        counts[pos] += 1;
    }
    Ok(map)
}
