//! Container placement onto servers as multi-choice vector bin packing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ResourceVector, ServerFleet, ServerId, WorkflowDag};
use crate::partition::Partition;

/// A container and its aggregate demand per resource type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerProfile {
    pub id: usize,
    pub demand: ResourceVector,
}

/// Container demands from a partition: each container needs the sum of its
/// tasks' demands. Ids follow set order.
pub fn containers_from_partition(
    p: &Partition,
    dag: &WorkflowDag,
) -> Result<Vec<ContainerProfile>> {
    p.sets()
        .iter()
        .enumerate()
        .map(|(id, set)| {
            let mut demand = ResourceVector::zeros(dag.resource_count());
            for &t in set {
                demand.add_assign(&dag.task(t)?.demand);
            }
            Ok(ContainerProfile { id, demand })
        })
        .collect()
}

/// Container-to-server assignment plus remaining capacity per server.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementMap {
    assignments: BTreeMap<usize, ServerId>,
    server_ids: Vec<ServerId>,
    residuals: Vec<ResourceVector>,
}

impl PlacementMap {
    /// Empty placement over a fleet: every residual equals full capacity.
    pub fn empty(fleet: &ServerFleet) -> Self {
        Self {
            assignments: BTreeMap::new(),
            server_ids: fleet.servers().iter().map(|s| s.id).collect(),
            residuals: fleet.servers().iter().map(|s| s.capacity.clone()).collect(),
        }
    }

    /// Places every container per `assignments` and recomputes residuals.
    pub fn from_assignments(
        assignments: impl IntoIterator<Item = (usize, ServerId)>,
        containers: &[ContainerProfile],
        fleet: &ServerFleet,
    ) -> Result<Self> {
        let mut map = Self::empty(fleet);
        let demand: BTreeMap<usize, &ContainerProfile> =
            containers.iter().map(|c| (c.id, c)).collect();
        for (container, server) in assignments {
            let c = demand
                .get(&container)
                .ok_or_else(|| Error::InvalidPlacement(format!("unknown container {container}")))?;
            let pos = map
                .position_of(server)
                .ok_or_else(|| Error::InvalidPlacement(format!("unknown server {server}")))?;
            map.place(c, pos);
        }
        Ok(map)
    }

    pub(crate) fn place(&mut self, c: &ContainerProfile, server_pos: usize) {
        self.assignments.insert(c.id, self.server_ids[server_pos]);
        self.residuals[server_pos].sub_assign(&c.demand);
    }

    fn position_of(&self, server: ServerId) -> Option<usize> {
        self.server_ids.iter().position(|&s| s == server)
    }

    pub fn assignments(&self) -> &BTreeMap<usize, ServerId> {
        &self.assignments
    }

    pub fn server_of(&self, container: usize) -> Option<ServerId> {
        self.assignments.get(&container).copied()
    }

    /// Fleet position (not id) of the server hosting `container`.
    pub fn server_position(&self, container: usize) -> Option<usize> {
        self.server_of(container).and_then(|s| self.position_of(s))
    }

    pub fn server_ids(&self) -> &[ServerId] {
        &self.server_ids
    }

    pub fn server_count(&self) -> usize {
        self.server_ids.len()
    }

    /// Residual capacity per server, in fleet order.
    pub fn residuals(&self) -> &[ResourceVector] {
        &self.residuals
    }

    /// Number of containers hosted per server, in fleet order.
    pub fn hosted_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.server_ids.len()];
        for server in self.assignments.values() {
            if let Some(pos) = self.position_of(*server) {
                counts[pos] += 1;
            }
        }
        counts
    }

    /// Every container on exactly one known server and no server over
    /// capacity in any resource.
    pub fn check(&self, containers: &[ContainerProfile], fleet: &ServerFleet) -> Result<()> {
        let mut used = vec![ResourceVector::zeros(fleet.resource_count()); fleet.len()];
        for c in containers {
            let pos = self.server_position(c.id).ok_or_else(|| {
                Error::InvalidPlacement(format!("container {} is unplaced", c.id))
            })?;
            used[pos].add_assign(&c.demand);
        }
        if self.assignments.len() != containers.len() {
            return Err(Error::InvalidPlacement(
                "placement names unknown containers".into(),
            ));
        }
        for (server, load) in fleet.servers().iter().zip(&used) {
            if let Some(k) = (0..load.len()).find(|&k| load[k] > server.capacity[k] + 1e-9) {
                return Err(Error::CapacityExceeded {
                    server: server.id,
                    resource: k,
                });
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> PlacementDoc {
        PlacementDoc {
            placements: self
                .assignments
                .iter()
                .map(|(&container, &server)| PlacementEntry { container, server })
                .collect(),
            residuals: self
                .residuals
                .iter()
                .map(|r| r.as_slice().to_vec())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("placement document serializes")
    }

    /// Rebuilds a placement from its document; residuals are recomputed from
    /// the container demands rather than trusted.
    pub fn from_doc(
        doc: &PlacementDoc,
        containers: &[ContainerProfile],
        fleet: &ServerFleet,
    ) -> Result<Self> {
        Self::from_assignments(
            doc.placements.iter().map(|e| (e.container, e.server)),
            containers,
            fleet,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementDoc {
    pub placements: Vec<PlacementEntry>,
    pub residuals: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub container: usize,
    pub server: ServerId,
}

/// What feasibility and scores are measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Remaining capacity after earlier placements.
    #[default]
    Residual,
    /// Full nominal capacity; the result is still checked against capacity
    /// afterwards and rejected if any server overflows.
    Nominal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementAlgorithm {
    Dp,
    Ffd,
    Spread,
}

impl FromStr for PlacementAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Ok(Self::Dp),
            "ffd" => Ok(Self::Ffd),
            "spread" => Ok(Self::Spread),
            other => Err(Error::InvalidConfig(format!(
                "unknown placement algorithm {other:?}"
            ))),
        }
    }
}

impl fmt::Display for PlacementAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dp => "dp",
            Self::Ffd => "ffd",
            Self::Spread => "spread",
        })
    }
}

pub fn place(
    algorithm: PlacementAlgorithm,
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
) -> Result<PlacementMap> {
    match algorithm {
        PlacementAlgorithm::Dp => dp_place(containers, fleet),
        PlacementAlgorithm::Ffd => ffd_place(containers, fleet),
        PlacementAlgorithm::Spread => crate::baselines::spread_place(containers, fleet),
    }
}

/// Demand fits componentwise (boundary-exact fits are accepted).
pub fn feasible(c: &ContainerProfile, residual: &ResourceVector) -> bool {
    c.demand.fits_within(residual)
}

fn ensure_fleet(containers: &[ContainerProfile], fleet: &ServerFleet) -> Result<()> {
    if fleet.is_empty() {
        return Err(Error::InvalidFleet("fleet has no servers".into()));
    }
    if let Some(c) = containers
        .iter()
        .find(|c| c.demand.len() != fleet.resource_count())
    {
        return Err(Error::InvalidPlacement(format!(
            "container {} has {} demand values for {} resource types",
            c.id,
            c.demand.len(),
            fleet.resource_count()
        )));
    }
    Ok(())
}

fn sorted_by_id(containers: &[ContainerProfile]) -> Vec<&ContainerProfile> {
    let mut order: Vec<&ContainerProfile> = containers.iter().collect();
    order.sort_by_key(|c| c.id);
    order
}

/// Dot-product placement against residual capacity.
pub fn dp_place(containers: &[ContainerProfile], fleet: &ServerFleet) -> Result<PlacementMap> {
    dp_place_with(containers, fleet, CapacityMode::Residual)
}

/// Containers in ascending id order; each goes to the feasible server whose
/// capacity has the largest dot product with its demand (lowest id on ties).
pub fn dp_place_with(
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
    mode: CapacityMode,
) -> Result<PlacementMap> {
    ensure_fleet(containers, fleet)?;
    let mut map = PlacementMap::empty(fleet);
    for c in sorted_by_id(containers) {
        let mut best: Option<(usize, f64)> = None;
        for (pos, server) in fleet.servers().iter().enumerate() {
            let supply = match mode {
                CapacityMode::Residual => &map.residuals[pos],
                CapacityMode::Nominal => &server.capacity,
            };
            if !feasible(c, supply) {
                continue;
            }
            let score = c.demand.dot(supply);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((pos, score));
            }
        }
        let (pos, _) = best.ok_or(Error::Infeasible { container: c.id })?;
        map.place(c, pos);
    }
    if mode == CapacityMode::Nominal {
        map.check(containers, fleet)?;
    }
    Ok(map)
}

pub fn ffd_place(containers: &[ContainerProfile], fleet: &ServerFleet) -> Result<PlacementMap> {
    ffd_place_with(containers, fleet, CapacityMode::Residual)
}

/// Order in which first-fit decreasing visits containers: aggregate demand
/// descending, ascending id on ties.
pub fn ffd_order(containers: &[ContainerProfile]) -> Vec<usize> {
    let mut order = sorted_by_id(containers);
    order.sort_by(|a, b| b.demand.sum().total_cmp(&a.demand.sum()));
    order.into_iter().map(|c| c.id).collect()
}

/// First-fit decreasing: each container, largest first, goes to the first
/// server (ascending id) it fits on.
pub fn ffd_place_with(
    containers: &[ContainerProfile],
    fleet: &ServerFleet,
    mode: CapacityMode,
) -> Result<PlacementMap> {
    ensure_fleet(containers, fleet)?;
    let by_id: BTreeMap<usize, &ContainerProfile> = containers.iter().map(|c| (c.id, c)).collect();
    let mut map = PlacementMap::empty(fleet);
    for id in ffd_order(containers) {
        let c = by_id[&id];
        let pos = fleet
            .servers()
            .iter()
            .enumerate()
            .position(|(pos, server)| match mode {
                CapacityMode::Residual => feasible(c, &map.residuals[pos]),
                CapacityMode::Nominal => feasible(c, &server.capacity),
            })
            .ok_or(Error::Infeasible { container: c.id })?;
        map.place(c, pos);
    }
    if mode == CapacityMode::Nominal {
        map.check(containers, fleet)?;
    }
    Ok(map)
}
