//! Container-based workflow scheduling for edge server fleets.
//!
//! A workflow DAG is split into containers by a greedy, balance-aware
//! partitioner, then the containers are bin-packed onto capacity-limited
//! servers. Baselines, exhaustive oracles for small instances and an
//! experiment harness live alongside.
//!
//! ```
//! use mecsched::{bench, fixtures, PartitionAlgorithm, PlacementAlgorithm, SchedulerConfig};
//!
//! let dag = fixtures::w4();
//! let fleet = bench::table1_fleet();
//! let cfg = SchedulerConfig::with_containers(2);
//! let p = mecsched::run_partition(PartitionAlgorithm::Ncpi, &dag, &cfg).unwrap();
//! assert_eq!(p.len(), 2);
//! // W4 needs 40% of the fleet's CPU; no single Table 1 server fits it.
//! assert!(mecsched::run_pipeline(&dag, &fleet, &cfg, PartitionAlgorithm::Ncpi, PlacementAlgorithm::Ffd).is_err());
//! ```

pub mod baselines;
pub mod bench;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod placement;

pub use baselines::{kmeans_partition, spread_place};
pub use bench::{run_partition, run_pipeline, PartitionAlgorithm, PipelineOutput};
pub use error::{Error, Result};
pub use graph::{critical_path, topological_order, CriticalPath};
pub use metrics::{evaluate, CommNormalization, ScheduleMetrics};
pub use model::{
    BalanceMode, Edge, ResourceVector, SchedulerConfig, Server, ServerFleet, ServerId, Task,
    TaskId, ValidationReport, Violation, WorkflowDag,
};
pub use oracle::{brute_force_joint, brute_force_partition};
pub use partition::{
    delta_score, init_ncpi, init_random, normalized_max_load, objective_f, partition_tasks,
    InitStrategy, Partition, ScoreBreakdown,
};
pub use placement::{
    dp_place, ffd_place, place, ContainerProfile, PlacementAlgorithm, PlacementMap,
};
