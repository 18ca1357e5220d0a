use thiserror::Error;

use crate::model::{ServerId, TaskId, ValidationReport};

#[derive(Debug, Error)]
pub enum Error {
    #[error("workflow contains a cycle through task {0}")]
    Cycle(TaskId),

    #[error("unknown task id {0}")]
    UnknownTask(TaskId),

    #[error("invalid workflow: {0}")]
    InvalidWorkflow(ValidationReport),

    #[error("invalid fleet: {0}")]
    InvalidFleet(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot seed {containers} containers from {tasks} tasks")]
    TooManyContainers { containers: usize, tasks: usize },

    #[error("task {0} is already assigned")]
    AlreadyAssigned(TaskId),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("container {container} does not fit on any server")]
    Infeasible { container: usize },

    #[error("server {server} over capacity on resource {resource}")]
    CapacityExceeded { server: ServerId, resource: usize },

    #[error("fleet has no resource named {0:?}")]
    MissingResource(String),

    #[error("cross-server traffic reported but the workflow has zero total communication time")]
    ZeroCommunication,

    #[error("instance too large for exhaustive search: {0}")]
    GuardExceeded(String),

    #[error("no feasible (partition, placement) pair exists")]
    NoFeasibleSchedule,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Cycle(_) => "cycle",
            Error::UnknownTask(_) => "unknown_task",
            Error::InvalidWorkflow(_) => "invalid_workflow",
            Error::InvalidFleet(_) => "invalid_fleet",
            Error::InvalidConfig(_) => "invalid_config",
            Error::TooManyContainers { .. } => "too_many_containers",
            Error::AlreadyAssigned(_) => "already_assigned",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::InvalidPlacement(_) => "invalid_placement",
            Error::Infeasible { .. } => "infeasible",
            Error::CapacityExceeded { .. } => "capacity_exceeded",
            Error::MissingResource(_) => "missing_resource",
            Error::ZeroCommunication => "zero_communication",
            Error::GuardExceeded(_) => "guard_exceeded",
            Error::NoFeasibleSchedule => "no_feasible_schedule",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
