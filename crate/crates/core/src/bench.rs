//! Experiment harness: synthetic workflows, the bundled Table 1 fleet,
//! end-to-end pipelines and the CSV reports built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::kmeans_partition;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, ScheduleMetrics};
use crate::model::{
    BalanceMode, Edge, SchedulerConfig, ServerFleet, Task, WeightScale, WorkflowDag,
};
use crate::partition::{normalized_max_load, partition_tasks, InitStrategy, Partition};
use crate::placement::{containers_from_partition, place, PlacementAlgorithm, PlacementMap};

/// The ten-server fleet, capacities as fractions of the fleet total.
pub const TABLE1_JSON: &str = include_str!("../data/table1_fleet.json");

/// Workflow sizes of the reference experiment.
pub const REFERENCE_SIZES: [usize; 10] = [5, 9, 17, 24, 30, 47, 57, 63, 91, 93];

pub fn table1_fleet() -> ServerFleet {
    ServerFleet::from_json(TABLE1_JSON).expect("bundled fleet is valid")
}

pub fn load_fleet(path: impl AsRef<Path>) -> Result<ServerFleet> {
    ServerFleet::from_json(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub size: usize,
    /// Probability of an edge between each forward pair of tasks.
    pub density: f64,
    pub seed: u64,
    /// Upper bound of the per-resource demand draw.
    pub max_demand: f64,
    /// Upper bound of the edge weight draw.
    pub max_weight: f64,
}

impl GeneratorParams {
    pub fn new(size: usize, density: f64, seed: u64) -> Self {
        Self {
            size,
            density,
            seed,
            max_demand: 0.05,
            max_weight: 5.0,
        }
    }
}

pub fn generate_workflow(size: usize, density: f64, seed: u64) -> Result<WorkflowDag> {
    generate_workflow_with(&GeneratorParams::new(size, density, seed))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Random forward DAG over tasks `1..=size`.
///
/// Each pair `i < j` gets an edge with probability `density`; weights are
/// uniform in `(0, max_weight]` and demands uniform in `(0, max_demand]` per
/// resource (cpu, mem). Tasks not yet weakly connected to task 1 are chained
/// to their predecessor. A task's send time is its heaviest outgoing edge.
pub fn generate_workflow_with(params: &GeneratorParams) -> Result<WorkflowDag> {
    let n = params.size;
    if n == 0 {
        return Err(Error::InvalidConfig("workflow size must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&params.density) {
        return Err(Error::InvalidConfig(format!(
            "density {} outside [0, 1]",
            params.density
        )));
    }
    if !(params.max_demand > 0.0 && params.max_demand <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "max_demand {} outside (0, 1]",
            params.max_demand
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // (0, max]: gen() is in [0, 1)
    let draw = |rng: &mut ChaCha8Rng, max: f64| max * (1.0 - rng.gen::<f64>());

    let demands: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            vec![
                draw(&mut rng, params.max_demand),
                draw(&mut rng, params.max_demand),
            ]
        })
        .collect();

    let mut edges = Vec::new();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(params.density) {
                edges.push((i, j, draw(&mut rng, params.max_weight)));
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    for j in 1..n {
        if find(&mut parent, j) != find(&mut parent, 0) {
            edges.push((j - 1, j, draw(&mut rng, params.max_weight)));
            let (a, b) = (find(&mut parent, j - 1), find(&mut parent, j));
            parent[a] = b;
        }
    }
    edges.sort_by_key(|&(i, j, _)| (i, j));

    let mut send = vec![0.0_f64; n];
    for &(i, _, w) in &edges {
        send[i] = send[i].max(w);
    }
    let tasks = demands
        .into_iter()
        .enumerate()
        .map(|(i, d)| Task::new(i as u32 + 1, d, send[i]))
        .collect();
    let edges = edges
        .into_iter()
        .map(|(i, j, w)| Edge::new(i as u32 + 1, j as u32 + 1, w))
        .collect();
    Ok(WorkflowDag::new(
        vec!["cpu".into(), "mem".into()],
        tasks,
        edges,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionAlgorithm {
    Ncpi,
    Ri,
    Kmeans,
}

impl PartitionAlgorithm {
    pub fn is_randomized(self) -> bool {
        !matches!(self, Self::Ncpi)
    }
}

impl FromStr for PartitionAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ncpi" | "p-ncpi" => Ok(Self::Ncpi),
            "ri" | "p-ri" => Ok(Self::Ri),
            "kmeans" | "k-means" => Ok(Self::Kmeans),
            other => Err(Error::InvalidConfig(format!(
                "unknown partition algorithm {other:?}"
            ))),
        }
    }
}

impl fmt::Display for PartitionAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ncpi => "ncpi",
            Self::Ri => "ri",
            Self::Kmeans => "kmeans",
        })
    }
}

pub fn run_partition(
    algorithm: PartitionAlgorithm,
    dag: &WorkflowDag,
    cfg: &SchedulerConfig,
) -> Result<Partition> {
    match algorithm {
        PartitionAlgorithm::Ncpi => partition_tasks(dag, cfg, InitStrategy::Ncpi),
        PartitionAlgorithm::Ri => partition_tasks(dag, cfg, InitStrategy::Random),
        PartitionAlgorithm::Kmeans => kmeans_partition(dag, cfg),
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub partition: Partition,
    pub placement: PlacementMap,
    pub metrics: ScheduleMetrics,
    pub partition_ms: f64,
    pub placement_ms: f64,
}

/// Partition, place and evaluate one workflow.
pub fn run_pipeline(
    dag: &WorkflowDag,
    fleet: &ServerFleet,
    cfg: &SchedulerConfig,
    partitioner: PartitionAlgorithm,
    placer: PlacementAlgorithm,
) -> Result<PipelineOutput> {
    let start = Instant::now();
    let partition = run_partition(partitioner, dag, cfg)?;
    let partition_ms = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let containers = containers_from_partition(&partition, dag)?;
    let placement = place(placer, &containers, fleet)?;
    let placement_ms = start.elapsed().as_secs_f64() * 1e3;
    let metrics = evaluate(&partition, &placement, dag, fleet, cfg)?;
    Ok(PipelineOutput {
        partition,
        placement,
        metrics,
        partition_ms,
        placement_ms,
    })
}

/// Suite description, readable from JSON. Omitted fields take the defaults
/// of the reference experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub sizes: Vec<usize>,
    pub density: f64,
    /// Seed of the first workflow; workflow `i` uses `workflow_seed + i`.
    pub workflow_seed: u64,
    /// Algorithm seeds are `base_seed..base_seed + seeds`.
    pub base_seed: u64,
    pub seeds: u64,
    pub mu_c: f64,
    pub mu_b: f64,
    pub theta: f64,
    /// Container count is `ceil(T / tasks_per_container)`, clamped to
    /// `[min_containers, max_containers]` and to `T`.
    pub tasks_per_container: usize,
    pub min_containers: usize,
    pub max_containers: Option<usize>,
    /// Upper bound of the per-task demand draw.
    pub max_demand: f64,
    /// When set, the per-task demand bound shrinks to
    /// `2 * target_container_load * C / T` so an average container needs
    /// about this share of each resource. Unscaled draws make the larger
    /// workflows exceed the whole fleet.
    pub target_container_load: Option<f64>,
    pub weight_scale: WeightScale,
    pub balance_mode: BalanceMode,
    pub partitioners: Vec<PartitionAlgorithm>,
    pub placers: Vec<PlacementAlgorithm>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            sizes: REFERENCE_SIZES.to_vec(),
            density: 0.1,
            workflow_seed: 1,
            base_seed: 0,
            seeds: 10,
            mu_c: 0.5,
            mu_b: 0.5,
            theta: 1.5,
            tasks_per_container: 10,
            min_containers: 2,
            max_containers: None,
            max_demand: 0.05,
            target_container_load: Some(0.03),
            weight_scale: WeightScale::UnitMean,
            balance_mode: BalanceMode::PerResource,
            partitioners: vec![
                PartitionAlgorithm::Ncpi,
                PartitionAlgorithm::Ri,
                PartitionAlgorithm::Kmeans,
            ],
            placers: vec![
                PlacementAlgorithm::Dp,
                PlacementAlgorithm::Ffd,
                PlacementAlgorithm::Spread,
            ],
        }
    }
}

impl SuiteConfig {
    pub fn container_count(&self, tasks: usize) -> usize {
        let mut c = tasks
            .div_ceil(self.tasks_per_container.max(1))
            .max(self.min_containers);
        if let Some(max) = self.max_containers {
            c = c.min(max);
        }
        c.clamp(1, tasks.max(1))
    }

    pub fn scheduler_config(&self, containers: usize, seed: u64) -> SchedulerConfig {
        SchedulerConfig {
            mu_c: self.mu_c,
            mu_b: self.mu_b,
            theta: self.theta,
            container_count: containers,
            seed,
            weight_scale: self.weight_scale,
            balance_mode: self.balance_mode,
            ..SchedulerConfig::default()
        }
    }

    pub fn generator_params(&self, index: usize) -> GeneratorParams {
        let size = self.sizes[index];
        let mut max_demand = self.max_demand;
        if let Some(load) = self.target_container_load {
            let c = self.container_count(size) as f64;
            max_demand = max_demand.min(2.0 * load * c / size as f64);
        }
        GeneratorParams {
            size,
            density: self.density,
            seed: self.workflow_seed + index as u64,
            max_demand,
            max_weight: 5.0,
        }
    }

    pub fn workflows(&self) -> Result<Vec<WorkflowDag>> {
        (0..self.sizes.len())
            .map(|i| generate_workflow_with(&self.generator_params(i)))
            .collect()
    }
}

/// One pipeline execution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub workflow_id: usize,
    pub workflow_hash: String,
    pub tasks: usize,
    pub containers: usize,
    pub servers: usize,
    pub partitioner: PartitionAlgorithm,
    pub placer: PlacementAlgorithm,
    pub seed: u64,
    /// Normalized maximum load; defined whenever partitioning succeeded.
    pub lambda: Option<f64>,
    /// `None` when placement was infeasible.
    pub metrics: Option<ScheduleMetrics>,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub records: Vec<RunRecord>,
    pub workflow_hashes: Vec<String>,
}

/// Runs every workflow x partitioner x placer x seed combination.
/// Deterministic partitioners run once, with the base seed.
pub fn run_suite(cfg: &SuiteConfig, fleet: &ServerFleet) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for (wid, dag) in cfg.workflows()?.iter().enumerate() {
        let hash = dag.fingerprint();
        let containers = cfg.container_count(dag.task_count());
        for &partitioner in &cfg.partitioners {
            let seeds: Vec<u64> = if partitioner.is_randomized() {
                (cfg.base_seed..cfg.base_seed + cfg.seeds.max(1)).collect()
            } else {
                vec![cfg.base_seed]
            };
            for &placer in &cfg.placers {
                for &seed in &seeds {
                    let sched = cfg.scheduler_config(containers, seed);
                    let start = Instant::now();
                    let outcome = run_pipeline(dag, fleet, &sched, partitioner, placer);
                    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                    let (lambda, metrics) = match outcome {
                        Ok(out) => (Some(out.metrics.lambda), Some(out.metrics)),
                        Err(Error::Infeasible { .. }) | Err(Error::CapacityExceeded { .. }) => {
                            let p = run_partition(partitioner, dag, &sched)?;
                            (Some(normalized_max_load(&p, dag)?), None)
                        }
                        Err(e) => return Err(e),
                    };
                    report.records.push(RunRecord {
                        workflow_id: wid,
                        workflow_hash: hash.clone(),
                        tasks: dag.task_count(),
                        containers,
                        servers: fleet.len(),
                        partitioner,
                        placer,
                        seed,
                        lambda,
                        metrics,
                        runtime_ms,
                    });
                }
            }
        }
        report.workflow_hashes.push(hash);
    }
    Ok(report)
}

/// One CSV line. Column names and order are fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub workflow_id: usize,
    #[serde(rename = "T")]
    pub tasks: usize,
    #[serde(rename = "C")]
    pub containers: usize,
    #[serde(rename = "S")]
    pub servers: usize,
    pub algo_partition: String,
    pub algo_place: String,
    pub comm_overhead: Option<f64>,
    pub b_tot: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_cpu: Option<f64>,
    pub lambda_mem: Option<f64>,
    pub n_servers: Option<f64>,
    pub joint_objective: Option<f64>,
    pub runtime_ms: f64,
    /// A single seed, or `mean:<first>-<last>` for seed-averaged rows.
    pub seed: String,
    /// `ok`, `infeasible`, or `partial:<feasible>/<runs>` for averaged rows.
    pub status: String,
}

pub const CSV_COLUMNS: [&str; 16] = [
    "workflow_id",
    "T",
    "C",
    "S",
    "algo_partition",
    "algo_place",
    "comm_overhead",
    "b_tot",
    "lambda",
    "lambda_cpu",
    "lambda_mem",
    "n_servers",
    "joint_objective",
    "runtime_ms",
    "seed",
    "status",
];

impl CsvRow {
    fn from_record(r: &RunRecord) -> Self {
        let m = r.metrics.as_ref();
        Self {
            workflow_id: r.workflow_id,
            tasks: r.tasks,
            containers: r.containers,
            servers: r.servers,
            algo_partition: r.partitioner.to_string(),
            algo_place: r.placer.to_string(),
            comm_overhead: m.map(|m| m.comm_overhead),
            b_tot: m.map(|m| m.balance_total),
            lambda: r.lambda,
            lambda_cpu: m.and_then(|m| m.cpu_util),
            lambda_mem: m.and_then(|m| m.mem_util),
            n_servers: m.map(|m| m.occupied_servers as f64),
            joint_objective: m.map(|m| m.joint_objective),
            runtime_ms: r.runtime_ms,
            seed: r.seed.to_string(),
            status: if m.is_some() {
                "ok".into()
            } else {
                "infeasible".into()
            },
        }
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SuiteReport {
    /// One row per execution.
    pub fn raw_rows(&self) -> Vec<CsvRow> {
        self.records.iter().map(CsvRow::from_record).collect()
    }

    /// One row per (workflow, partitioner, placer); metrics of randomized
    /// partitioners are averaged over the feasible seeds.
    pub fn summary_rows(&self) -> Vec<CsvRow> {
        let mut groups: BTreeMap<(usize, PartitionAlgorithm, String), Vec<&RunRecord>> =
            BTreeMap::new();
        for r in &self.records {
            groups
                .entry((r.workflow_id, r.partitioner, r.placer.to_string()))
                .or_default()
                .push(r);
        }
        let mut rows = Vec::new();
        for runs in groups.values() {
            if runs.len() == 1 {
                rows.push(CsvRow::from_record(runs[0]));
                continue;
            }
            let first = runs[0];
            let metrics: Vec<&ScheduleMetrics> =
                runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let feasible = metrics.len();
            let status = match feasible {
                0 => "infeasible".to_string(),
                n if n == runs.len() => "ok".to_string(),
                n => format!("partial:{n}/{}", runs.len()),
            };
            let seeds = (
                runs.iter().map(|r| r.seed).min(),
                runs.iter().map(|r| r.seed).max(),
            );
            rows.push(CsvRow {
                workflow_id: first.workflow_id,
                tasks: first.tasks,
                containers: first.containers,
                servers: first.servers,
                algo_partition: first.partitioner.to_string(),
                algo_place: first.placer.to_string(),
                comm_overhead: mean(metrics.iter().map(|m| Some(m.comm_overhead))),
                b_tot: mean(metrics.iter().map(|m| Some(m.balance_total))),
                lambda: mean(runs.iter().map(|r| r.lambda)),
                lambda_cpu: mean(metrics.iter().map(|m| m.cpu_util)),
                lambda_mem: mean(metrics.iter().map(|m| m.mem_util)),
                n_servers: mean(metrics.iter().map(|m| Some(m.occupied_servers as f64))),
                joint_objective: mean(metrics.iter().map(|m| Some(m.joint_objective))),
                runtime_ms: runs.iter().map(|r| r.runtime_ms).sum::<f64>() / runs.len() as f64,
                seed: format!("mean:{}-{}", seeds.0.unwrap_or(0), seeds.1.unwrap_or(0)),
                status,
            });
        }
        rows
    }

    /// Per-figure tables: one row per workflow, one column per scheme.
    pub fn figure_tables(&self) -> Vec<(&'static str, String)> {
        type Pick = fn(&CsvRow) -> Option<f64>;
        let summary = self.summary_rows();
        let specs: [(&str, bool, Pick); 6] = [
            ("fig3_lambda.csv", true, |r| r.lambda),
            ("fig4_cpu.csv", false, |r| r.lambda_cpu),
            ("fig5_mem.csv", false, |r| r.lambda_mem),
            ("fig6_balance.csv", false, |r| r.b_tot),
            ("fig7_runtime.csv", false, |r| Some(r.runtime_ms)),
            ("fig8_comm.csv", false, |r| r.comm_overhead),
        ];
        specs
            .iter()
            .map(|&(name, by_partitioner, pick)| {
                (name, figure_table(&summary, by_partitioner, pick))
            })
            .collect()
    }

    pub fn write_csv(&self, out: impl Write, rows: &[CsvRow]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if rows.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Summary CSV at `path`, per-execution rows next to it
    /// (`<stem>_runs.csv`), figure tables and metadata in `plot_dir`.
    pub fn write_all(&self, cfg: &SuiteConfig, path: &Path, plot_dir: Option<&Path>) -> Result<()> {
        self.write_csv(fs::File::create(path)?, &self.summary_rows())?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("suite");
        let runs = path.with_file_name(format!("{stem}_runs.csv"));
        self.write_csv(fs::File::create(runs)?, &self.raw_rows())?;
        let meta = serde_json::json!({
            "config": cfg,
            "container_rule": format!(
                "ceil(T / {}) clamped to [{}, {}] (harness choice)",
                cfg.tasks_per_container,
                cfg.min_containers,
                cfg.max_containers.map_or("T".to_string(), |m| m.to_string())
            ),
            "workflow_hashes": self.workflow_hashes,
        });
        fs::write(
            path.with_file_name(format!("{stem}_meta.json")),
            serde_json::to_string_pretty(&meta)?,
        )?;
        if let Some(dir) = plot_dir {
            fs::create_dir_all(dir)?;
            for (name, body) in self.figure_tables() {
                fs::write(dir.join(name), body)?;
            }
        }
        Ok(())
    }
}

fn figure_table(
    summary: &[CsvRow],
    by_partitioner: bool,
    pick: fn(&CsvRow) -> Option<f64>,
) -> String {
    let key = |r: &CsvRow| {
        if by_partitioner {
            r.algo_partition.clone()
        } else {
            format!("{}-{}", r.algo_partition, r.algo_place)
        }
    };
    let mut columns: Vec<String> = Vec::new();
    let mut table: BTreeMap<(usize, usize), BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for r in summary {
        let k = key(r);
        if !columns.contains(&k) {
            columns.push(k.clone());
        }
        table
            .entry((r.workflow_id, r.tasks))
            .or_default()
            .entry(k)
            .or_insert(pick(r));
    }
    let mut out = format!("workflow_id,T,{}\n", columns.join(","));
    for ((wid, t), values) in table {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| {
                values
                    .get(c)
                    .copied()
                    .flatten()
                    .map_or(String::new(), |v| v.to_string())
            })
            .collect();
        out.push_str(&format!("{wid},{t},{}\n", cells.join(",")));
    }
    out
}
