use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mecsched::bench::{self, GeneratorParams, SuiteConfig};
use mecsched::metrics::{evaluate_with, CommNormalization};
use mecsched::model::{validate, BalanceMode, WeightScale};
use mecsched::oracle::{brute_force_joint, brute_force_partition};
use mecsched::partition::partition_with_trace;
use mecsched::placement::{
    containers_from_partition, dp_place_with, ffd_place_with, CapacityMode, PlacementDoc,
};
use mecsched::{
    run_partition, spread_place, InitStrategy, Partition, PartitionAlgorithm, PlacementMap,
    SchedulerConfig, ServerFleet, WorkflowDag,
};
use serde_json::json;

/// Workflow containerization and container placement for edge server fleets.
#[derive(Parser)]
#[command(name = "mecsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random workflow document.
    Generate(GenerateArgs),
    /// Split a workflow into containers.
    Partition(PartitionArgs),
    /// Assign the containers of a partition to servers.
    Place(PlaceArgs),
    /// Compute the metrics of a partition and placement.
    Evaluate(EvaluateArgs),
    /// Solve a small instance exactly.
    Oracle(OracleArgs),
    /// Partition, place and evaluate in one step.
    Run(RunArgs),
    /// Run the benchmark suite and write CSV reports.
    Bench(BenchArgs),
    /// Check a workflow (and optionally a fleet) for structural problems.
    Validate(ValidateArgs),
    /// Print the bundled ten-server fleet.
    Fleet(OutArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    size: usize,
    /// Edge probability for each forward task pair.
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    #[arg(long, env = "MECSCHED_SEED", default_value_t = 0)]
    seed: u64,
    /// Upper bound of each per-resource demand draw.
    #[arg(long, default_value_t = 0.05)]
    max_demand: f64,
    #[arg(long, default_value_t = 5.0)]
    max_weight: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Balance {
    Aggregate,
    PerResource,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Raw,
    UnitMean,
}

#[derive(Args)]
struct SchedulerArgs {
    /// Number of containers.
    #[arg(long, short = 'c', default_value_t = 2)]
    containers: usize,
    #[arg(long, default_value_t = 0.5)]
    mu_c: f64,
    #[arg(long, default_value_t = 0.5)]
    mu_b: f64,
    #[arg(long, default_value_t = 1.5)]
    theta: f64,
    #[arg(long, env = "MECSCHED_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Balance::Aggregate)]
    balance: Balance,
    #[arg(long, value_enum, default_value_t = Scale::Raw)]
    weight_scale: Scale,
}

impl SchedulerArgs {
    fn config(&self) -> SchedulerConfig {
        SchedulerConfig {
            mu_c: self.mu_c,
            mu_b: self.mu_b,
            theta: self.theta,
            container_count: self.containers,
            seed: self.seed,
            balance_mode: match self.balance {
                Balance::Aggregate => BalanceMode::Aggregate,
                Balance::PerResource => BalanceMode::PerResource,
            },
            weight_scale: match self.weight_scale {
                Scale::Raw => WeightScale::Raw,
                Scale::UnitMean => WeightScale::UnitMean,
            },
            ..SchedulerConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionAlgo {
    Ncpi,
    Ri,
    Kmeans,
}

impl From<PartitionAlgo> for PartitionAlgorithm {
    fn from(a: PartitionAlgo) -> Self {
        match a {
            PartitionAlgo::Ncpi => PartitionAlgorithm::Ncpi,
            PartitionAlgo::Ri => PartitionAlgorithm::Ri,
            PartitionAlgo::Kmeans => PartitionAlgorithm::Kmeans,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PlaceAlgo {
    Dp,
    Ffd,
    Spread,
}

#[derive(Clone, Copy, ValueEnum)]
enum Capacity {
    Residual,
    Nominal,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long, value_enum, default_value_t = PartitionAlgo::Ncpi)]
    algo: PartitionAlgo,
    #[arg(long)]
    workflow: PathBuf,
    #[command(flatten)]
    sched: SchedulerArgs,
    /// Include the per-step greedy scores (ncpi and ri only).
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct FleetSource {
    /// Fleet document; the bundled ten-server fleet when omitted.
    #[arg(long)]
    fleet: Option<PathBuf>,
}

impl FleetSource {
    fn load(&self) -> anyhow::Result<ServerFleet> {
        match &self.fleet {
            Some(path) => Ok(bench::load_fleet(path)?),
            None => Ok(bench::table1_fleet()),
        }
    }
}

#[derive(Args)]
struct PlaceArgs {
    #[arg(long, value_enum, default_value_t = PlaceAlgo::Ffd)]
    algo: PlaceAlgo,
    #[arg(long)]
    workflow: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[command(flatten)]
    fleet: FleetSource,
    /// Measure fit against residual or full nominal capacity (dp and ffd).
    #[arg(long, value_enum, default_value_t = Capacity::Residual)]
    capacity: Capacity,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum CommNorm {
    TotalEdgeWeight,
    SendTimes,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    workflow: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    placement: PathBuf,
    #[command(flatten)]
    fleet: FleetSource,
    #[arg(long, default_value_t = 0.5)]
    mu_c: f64,
    #[arg(long, default_value_t = 0.5)]
    mu_b: f64,
    /// Denominator of the communication overhead.
    #[arg(long, value_enum, default_value_t = CommNorm::TotalEdgeWeight)]
    comm_norm: CommNorm,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleMode {
    Partition,
    Joint,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value_t = OracleMode::Partition)]
    mode: OracleMode,
    #[arg(long)]
    workflow: PathBuf,
    #[command(flatten)]
    sched: SchedulerArgs,
    #[command(flatten)]
    fleet: FleetSource,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    workflow: PathBuf,
    #[arg(long, value_enum, default_value_t = PartitionAlgo::Ncpi)]
    partitioner: PartitionAlgo,
    #[arg(long, value_enum, default_value_t = PlaceAlgo::Ffd)]
    placer: PlaceAlgo,
    #[command(flatten)]
    sched: SchedulerArgs,
    #[command(flatten)]
    fleet: FleetSource,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite configuration (JSON); omitted fields take their defaults.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Summary CSV; `<stem>_runs.csv` and `<stem>_meta.json` go next to it.
    #[arg(long)]
    out: PathBuf,
    /// Directory for the per-figure CSVs; the directory of `--out` when omitted.
    #[arg(long)]
    plots: Option<PathBuf>,
    #[command(flatten)]
    fleet: FleetSource,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    workflow: PathBuf,
    #[arg(long)]
    fleet: Option<PathBuf>,
}

fn emit(out: &OutArgs, text: &str) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display())),
        None => print_stdout(text),
    }
}

fn print_stdout(text: &str) -> anyhow::Result<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_workflow(path: &Path) -> anyhow::Result<WorkflowDag> {
    Ok(WorkflowDag::from_json(&read(path)?)?)
}

fn load_partition(path: &Path) -> anyhow::Result<Partition> {
    Ok(Partition::from_json(&read(path)?)?)
}

fn place_with(
    algo: PlaceAlgo,
    capacity: Capacity,
    p: &Partition,
    dag: &WorkflowDag,
    fleet: &ServerFleet,
) -> anyhow::Result<PlacementMap> {
    let containers = containers_from_partition(p, dag)?;
    let mode = match capacity {
        Capacity::Residual => CapacityMode::Residual,
        Capacity::Nominal => CapacityMode::Nominal,
    };
    Ok(match algo {
        PlaceAlgo::Dp => dp_place_with(&containers, fleet, mode)?,
        PlaceAlgo::Ffd => ffd_place_with(&containers, fleet, mode)?,
        PlaceAlgo::Spread => spread_place(&containers, fleet)?,
    })
}

fn to_value(text: String) -> serde_json::Value {
    serde_json::from_str(&text).expect("documents are valid JSON")
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let params = GeneratorParams {
                size: a.size,
                density: a.density,
                seed: a.seed,
                max_demand: a.max_demand,
                max_weight: a.max_weight,
            };
            emit(&a.out, &bench::generate_workflow_with(&params)?.to_json())
        }
        Command::Partition(a) => {
            let dag = load_workflow(&a.workflow)?;
            let cfg = a.sched.config();
            if a.trace {
                let init = match a.algo {
                    PartitionAlgo::Ncpi => InitStrategy::Ncpi,
                    PartitionAlgo::Ri => InitStrategy::Random,
                    PartitionAlgo::Kmeans => {
                        bail!("--trace applies to the greedy partitioners only")
                    }
                };
                let (p, trace) = partition_with_trace(&dag, &cfg, init)?;
                let mut doc = to_value(p.to_json(Some(&dag)));
                doc["trace"] = serde_json::to_value(&trace)?;
                emit(&a.out, &pretty(&doc))
            } else {
                let p = run_partition(a.algo.into(), &dag, &cfg)?;
                emit(&a.out, &p.to_json(Some(&dag)))
            }
        }
        Command::Place(a) => {
            let dag = load_workflow(&a.workflow)?;
            let p = load_partition(&a.partition)?;
            p.check_complete(&dag)?;
            let fleet = a.fleet.load()?;
            emit(
                &a.out,
                &place_with(a.algo, a.capacity, &p, &dag, &fleet)?.to_json(),
            )
        }
        Command::Evaluate(a) => {
            let dag = load_workflow(&a.workflow)?;
            let p = load_partition(&a.partition)?;
            let fleet = a.fleet.load()?;
            let containers = containers_from_partition(&p, &dag)?;
            let doc: PlacementDoc = serde_json::from_str(&read(&a.placement)?)?;
            let m = PlacementMap::from_doc(&doc, &containers, &fleet)?;
            let cfg = SchedulerConfig {
                mu_c: a.mu_c,
                mu_b: a.mu_b,
                ..SchedulerConfig::with_containers(p.len())
            };
            let norm = match a.comm_norm {
                CommNorm::TotalEdgeWeight => CommNormalization::TotalEdgeWeight,
                CommNorm::SendTimes => CommNormalization::SendTimes,
            };
            let metrics = evaluate_with(&p, &m, &dag, &fleet, &cfg, norm)?;
            emit(&a.out, &serde_json::to_string_pretty(&metrics)?)
        }
        Command::Oracle(a) => {
            let dag = load_workflow(&a.workflow)?;
            let cfg = a.sched.config();
            let doc = match a.mode {
                OracleMode::Partition => {
                    let opt = brute_force_partition(&dag, &cfg)?;
                    json!({
                        "mode": "partition",
                        "value": opt.value,
                        "candidates": opt.candidates,
                        "partition": to_value(opt.partition.to_json(Some(&dag))),
                    })
                }
                OracleMode::Joint => {
                    let fleet = a.fleet.load()?;
                    let opt = brute_force_joint(&dag, &fleet, &cfg)?;
                    json!({
                        "mode": "joint",
                        "value": opt.value,
                        "feasible_candidates": opt.feasible_candidates,
                        "partition": to_value(opt.partition.to_json(Some(&dag))),
                        "placement": to_value(opt.placement.to_json()),
                    })
                }
            };
            emit(&a.out, &pretty(&doc))
        }
        Command::Run(a) => {
            let dag = load_workflow(&a.workflow)?;
            let cfg = a.sched.config();
            let fleet = a.fleet.load()?;
            let p = run_partition(a.partitioner.into(), &dag, &cfg)?;
            let m = place_with(a.placer, Capacity::Residual, &p, &dag, &fleet)?;
            let metrics = evaluate_with(
                &p,
                &m,
                &dag,
                &fleet,
                &cfg,
                CommNormalization::TotalEdgeWeight,
            )?;
            let doc = json!({
                "partition": to_value(p.to_json(Some(&dag))),
                "placement": to_value(m.to_json()),
                "metrics": metrics,
            });
            emit(&a.out, &pretty(&doc))
        }
        Command::Bench(a) => {
            let cfg: SuiteConfig = match &a.suite {
                Some(path) => {
                    serde_json::from_str(&read(path)?).context("parsing suite configuration")?
                }
                None => SuiteConfig::default(),
            };
            let fleet = a.fleet.load()?;
            let report = bench::run_suite(&cfg, &fleet)?;
            let plots = a
                .plots
                .clone()
                .unwrap_or_else(|| a.out.parent().map(Path::to_path_buf).unwrap_or_default());
            for dir in [a.out.parent().unwrap_or(Path::new("")), plots.as_path()] {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                }
            }
            report
                .write_all(&cfg, &a.out, Some(&plots))
                .with_context(|| format!("writing reports for {}", a.out.display()))?;
            eprintln!(
                "{} runs, {} summary rows -> {}",
                report.records.len(),
                report.summary_rows().len(),
                a.out.display()
            );
            Ok(())
        }
        Command::Validate(a) => {
            let dag = WorkflowDag::from_doc_unchecked(serde_json::from_str(&read(&a.workflow)?)?);
            let report = match &a.fleet {
                Some(path) => validate(&dag, &bench::load_fleet(path)?),
                None => dag.validate(),
            };
            print_stdout(&serde_json::to_string_pretty(&report)?)?;
            if report.is_empty() {
                Ok(())
            } else {
                Err(mecsched::Error::InvalidWorkflow(report).into())
            }
        }
        Command::Fleet(out) => emit(&out, &bench::table1_fleet().to_json()),
    }
}

/// One JSON object on standard error: a stable code plus the message chain.
fn error_line(err: &anyhow::Error) -> String {
    let code = err
        .chain()
        .find_map(|e| e.downcast_ref::<mecsched::Error>())
        .map_or("error", mecsched::Error::code);
    let message = err
        .chain()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(": ");
    json!({ "error": code, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            eprint!("{message}");
            eprintln!(
                "{}",
                json!({ "error": "usage", "message": message.lines().next().unwrap_or("") })
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
