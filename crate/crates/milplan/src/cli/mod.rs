//! Command-line front end. Each subcommand wraps exactly one library
//! operation — generate, encode, solve, check, collect, train, infer,
//! evaluate, report — and `pipeline` chains them at reduced budgets as an
//! end-to-end smoke test. Every run writes a [`RunManifest`] next to its
//! outputs; repeating the invocation reproduces the recorded artifact
//! digests.
//!
//! Exit codes: 0 on success (including "the instance is infeasible" — the
//! solver answered), 1 on domain errors, 2 on usage errors.

pub mod manifest;
#[cfg(test)]
mod tests;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bnb::{self, BranchPriority, Limits, SearchLogRecord, SolveResult, SolverConfig};
use crate::encode::cpp::{encode_cpp, quantile_count, CppProblem};
use crate::encode::{encode_problem, EncodingContext, PlanningProblem};
use crate::gen::{gen_cpp_reach_avoid, gen_stl_multi_target, CppBenchParams, StlBenchParams};
use crate::graph::SCHEMA_VERSION as GRAPH_SCHEMA_VERSION;
use crate::guidance::{
    collect_backdoor_data_jobs, collect_config_data_jobs, infer_backdoor, infer_config,
    CollectBackdoorOptions, CollectConfigOptions, GuidanceDataset, DATASET_SCHEMA_VERSION,
    DEFAULT_BACKDOOR_SIZE,
};
use crate::harness::runner::{
    collect_reports, run_experiment_jobs, write_report, ExperimentOptions, ExperimentReport,
    PreparedMethod, RECORDS_FILE, SCATTER_FILE, SUMMARY_FILE,
};
use crate::harness::{summary_to_csv, Headline};
use crate::milp::{export_json, export_mps, import_instance, MilpInstance};
use crate::neural::{train, GatModel, TaskMode, TrainOptions, MODEL_SCHEMA_VERSION};

use manifest::{manifest_path, RunManifest};

#[derive(Parser)]
#[command(
    name = "milplan",
    version,
    about = "Temporal-logic and chance-constrained planning compiled to MILP, \
             solved by branch-and-bound with learned guidance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a benchmark problem file (stl:N_o,N_c,N_t,T or cpp:K,T)
    Gen(GenArgs),
    /// Compile a problem file into a MILP instance (JSON or MPS)
    Encode(EncodeArgs),
    /// Solve a MILP instance by branch-and-bound
    Solve(SolveArgs),
    /// Check a solution against the specification semantics directly
    Robustness(RobustnessArgs),
    /// Label instances with ranked backdoor candidates for training
    CollectBackdoors(CollectBackdoorsArgs),
    /// Label instances with contrasted solver configurations for training
    CollectConfigs(CollectConfigsArgs),
    /// Train a graph network on a collected dataset
    Train(TrainArgs),
    /// Apply a trained model to one instance (priorities or configuration)
    Infer(InferArgs),
    /// Compare solver setups over an instance set and write a report
    Evaluate(EvaluateArgs),
    /// Aggregate evaluation reports into one table
    Report(ReportArgs),
    /// Run gen -> encode -> collect -> train -> evaluate at smoke-test scale
    Pipeline(PipelineArgs),
}

/// Entry point for the binary: parse, dispatch, map errors to exit codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Clap distinguishes --help/--version (0) from usage errors (2).
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Encode(args) => cmd_encode(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Robustness(args) => cmd_robustness(&args),
        Command::CollectBackdoors(args) => cmd_collect_backdoors(&args),
        Command::CollectConfigs(args) => cmd_collect_configs(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Infer(args) => cmd_infer(&args),
        Command::Evaluate(args) => cmd_evaluate(&args).map(|_| ()),
        Command::Report(args) => cmd_report(&args),
        Command::Pipeline(args) => cmd_pipeline(&args),
    }
}

// ---------------------------------------------------------------------------
// Shared bits
// ---------------------------------------------------------------------------

/// Benchmark family and size, written `stl:N_o,N_c,N_t,T` or `cpp:K,T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchSpec {
    Stl { obstacles: usize, groups: usize, targets: usize, horizon: usize },
    Cpp { samples: usize, horizon: usize },
}

impl FromStr for BenchSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("'{s}': expected stl:N_o,N_c,N_t,T or cpp:K,T"))?;
        let nums: Vec<usize> = rest
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("'{p}' is not a count")))
            .collect::<Result<_, String>>()?;
        match (kind, nums.as_slice()) {
            ("stl", &[obstacles, groups, targets, horizon]) => {
                Ok(BenchSpec::Stl { obstacles, groups, targets, horizon })
            }
            ("cpp", &[samples, horizon]) => Ok(BenchSpec::Cpp { samples, horizon }),
            ("stl", _) => Err(format!("'{rest}': stl takes four counts N_o,N_c,N_t,T")),
            ("cpp", _) => Err(format!("'{rest}': cpp takes two counts K,T")),
            _ => Err(format!("'{kind}': unknown family, expected stl or cpp")),
        }
    }
}

impl std::fmt::Display for BenchSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchSpec::Stl { obstacles, groups, targets, horizon } => {
                write!(f, "stl:{obstacles},{groups},{targets},{horizon}")
            }
            BenchSpec::Cpp { samples, horizon } => write!(f, "cpp:{samples},{horizon}"),
        }
    }
}

fn parse_bench_spec(s: &str) -> Result<BenchSpec, String> {
    BenchSpec::from_str(s)
}

/// A problem file as written by `gen`: either a full planning problem, a
/// full chance-constrained problem with its samples embedded, or the
/// compact descriptor that regenerates the samples from the recorded seed.
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
enum ProblemFile {
    // Order matters: the compact form has its distinctive `cpp` key, the
    // full chance-constrained form requires `samples`, and only then does
    // the plain planning problem (a subset of the full form's fields) get
    // a chance to match.
    CppCompact { cpp: CppBenchParams },
    CppFull(CppProblem),
    Stl(PlanningProblem),
}

enum LoadedProblem {
    Stl(PlanningProblem),
    Cpp(CppProblem),
}

fn load_problem(path: &Path) -> Result<LoadedProblem> {
    let file: ProblemFile = read_json(path)?;
    Ok(match file {
        ProblemFile::Stl(p) => LoadedProblem::Stl(p),
        ProblemFile::CppFull(p) => LoadedProblem::Cpp(p),
        ProblemFile::CppCompact { cpp } => {
            let problem = gen_cpp_reach_avoid(&cpp)
                .with_context(|| format!("regenerating samples for {}", path.display()))?;
            LoadedProblem::Cpp(problem)
        }
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Explicit output path, or `name` in the directory named by
/// `MILPLAN_OUT_DIR` (falling back to the working directory).
fn resolve_out(explicit: &Option<PathBuf>, name: &str) -> PathBuf {
    match explicit {
        Some(path) => path.clone(),
        None => match std::env::var_os("MILPLAN_OUT_DIR") {
            Some(dir) => PathBuf::from(dir).join(name),
            None => PathBuf::from(name),
        },
    }
}

/// Instance name used in datasets and reports: the file name minus its
/// format extensions (`a.milp.json` and `a.mps` both become `a`).
fn instance_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".json")
        .trim_end_matches(".mps")
        .trim_end_matches(".milp")
        .to_string()
}

/// Expand instance arguments: files stand for themselves, directories for
/// every `.json`/`.mps` file directly inside them (sorted by name, manifest
/// files excluded), so runs are deterministic under shell glob ordering.
fn collect_instance_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut inside: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let name = p.file_name().map(|n| n.to_string_lossy().into_owned());
                    let name = name.unwrap_or_default();
                    p.is_file()
                        && (name.ends_with(".json") || name.ends_with(".mps"))
                        && !name.ends_with(".manifest.json")
                        && name != "run-manifest.json"
                })
                .collect();
            inside.sort();
            paths.extend(inside);
        } else if input.is_file() {
            paths.push(input.clone());
        } else {
            bail!("no such file or directory: {}", input.display());
        }
    }
    if paths.is_empty() {
        bail!("no instance files found");
    }
    Ok(paths)
}

fn load_instances(inputs: &[PathBuf]) -> Result<Vec<(String, MilpInstance)>> {
    let mut out = Vec::new();
    for path in collect_instance_paths(inputs)? {
        let inst = import_instance(&path)
            .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        out.push((instance_id(&path), inst));
    }
    Ok(out)
}

fn solve_limits(time_limit: f64, node_limit: Option<u64>, gap: f64) -> Limits {
    Limits {
        time_limit,
        node_limit: node_limit.unwrap_or(u64::MAX),
        gap,
    }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct GenArgs {
    /// Problem family and size: stl:N_o,N_c,N_t,T or cpp:K,T
    #[arg(value_parser = parse_bench_spec)]
    pub params: BenchSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Violation budget for chance-constrained problems
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    /// Store the drawn disturbance samples in the file instead of the
    /// compact seed descriptor (chance-constrained problems only)
    #[arg(long)]
    pub embed_samples: bool,
    /// Output file (default: <family>-<sizes>-s<seed>.problem.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let default_name = format!(
        "{}-s{}.problem.json",
        args.params.to_string().replace(':', "-").replace(',', "-"),
        args.seed
    );
    let out = resolve_out(&args.out, &default_name);
    let mut manifest = RunManifest::new("gen");
    manifest
        .param("params", &args.params)
        .param("out", out.display())
        .seed("gen", args.seed);

    match args.params {
        BenchSpec::Stl { obstacles, groups, targets, horizon } => {
            if args.embed_samples {
                bail!("--embed-samples applies to cpp problems only");
            }
            let params = StlBenchParams::new(obstacles, groups, targets, horizon, args.seed);
            let problem = gen_stl_multi_target(&params)?;
            write_json(&out, &problem)?;
        }
        BenchSpec::Cpp { samples, horizon } => {
            let mut params = CppBenchParams::new(samples, horizon, args.seed);
            params.delta = args.delta;
            manifest.param("delta", args.delta);
            if args.embed_samples {
                let problem = gen_cpp_reach_avoid(&params)?;
                write_json(&out, &problem)?;
            } else {
                // The compact descriptor: samples regenerate from the seed.
                write_json(&out, &serde_json::json!({ "cpp": params }))?;
            }
        }
    }
    manifest.artifact(&out)?;
    manifest.write(&manifest_path(&out))?;
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InstanceFormat {
    Json,
    Mps,
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Problem file written by `gen`
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value_t = InstanceFormat::Json)]
    pub format: InstanceFormat,
    /// Big-M constant (default: derived from the state bounds)
    #[arg(long)]
    pub big_m: Option<f64>,
    /// Strictness margin added to predicate satisfaction
    #[arg(long, default_value_t = 0.0)]
    pub rho_min: f64,
    /// Output file (default: <problem stem>.milp.json or .mps)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let stem = instance_id(&args.problem).trim_end_matches(".problem").to_string();
    let default_name = match args.format {
        InstanceFormat::Json => format!("{stem}.milp.json"),
        InstanceFormat::Mps => format!("{stem}.mps"),
    };
    let out = resolve_out(&args.out, &default_name);
    let ctx = EncodingContext { big_m: args.big_m, rho_min: args.rho_min };
    let instance = match load_problem(&args.problem)? {
        LoadedProblem::Stl(problem) => encode_problem(&problem, &ctx)?.instance,
        LoadedProblem::Cpp(problem) => encode_cpp(&problem, &ctx)?.instance,
    };
    match args.format {
        InstanceFormat::Json => export_json(&instance, &out)?,
        InstanceFormat::Mps => export_mps(&instance, &out)?,
    }
    let mut manifest = RunManifest::new("encode");
    manifest
        .param("problem", args.problem.display())
        .param("format", format!("{:?}", args.format).to_lowercase())
        .param("rho_min", args.rho_min)
        .param("out", out.display());
    if let Some(m) = args.big_m {
        manifest.param("big_m", m);
    }
    manifest.artifact(&out)?;
    manifest.write(&manifest_path(&out))?;
    println!(
        "wrote {} ({} variables, {} rows, {} integer)",
        out.display(),
        instance.n,
        instance.m,
        instance.int_set.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SolveArgs {
    /// MILP instance file (.json or .mps)
    pub instance: PathBuf,
    /// Wall-clock budget in seconds
    #[arg(long, default_value_t = 900.0)]
    pub time_limit: f64,
    /// Processed-node budget
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Relative optimality gap to prove
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    /// Branching priorities file (as written by `infer`)
    #[arg(long)]
    pub priorities: Option<PathBuf>,
    /// Solver configuration file (as written by `infer`)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the search tree as line-delimited JSON
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Output file (default: <instance stem>.solution.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let instance = import_instance(&args.instance)
        .map_err(|e| anyhow!("{}: {e}", args.instance.display()))?;
    let priorities: BranchPriority = match &args.priorities {
        Some(path) => read_json(path)?,
        None => BranchPriority::new(),
    };
    let config: SolverConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SolverConfig::default(),
    };
    let limits = solve_limits(args.time_limit, args.node_limit, args.gap);
    let mut log_records: Vec<SearchLogRecord> = Vec::new();
    let result = bnb::solve_with_log(
        &instance,
        &config,
        &priorities,
        &limits,
        args.log.as_ref().map(|_| &mut log_records),
    )?;

    let out = resolve_out(&args.out, &format!("{}.solution.json", instance_id(&args.instance)));
    write_json(&out, &result)?;
    if let Some(log_path) = &args.log {
        let mut text = String::new();
        for record in &log_records {
            text.push_str(&serde_json::to_string(record)?);
            text.push('\n');
        }
        fs::write(log_path, text).with_context(|| format!("writing {}", log_path.display()))?;
    }

    let mut manifest = RunManifest::new("solve");
    manifest
        .param("instance", args.instance.display())
        .param("time_limit", args.time_limit)
        .param("gap", args.gap)
        .param("out", out.display());
    if let Some(n) = args.node_limit {
        manifest.param("node_limit", n);
    }
    if let Some(p) = &args.priorities {
        manifest.param("priorities", p.display());
    }
    if let Some(c) = &args.config {
        manifest.param("config", c.display());
    }
    manifest.artifact(&out)?;
    if let Some(log_path) = &args.log {
        manifest.param("log", log_path.display());
        manifest.artifact(log_path)?;
    }
    manifest.write(&manifest_path(&out))?;

    match result.objective {
        Some(obj) => println!(
            "status {:?}, objective {obj:.6}, {} nodes, {} LP iterations",
            result.status, result.node_count, result.lp_iterations
        ),
        None => println!(
            "status {:?}, no incumbent, {} nodes, {} LP iterations",
            result.status, result.node_count, result.lp_iterations
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// robustness
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct RobustnessArgs {
    /// Problem file the instance was encoded from
    pub problem: PathBuf,
    /// Solution file written by `solve`
    pub solution: PathBuf,
    /// Evaluation step for the specification
    #[arg(long, default_value_t = 0)]
    pub time: usize,
    /// Also write the verdict as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_robustness(args: &RobustnessArgs) -> Result<()> {
    let solution: SolveResult = read_json(&args.solution)?;
    let values = solution
        .incumbent
        .as_ref()
        .ok_or_else(|| anyhow!("{}: solution has no feasible point", args.solution.display()))?;

    // Re-encoding recovers the variable layout; the layout depends only on
    // the problem's shape, not on big-M or margin choices.
    let verdict = match load_problem(&args.problem)? {
        LoadedProblem::Stl(problem) => {
            let encoding = encode_problem(&problem, &EncodingContext::default())?;
            if values.len() != encoding.instance.n {
                bail!(
                    "solution has {} values but the encoded instance has {} variables",
                    values.len(),
                    encoding.instance.n
                );
            }
            let traj = encoding.layout.trajectory(values)?;
            let rho = problem.spec.robustness(&traj, args.time)?;
            serde_json::json!({
                "kind": "stl",
                "robustness": rho,
                "satisfied": rho >= 0.0,
            })
        }
        LoadedProblem::Cpp(problem) => {
            let encoding = encode_cpp(&problem, &EncodingContext::default())?;
            if values.len() != encoding.instance.n {
                bail!(
                    "solution has {} values but the encoded instance has {} variables",
                    values.len(),
                    encoding.instance.n
                );
            }
            let k = problem.samples.num_samples();
            let required = quantile_count(k, problem.delta)?;
            let mut rhos = Vec::with_capacity(k);
            for i in 0..k {
                let traj = encoding.layout.sample_trajectory(i, values)?;
                rhos.push(problem.spec.robustness(&traj, args.time)?);
            }
            let satisfied = rhos.iter().filter(|&&r| r >= 0.0).count();
            serde_json::json!({
                "kind": "cpp",
                "samples": k,
                "required": required,
                "satisfied": satisfied,
                "chance_ok": satisfied >= required,
                "robustness": rhos,
            })
        }
    };

    println!("{}", serde_json::to_string_pretty(&verdict)?);
    if let Some(out) = &args.out {
        write_json(out, &verdict)?;
        let mut manifest = RunManifest::new("robustness");
        manifest
            .param("problem", args.problem.display())
            .param("solution", args.solution.display())
            .param("time", args.time)
            .param("out", out.display());
        manifest.artifact(out)?;
        manifest.write(&manifest_path(out))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// collect-backdoors / collect-configs
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct CollectBackdoorsArgs {
    /// Instance files or directories of instances
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    /// Dataset output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Backdoor size
    #[arg(long, default_value_t = DEFAULT_BACKDOOR_SIZE)]
    pub k: usize,
    /// Candidate draws per instance
    #[arg(long, default_value_t = 40)]
    pub budget: usize,
    /// Local-improvement exchanges per instance
    #[arg(long, default_value_t = 10)]
    pub swaps: usize,
    /// Node cutoff per candidate evaluation
    #[arg(long, default_value_t = 5000)]
    pub node_limit: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trailing fraction of instances held out for validation
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Worker threads over instances
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn cmd_collect_backdoors(args: &CollectBackdoorsArgs) -> Result<()> {
    let instances = load_instances(&args.instances)?;
    let opts = CollectBackdoorOptions {
        k: args.k,
        budget: args.budget,
        swaps: args.swaps,
        limits: Limits { node_limit: args.node_limit, ..Limits::default() },
        seed: args.seed,
        val_fraction: args.val_fraction,
    };
    let (dataset, skips) = collect_backdoor_data_jobs(&instances, &opts, args.jobs)?;
    for skip in &skips {
        eprintln!("skipped {}: {}", skip.instance, skip.reason);
    }
    if dataset.entries.is_empty() {
        bail!("no instance produced labels ({} skipped)", skips.len());
    }
    let out = resolve_out(&args.out, "backdoor-dataset");
    fs::create_dir_all(&out)?;
    dataset.save(&out)?;

    let mut manifest = RunManifest::new("collect-backdoors");
    manifest
        .param("k", args.k)
        .param("budget", args.budget)
        .param("swaps", args.swaps)
        .param("node_limit", args.node_limit)
        .param("val_fraction", args.val_fraction)
        .param("instances", instances.len())
        .param("out", out.display())
        .seed("collect", args.seed)
        .schema("dataset", DATASET_SCHEMA_VERSION)
        .schema("graph", GRAPH_SCHEMA_VERSION);
    manifest.artifact_tree(&out)?;
    manifest.write(&out.join("run-manifest.json"))?;
    println!(
        "wrote {} ({} labeled, {} skipped)",
        out.display(),
        dataset.entries.len(),
        skips.len()
    );
    Ok(())
}

#[derive(Args)]
pub struct CollectConfigsArgs {
    /// Instance files or directories of instances
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    /// Dataset output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Configurations in the shared pool
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Local-improvement mutations per instance
    #[arg(long, default_value_t = 10)]
    pub swaps: usize,
    /// Node cutoff per configuration run
    #[arg(long, default_value_t = 500)]
    pub node_limit: u64,
    /// Fraction labeled positive/negative at each quality extreme
    #[arg(long, default_value_t = 0.15)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trailing fraction of instances held out for validation
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Worker threads over instances
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn cmd_collect_configs(args: &CollectConfigsArgs) -> Result<()> {
    let instances = load_instances(&args.instances)?;
    let opts = CollectConfigOptions {
        count: args.count,
        swaps: args.swaps,
        cutoff: Limits { node_limit: args.node_limit, ..Limits::default() },
        fraction: args.fraction,
        seed: args.seed,
        val_fraction: args.val_fraction,
    };
    let (dataset, skips) = collect_config_data_jobs(&instances, &opts, args.jobs)?;
    for skip in &skips {
        eprintln!("skipped {}: {}", skip.instance, skip.reason);
    }
    if dataset.entries.is_empty() {
        bail!("no instance produced labels ({} skipped)", skips.len());
    }
    let out = resolve_out(&args.out, "config-dataset");
    fs::create_dir_all(&out)?;
    dataset.save(&out)?;

    let mut manifest = RunManifest::new("collect-configs");
    manifest
        .param("count", args.count)
        .param("swaps", args.swaps)
        .param("node_limit", args.node_limit)
        .param("fraction", args.fraction)
        .param("val_fraction", args.val_fraction)
        .param("instances", instances.len())
        .param("out", out.display())
        .seed("collect", args.seed)
        .schema("dataset", DATASET_SCHEMA_VERSION)
        .schema("graph", GRAPH_SCHEMA_VERSION);
    manifest.artifact_tree(&out)?;
    manifest.write(&out.join("run-manifest.json"))?;
    println!(
        "wrote {} ({} labeled, {} skipped)",
        out.display(),
        dataset.entries.len(),
        skips.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory written by collect-backdoors or collect-configs
    pub dataset: PathBuf,
    /// Model output file (default: model.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Embedding width
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    /// Attention heads
    #[arg(long, default_value_t = 8)]
    pub heads: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// Hinge margin (ranking task)
    #[arg(long, default_value_t = crate::neural::DEFAULT_MARGIN)]
    pub margin: f64,
    /// Softmax temperature (contrastive task)
    #[arg(long, default_value_t = crate::neural::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let dataset = GuidanceDataset::load(&args.dataset)?;
    let (train_set, val_set) = dataset.to_neural()?;
    let opts = TrainOptions {
        width: args.width,
        heads: args.heads,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        epochs: args.epochs,
        margin: args.margin,
        tau: args.tau,
        seed: args.seed,
    };
    let (model, history) = train(&train_set, &val_set, &opts)?;

    let out = resolve_out(&args.out, "model.json");
    fs::write(&out, model.to_json() + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    let history_path = {
        let name = out.file_name().map(|n| n.to_string_lossy().into_owned());
        let name = name.unwrap_or_else(|| "model.json".into());
        let stem = name.strip_suffix(".json").unwrap_or(&name);
        out.with_file_name(format!("{stem}.history.json"))
    };
    write_json(&history_path, &history)?;

    let mut manifest = RunManifest::new("train");
    manifest
        .param("dataset", args.dataset.display())
        .param("width", args.width)
        .param("heads", args.heads)
        .param("learning_rate", args.learning_rate)
        .param("batch_size", args.batch_size)
        .param("epochs", args.epochs)
        .param("margin", args.margin)
        .param("tau", args.tau)
        .param("out", out.display())
        .seed("train", args.seed)
        .seed("dataset", dataset.seed)
        .schema("model", MODEL_SCHEMA_VERSION)
        .schema("dataset", DATASET_SCHEMA_VERSION);
    manifest.artifact(&out)?;
    manifest.artifact(&history_path)?;
    manifest.write(&manifest_path(&out))?;
    println!(
        "wrote {} (best epoch {}, validation loss {:.6})",
        out.display(),
        history.best_epoch,
        history.best_val_loss
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct InferArgs {
    /// Trained model file
    pub model: PathBuf,
    /// MILP instance to prepare guidance for
    pub instance: PathBuf,
    /// Backdoor size (ranking models)
    #[arg(long, default_value_t = DEFAULT_BACKDOOR_SIZE)]
    pub k: usize,
    /// Candidate-sampling seed (ranking models)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (default: <instance stem>.priorities.json or .config.json)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_infer(args: &InferArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let instance = import_instance(&args.instance)
        .map_err(|e| anyhow!("{}: {e}", args.instance.display()))?;
    let stem = instance_id(&args.instance);

    let mut manifest = RunManifest::new("infer");
    manifest
        .param("model", args.model.display())
        .param("instance", args.instance.display())
        .schema("model", MODEL_SCHEMA_VERSION);

    let out = match model.mode {
        TaskMode::BackdoorScore => {
            let priorities = infer_backdoor(&model, &instance, args.k, args.seed)?;
            let out = resolve_out(&args.out, &format!("{stem}.priorities.json"));
            write_json(&out, &priorities)?;
            manifest.param("k", args.k).seed("candidates", args.seed);
            println!("wrote {} (branching priorities)", out.display());
            out
        }
        TaskMode::ConfigLogits => {
            let config = infer_config(&model, &instance)?;
            let out = resolve_out(&args.out, &format!("{stem}.config.json"));
            write_json(&out, &config)?;
            println!("wrote {} (solver configuration)", out.display());
            out
        }
    };
    manifest.param("out", out.display());
    manifest.artifact(&out)?;
    manifest.write(&manifest_path(&out))?;
    Ok(())
}

fn load_model(path: &Path) -> Result<GatModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    GatModel::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// A compared solver setup: the stock solver, uniformly random priorities,
/// or a trained model applied per instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MethodSpec {
    Default,
    Random { k: usize },
    Model { path: PathBuf },
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "default" {
            return Ok(MethodSpec::Default);
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let k = rest
                .parse::<usize>()
                .map_err(|_| format!("'{rest}' is not a backdoor size"))?;
            if k == 0 {
                return Err("random backdoor size must be positive".into());
            }
            return Ok(MethodSpec::Random { k });
        }
        if let Some(rest) = s.strip_prefix("model:") {
            return Ok(MethodSpec::Model { path: PathBuf::from(rest) });
        }
        Err(format!("'{s}': expected default, random:K, or model:PATH"))
    }
}

fn parse_method_spec(s: &str) -> Result<MethodSpec, String> {
    MethodSpec::from_str(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeadlineArg {
    /// Processed node counts
    Nodes,
    /// Final primal gaps
    Gap,
}

impl From<HeadlineArg> for Headline {
    fn from(arg: HeadlineArg) -> Headline {
        match arg {
            HeadlineArg::Nodes => Headline::NodeCount,
            HeadlineArg::Gap => Headline::PrimalGap,
        }
    }
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Instance files or directories of instances
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    /// Report output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Setups to compare (default is always included): random:K, model:PATH
    #[arg(long = "method", value_parser = parse_method_spec)]
    pub methods: Vec<MethodSpec>,
    /// Benchmark tag written into the report
    #[arg(long, default_value = "bench")]
    pub benchmark: String,
    #[arg(long, value_enum, default_value_t = HeadlineArg::Nodes)]
    pub headline: HeadlineArg,
    #[arg(long, default_value_t = 900.0)]
    pub time_limit: f64,
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    /// Extra reference solve anchoring the best-known objective, with this
    /// node budget
    #[arg(long)]
    pub reference_node_limit: Option<u64>,
    /// Backdoor size for model methods
    #[arg(long, default_value_t = DEFAULT_BACKDOOR_SIZE)]
    pub k: usize,
    /// Seed for random priorities and candidate sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads over instances
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Uniformly random size-`k` priority set over the instance's integers;
/// the stream is keyed by instance index so runs are order-independent.
fn random_priorities(inst: &MilpInstance, k: usize, seed: u64, index: usize) -> BranchPriority {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED,
    );
    let ints: Vec<usize> = inst.int_set.iter().copied().collect();
    let take = k.min(ints.len());
    let picks = rand::seq::index::sample(&mut rng, ints.len(), take);
    BranchPriority::from_set(picks.iter().map(|i| ints[i]))
}

fn method_name(spec: &MethodSpec) -> String {
    match spec {
        MethodSpec::Default => "default".to_string(),
        MethodSpec::Random { k } => format!("random-{k}"),
        MethodSpec::Model { path } => instance_id(path),
    }
}

fn prepare_methods(
    instances: &[(String, MilpInstance)],
    specs: &[MethodSpec],
    k: usize,
    seed: u64,
) -> Result<Vec<PreparedMethod>> {
    let mut methods = vec![PreparedMethod::default_method(instances.len())];
    for spec in specs {
        if *spec == MethodSpec::Default {
            continue; // always present
        }
        let name = method_name(spec);
        if methods.iter().any(|m| m.name == name) {
            bail!("method '{name}' listed twice");
        }
        let mut setups = Vec::with_capacity(instances.len());
        match spec {
            MethodSpec::Default => unreachable!(),
            MethodSpec::Random { k } => {
                for (index, (_, inst)) in instances.iter().enumerate() {
                    setups.push((
                        random_priorities(inst, *k, seed, index),
                        SolverConfig::default(),
                    ));
                }
            }
            MethodSpec::Model { path } => {
                let model = load_model(path)?;
                for (id, inst) in instances {
                    let setup = match model.mode {
                        TaskMode::BackdoorScore => infer_backdoor(&model, inst, k, seed)
                            .map(|p| (p, SolverConfig::default())),
                        TaskMode::ConfigLogits => {
                            infer_config(&model, inst).map(|c| (BranchPriority::new(), c))
                        }
                    };
                    match setup {
                        Ok(s) => setups.push(s),
                        Err(e) => {
                            // Inference can fail on a degenerate root LP;
                            // fall back to the stock setup rather than
                            // aborting the whole comparison.
                            eprintln!("warning: {name} fell back to default on {id}: {e}");
                            setups.push((BranchPriority::new(), SolverConfig::default()));
                        }
                    }
                }
            }
        }
        methods.push(PreparedMethod { name, setups });
    }
    Ok(methods)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExperimentReport> {
    let instances = load_instances(&args.instances)?;
    let methods = prepare_methods(&instances, &args.methods, args.k, args.seed)?;
    let opts = ExperimentOptions {
        benchmark: args.benchmark.clone(),
        limits: solve_limits(args.time_limit, args.node_limit, args.gap),
        reference_limits: args
            .reference_node_limit
            .map(|n| Limits { node_limit: n, ..Limits::default() }),
        headline: args.headline.into(),
    };
    let (report, traces) = run_experiment_jobs(&instances, &methods, &opts, args.jobs)?;

    let out = resolve_out(&args.out, "results");
    fs::create_dir_all(&out)?;
    write_report(&out, &report, &traces)?;

    let mut manifest = RunManifest::new("evaluate");
    manifest
        .param("benchmark", &args.benchmark)
        .param("headline", format!("{:?}", args.headline).to_lowercase())
        .param("time_limit", args.time_limit)
        .param("gap", args.gap)
        .param("k", args.k)
        .param("instances", instances.len())
        .param(
            "methods",
            methods.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join(","),
        )
        .param("out", out.display())
        .seed("evaluate", args.seed);
    if let Some(n) = args.node_limit {
        manifest.param("node_limit", n);
    }
    if let Some(n) = args.reference_node_limit {
        manifest.param("reference_node_limit", n);
    }
    // The trace file is wall-clock by construction; the records file's
    // solve times are stripped by the artifact hasher.
    manifest.artifact(&out.join(RECORDS_FILE))?;
    manifest.artifact(&out.join(SUMMARY_FILE))?;
    manifest.artifact(&out.join(SCATTER_FILE))?;
    manifest.write(&out.join("run-manifest.json"))?;

    print!("{}", summary_to_csv(&report.benchmark, &report.summary));
    Ok(report)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory tree containing evaluation outputs
    pub runs: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Output file (default: print to stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let reports = collect_reports(&args.runs)?;
    if reports.is_empty() {
        bail!("no records found under {}", args.runs.display());
    }
    let rendered = match args.format {
        ReportFormat::Csv => {
            let mut out = String::new();
            for (i, report) in reports.iter().enumerate() {
                let csv = summary_to_csv(&report.benchmark, &report.summary);
                if i == 0 {
                    out.push_str(&csv);
                } else {
                    // One shared header line.
                    out.extend(csv.splitn(2, '\n').nth(1).map(String::from));
                }
            }
            out
        }
        ReportFormat::Json => {
            let docs: Vec<serde_json::Value> = reports
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "benchmark": r.benchmark,
                        "headline": r.headline,
                        "summary": r.summary,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&docs)? + "\n"
        }
    };
    match &args.out {
        Some(out) => {
            fs::write(out, &rendered).with_context(|| format!("writing {}", out.display()))?;
            let mut manifest = RunManifest::new("report");
            manifest
                .param("runs", args.runs.display())
                .param("format", format!("{:?}", args.format).to_lowercase())
                .param("reports", reports.len())
                .param("out", out.display());
            manifest.artifact(out)?;
            manifest.write(&manifest_path(out))?;
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct PipelineArgs {
    /// Working directory for all pipeline artifacts
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Problem family and size for the generated instances
    #[arg(long, value_parser = parse_bench_spec, default_value = "stl:1,1,1,8")]
    pub params: BenchSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training instances generated
    #[arg(long, default_value_t = 6)]
    pub train_instances: usize,
    /// Held-out evaluation instances generated
    #[arg(long, default_value_t = 3)]
    pub eval_instances: usize,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    /// Worker threads for the collection and evaluation stages
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    if args.train_instances < 2 {
        bail!("need at least two training instances (one becomes validation)");
    }
    if args.eval_instances == 0 {
        bail!("need at least one evaluation instance");
    }
    let out = resolve_out(&args.out, "pipeline");
    let problems = out.join("problems");
    let train_dir = out.join("instances").join("train");
    let eval_dir = out.join("instances").join("eval");
    let dataset_dir = out.join("dataset");
    let results_dir = out.join("results");
    for dir in [&problems, &train_dir, &eval_dir] {
        fs::create_dir_all(dir)?;
    }

    // Stage 1+2: generate and encode. Held-out seeds live far from the
    // training seeds so the two sets can't collide.
    println!("[1/5] generating and encoding {} problems", args.train_instances + args.eval_instances);
    let encode_one = |tag: &str, index: usize, seed: u64, dir: &Path| -> Result<()> {
        let problem_path = problems.join(format!("{tag}-{index:02}.problem.json"));
        cmd_gen(&GenArgs {
            params: args.params.clone(),
            seed,
            delta: 0.2,
            embed_samples: false,
            out: Some(problem_path.clone()),
        })?;
        cmd_encode(&EncodeArgs {
            problem: problem_path,
            format: InstanceFormat::Json,
            big_m: None,
            rho_min: 0.0,
            out: Some(dir.join(format!("{tag}-{index:02}.milp.json"))),
        })?;
        Ok(())
    };
    for i in 0..args.train_instances {
        encode_one("train", i, args.seed.wrapping_add(i as u64), &train_dir)?;
    }
    for i in 0..args.eval_instances {
        encode_one("eval", i, args.seed.wrapping_add(100_000 + i as u64), &eval_dir)?;
    }

    println!("[2/5] collecting backdoor labels");
    cmd_collect_backdoors(&CollectBackdoorsArgs {
        instances: vec![train_dir.clone()],
        out: Some(dataset_dir.clone()),
        k: 3,
        budget: 150,
        swaps: 5,
        node_limit: 1500,
        seed: args.seed,
        val_fraction: 0.34,
        jobs: args.jobs,
    })?;

    println!("[3/5] training");
    let model_path = out.join("model.json");
    cmd_train(&TrainArgs {
        dataset: dataset_dir,
        out: Some(model_path.clone()),
        width: 16,
        heads: 2,
        learning_rate: 1e-3,
        batch_size: 16,
        epochs: args.epochs,
        margin: crate::neural::DEFAULT_MARGIN,
        tau: crate::neural::DEFAULT_TAU,
        seed: args.seed,
    })?;

    println!("[4/5] evaluating on held-out instances");
    cmd_evaluate(&EvaluateArgs {
        instances: vec![eval_dir],
        out: Some(results_dir.clone()),
        methods: vec![
            MethodSpec::Model { path: model_path },
            MethodSpec::Random { k: 3 },
        ],
        benchmark: format!("pipeline-{}", args.params),
        headline: HeadlineArg::Nodes,
        time_limit: 900.0,
        node_limit: Some(5_000),
        gap: 1e-6,
        reference_node_limit: None,
        k: 3,
        seed: args.seed,
        jobs: args.jobs,
    })?;

    println!("[5/5] final report");
    cmd_report(&ReportArgs {
        runs: results_dir,
        format: ReportFormat::Csv,
        out: None,
    })?;

    let mut manifest = RunManifest::new("pipeline");
    manifest
        .param("params", &args.params)
        .param("train_instances", args.train_instances)
        .param("eval_instances", args.eval_instances)
        .param("epochs", args.epochs)
        .param("out", out.display())
        .seed("pipeline", args.seed);
    manifest.artifact_tree(&out)?;
    manifest.write(&out.join("run-manifest.json"))?;
    println!("pipeline artifacts in {}", out.display());
    Ok(())
}
