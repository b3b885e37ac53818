//! Experiment driver: run every prepared method on every instance, fix the
//! best-known objective per instance, derive records, and write the report
//! artifacts (records JSON, summary CSV, scatter CSV, trace JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bnb::{self, BranchPriority, Limits, SolveResult, SolverConfig, TracePoint};
use crate::milp::MilpInstance;

use super::{
    summarize, summary_to_csv, trace_by_iterations, HarnessError, Headline, MetricsSummary,
    RunRecord, DEFAULT_METHOD,
};

/// A named method with one solver setup per instance (aligned with the
/// instance list). Learned methods prepare per-instance priorities or a
/// per-instance configuration up front; the default method repeats the stock
/// setup.
#[derive(Debug, Clone)]
pub struct PreparedMethod {
    pub name: String,
    pub setups: Vec<(BranchPriority, SolverConfig)>,
}

impl PreparedMethod {
    /// The stock solver on every instance.
    pub fn default_method(n_instances: usize) -> Self {
        PreparedMethod {
            name: DEFAULT_METHOD.to_string(),
            setups: vec![(BranchPriority::new(), SolverConfig::default()); n_instances],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    /// Benchmark tag written into the CSV.
    pub benchmark: String,
    /// Per-run limits for the compared methods.
    pub limits: Limits,
    /// Longer budget for the reference solve that anchors the best-known
    /// objective. `None` skips the extra solve and uses only method runs.
    pub reference_limits: Option<Limits>,
    pub headline: Headline,
}

/// Everything one experiment produced, before and after aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub benchmark: String,
    pub headline: Headline,
    pub records: Vec<RunRecord>,
    pub summary: MetricsSummary,
    /// Best-known objective per instance (absent where nothing feasible was
    /// found by any run).
    pub v_star: BTreeMap<String, f64>,
}

/// Wall-time incumbent traces kept alongside the deterministic records, for
/// plotting; keyed `instance → method`.
pub type TraceFile = BTreeMap<String, BTreeMap<String, Vec<TracePoint>>>;

/// One instance's contribution to an experiment: every method's record, the
/// per-method incumbent traces, and the best-known objective (if any run
/// found an incumbent).
#[derive(Debug, Clone)]
pub struct InstanceRuns {
    pub instance: String,
    pub records: Vec<RunRecord>,
    pub traces: BTreeMap<String, Vec<TracePoint>>,
    pub v_star: Option<f64>,
}

/// Solve one instance under every prepared method (setup `index`), plus the
/// optional longer reference solve. Split out of [`run_experiment`] so
/// callers can schedule instances themselves; the output depends only on the
/// instance and `index`, never on scheduling.
pub fn run_instance(
    name: &str,
    milp: &MilpInstance,
    methods: &[PreparedMethod],
    index: usize,
    opts: &ExperimentOptions,
) -> Result<InstanceRuns, HarnessError> {
    let mut results: Vec<(&str, SolveResult)> = Vec::new();
    for m in methods {
        let (prio, config) = m.setups.get(index).ok_or_else(|| {
            HarnessError::Invalid(format!("method '{}' has no setup for instance {index}", m.name))
        })?;
        let r = bnb::solve(milp, config, prio, &opts.limits)
            .map_err(|e| HarnessError::Invalid(format!("solve failed on '{name}': {e}")))?;
        results.push((m.name.as_str(), r));
    }
    let reference = match &opts.reference_limits {
        Some(lim) => Some(
            bnb::solve(milp, &SolverConfig::default(), &BranchPriority::new(), lim).map_err(
                |e| HarnessError::Invalid(format!("reference solve failed on '{name}': {e}")),
            )?,
        ),
        None => None,
    };

    // Best-known objective: best (minimum) incumbent over the method
    // runs and the reference run.
    let v_star = results
        .iter()
        .map(|(_, r)| r)
        .chain(reference.iter())
        .filter_map(|r| r.objective)
        .fold(None::<f64>, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.min(v)))
        });

    // Shared deterministic horizon for the primal integral: the largest
    // LP-iteration count any compared method reached on this instance.
    let t_end = results
        .iter()
        .map(|(_, r)| r.lp_iterations)
        .max()
        .unwrap_or(0) as f64;

    let mut records = Vec::new();
    let mut traces = BTreeMap::new();
    for (method, r) in &results {
        let record = match v_star {
            Some(vs) => RunRecord::from_result(name.to_string(), *method, r, vs, t_end),
            // Nothing feasible anywhere: gap/integral are undefined; keep
            // the effort numbers and mark the integral with the full
            // horizon (gap level 1 throughout).
            None => RunRecord {
                instance: name.to_string(),
                method: method.to_string(),
                status: r.status,
                solve_time: r.wall_time,
                node_count: r.node_count,
                lp_iterations: r.lp_iterations,
                objective: None,
                primal_gap: None,
                primal_integral: t_end,
            },
        };
        records.push(record);
        traces.insert(method.to_string(), r.primal_trace.clone());
    }
    Ok(InstanceRuns {
        instance: name.to_string(),
        records,
        traces,
        v_star,
    })
}

/// Fold per-instance runs (in instance order) into the aggregated report
/// and the trace file.
pub fn assemble_experiment(
    runs: Vec<InstanceRuns>,
    opts: &ExperimentOptions,
) -> Result<(ExperimentReport, TraceFile), HarnessError> {
    let mut records = Vec::new();
    let mut traces: TraceFile = BTreeMap::new();
    let mut v_star_map = BTreeMap::new();
    for run in runs {
        records.extend(run.records);
        traces.insert(run.instance.clone(), run.traces);
        if let Some(vs) = run.v_star {
            v_star_map.insert(run.instance, vs);
        }
    }
    let summary = summarize(&records, opts.headline)?;
    Ok((
        ExperimentReport {
            benchmark: opts.benchmark.clone(),
            headline: opts.headline,
            records,
            summary,
            v_star: v_star_map,
        },
        traces,
    ))
}

/// Run `methods` over `instances` and aggregate. The method list must
/// contain [`DEFAULT_METHOD`]; every method must carry exactly one setup per
/// instance.
pub fn run_experiment(
    instances: &[(String, MilpInstance)],
    methods: &[PreparedMethod],
    opts: &ExperimentOptions,
) -> Result<(ExperimentReport, TraceFile), HarnessError> {
    run_experiment_jobs(instances, methods, opts, 1)
}

/// [`run_experiment`] fanned out over `jobs` threads (instances are
/// independent; records, summaries, and traces are identical to the
/// sequential run).
pub fn run_experiment_jobs(
    instances: &[(String, MilpInstance)],
    methods: &[PreparedMethod],
    opts: &ExperimentOptions,
    jobs: usize,
) -> Result<(ExperimentReport, TraceFile), HarnessError> {
    if instances.is_empty() {
        return Err(HarnessError::Empty);
    }
    if !methods.iter().any(|m| m.name == DEFAULT_METHOD) {
        return Err(HarnessError::Invalid(format!(
            "method list must include '{DEFAULT_METHOD}'"
        )));
    }
    for m in methods {
        if m.setups.len() != instances.len() {
            return Err(HarnessError::Invalid(format!(
                "method '{}' has {} setups for {} instances",
                m.name,
                m.setups.len(),
                instances.len()
            )));
        }
    }
    let runs = crate::par::par_map_indexed(instances, jobs, |i, (name, milp)| {
        run_instance(name, milp, methods, i, opts)
    });
    let runs: Vec<InstanceRuns> = runs.into_iter().collect::<Result<_, _>>()?;
    assemble_experiment(runs, opts)
}

/// Scatter CSV: one row per (instance, method) pair of headline values, for
/// default-vs-method scatter plots.
pub fn scatter_csv(report: &ExperimentReport) -> String {
    let mut by_instance: BTreeMap<&str, BTreeMap<&str, &RunRecord>> = BTreeMap::new();
    for r in &report.records {
        by_instance
            .entry(r.instance.as_str())
            .or_default()
            .insert(r.method.as_str(), r);
    }
    let mut out = String::from("instance,method,default_value,method_value\n");
    for (inst, per) in &by_instance {
        let Some(d) = per
            .get(DEFAULT_METHOD)
            .and_then(|r| report.headline.metric(r))
        else {
            continue;
        };
        for (method, rec) in per {
            if *method == DEFAULT_METHOD {
                continue;
            }
            let Some(v) = report.headline.metric(rec) else {
                continue;
            };
            out.push_str(&format!("{inst},{method},{d:.6},{v:.6}\n"));
        }
    }
    out
}

/// File names written by [`write_report`], all inside the output directory.
pub const RECORDS_FILE: &str = "records.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const TRACES_FILE: &str = "traces.json";

/// Persist the four report artifacts; returns the paths written.
pub fn write_report(
    dir: &Path,
    report: &ExperimentReport,
    traces: &TraceFile,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let records_path = dir.join(RECORDS_FILE);
    let summary_path = dir.join(SUMMARY_FILE);
    let scatter_path = dir.join(SCATTER_FILE);
    let traces_path = dir.join(TRACES_FILE);
    std::fs::write(
        &records_path,
        serde_json::to_string_pretty(report)
            .map_err(|e| HarnessError::Invalid(format!("serialize report: {e}")))?,
    )?;
    std::fs::write(&summary_path, summary_to_csv(&report.benchmark, &report.summary))?;
    std::fs::write(&scatter_path, scatter_csv(report))?;
    std::fs::write(
        &traces_path,
        serde_json::to_string(traces)
            .map_err(|e| HarnessError::Invalid(format!("serialize traces: {e}")))?,
    )?;
    Ok(vec![records_path, summary_path, scatter_path, traces_path])
}

/// Load every `records.json` found under `dir` (recursively) and
/// re-aggregate into one summary per benchmark tag.
pub fn collect_reports(dir: &Path) -> Result<Vec<ExperimentReport>, HarnessError> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = match std::fs::read_dir(&d) {
            Ok(e) => e,
            Err(e) => {
                return Err(HarnessError::Invalid(format!(
                    "cannot read directory {}: {e}",
                    d.display()
                )))
            }
        };
        for entry in entries {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().and_then(|n| n.to_str()) == Some(RECORDS_FILE) {
                let text = std::fs::read_to_string(&path)?;
                let report: ExperimentReport = serde_json::from_str(&text).map_err(|e| {
                    HarnessError::Parse(format!("{}: {e}", path.display()))
                })?;
                found.push(report);
            }
        }
    }
    found.sort_by(|a, b| a.benchmark.cmp(&b.benchmark));
    Ok(found)
}

/// Deterministic effort horizon for labeling runs of one instance outside a
/// full experiment: the largest LP-iteration count reached.
pub fn iteration_horizon(results: &[&SolveResult]) -> f64 {
    results.iter().map(|r| r.lp_iterations).max().unwrap_or(0) as f64
}

/// Best (minimum) incumbent objective across runs, if any run found one.
pub fn best_objective(results: &[&SolveResult]) -> Option<f64> {
    results
        .iter()
        .filter_map(|r| r.objective)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

/// Primal integral of one run on the deterministic iteration axis.
pub fn run_primal_integral(result: &SolveResult, t_end: f64, v_star: f64) -> f64 {
    super::primal_integral(&trace_by_iterations(&result.primal_trace), t_end, v_star)
}
